#include "kernels_impl.hpp"
#include "lidarsim/runtime.hpp"

namespace lidarsim::nn::kernels {

template <typename T>
void conv_forward_parallel(const ConvDims& d, const T* x, const T* w, T* y) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.batch; ++n)
        for (int oc = 0; oc < d.out_ch; ++oc) detail::conv_forward_cell(d, x, w, y, n, oc);
}

template <typename T>
void conv_adjoint_parallel(const ConvDims& d, const T* g, const T* w, T* dx) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < d.batch; ++n)
        for (int ic = 0; ic < d.in_ch; ++ic) detail::conv_adjoint_cell(d, g, w, dx, n, ic);
}

template <typename T>
void conv_weight_grad_parallel(const ConvDims& d, const T* g, const T* x, T* dw) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int oc = 0; oc < d.out_ch; ++oc)
        for (int ic = 0; ic < d.in_ch; ++ic) detail::conv_weight_grad_cell(d, g, x, dw, oc, ic);
}

template <typename T>
void conv_forward(const ConvDims& d, const T* x, const T* w, T* y) {
    if (runtime::parallel_enabled())
        conv_forward_parallel(d, x, w, y);
    else
        conv_forward_serial(d, x, w, y);
}

template <typename T>
void conv_adjoint(const ConvDims& d, const T* g, const T* w, T* dx) {
    if (runtime::parallel_enabled())
        conv_adjoint_parallel(d, g, w, dx);
    else
        conv_adjoint_serial(d, g, w, dx);
}

template <typename T>
void conv_weight_grad(const ConvDims& d, const T* g, const T* x, T* dw) {
    if (runtime::parallel_enabled())
        conv_weight_grad_parallel(d, g, x, dw);
    else
        conv_weight_grad_serial(d, g, x, dw);
}

template void conv_forward_parallel<float>(const ConvDims&, const float*, const float*, float*);
template void conv_forward_parallel<double>(const ConvDims&, const double*, const double*,
                                            double*);
template void conv_adjoint_parallel<float>(const ConvDims&, const float*, const float*, float*);
template void conv_adjoint_parallel<double>(const ConvDims&, const double*, const double*,
                                            double*);
template void conv_weight_grad_parallel<float>(const ConvDims&, const float*, const float*,
                                               float*);
template void conv_weight_grad_parallel<double>(const ConvDims&, const double*, const double*,
                                                double*);

template void conv_forward<float>(const ConvDims&, const float*, const float*, float*);
template void conv_forward<double>(const ConvDims&, const double*, const double*, double*);
template void conv_adjoint<float>(const ConvDims&, const float*, const float*, float*);
template void conv_adjoint<double>(const ConvDims&, const double*, const double*, double*);
template void conv_weight_grad<float>(const ConvDims&, const float*, const float*, float*);
template void conv_weight_grad<double>(const ConvDims&, const double*, const double*, double*);

}  // namespace lidarsim::nn::kernels
