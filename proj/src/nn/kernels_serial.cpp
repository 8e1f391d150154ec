#include "kernels_impl.hpp"

namespace lidarsim::nn::kernels {

template <typename T>
void conv_forward_serial(const ConvDims& d, const T* x, const T* w, T* y) {
    for (int n = 0; n < d.batch; ++n)
        for (int oc = 0; oc < d.out_ch; ++oc) detail::conv_forward_cell(d, x, w, y, n, oc);
}

template <typename T>
void conv_adjoint_serial(const ConvDims& d, const T* g, const T* w, T* dx) {
    for (int n = 0; n < d.batch; ++n)
        for (int ic = 0; ic < d.in_ch; ++ic) detail::conv_adjoint_cell(d, g, w, dx, n, ic);
}

template <typename T>
void conv_weight_grad_serial(const ConvDims& d, const T* g, const T* x, T* dw) {
    for (int oc = 0; oc < d.out_ch; ++oc)
        for (int ic = 0; ic < d.in_ch; ++ic) detail::conv_weight_grad_cell(d, g, x, dw, oc, ic);
}

template void conv_forward_serial<float>(const ConvDims&, const float*, const float*, float*);
template void conv_forward_serial<double>(const ConvDims&, const double*, const double*,
                                          double*);
template void conv_adjoint_serial<float>(const ConvDims&, const float*, const float*, float*);
template void conv_adjoint_serial<double>(const ConvDims&, const double*, const double*,
                                          double*);
template void conv_weight_grad_serial<float>(const ConvDims&, const float*, const float*,
                                             float*);
template void conv_weight_grad_serial<double>(const ConvDims&, const double*, const double*,
                                              double*);

}  // namespace lidarsim::nn::kernels
