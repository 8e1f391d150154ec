#pragma once

namespace lidarsim::nn::kernels {

/// Geometry of a strided correlation. "in" is the high-resolution side, "out"
/// the low-resolution side; ConvTranspose2d reuses the same geometry with the
/// roles of its input/output swapped.
struct ConvDims {
    int batch = 1;
    int in_ch = 1;
    int in_h = 0;
    int in_w = 0;
    int out_ch = 1;
    int kernel = 3;
    int stride = 1;
    int pad = 0;

    int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
    int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
};

// y[n,oc,oh,ow] = sum_{ic,i,j} x[n,ic,oh*s-p+i,ow*s-p+j] * w[oc,ic,i,j]
// x: [batch, in_ch, in_h, in_w]; w: [out_ch, in_ch, k, k]; y: [batch, out_ch, out_h, out_w]
//
// Every output element is accumulated serially by exactly one thread, so the
// parallel variants are bitwise identical to the serial references.
template <typename T>
void conv_forward_serial(const ConvDims& d, const T* x, const T* w, T* y);
template <typename T>
void conv_forward_parallel(const ConvDims& d, const T* x, const T* w, T* y);

// Adjoint of conv_forward: maps the out-side map g back to the in-side.
// dx[n,ic,ih,iw] = sum_{oc,i,j valid} g[n,oc,(ih+p-i)/s,(iw+p-j)/s] * w[oc,ic,i,j]
// Also the forward pass of ConvTranspose2d (w then indexed [in-of-transpose, out, i, j]).
template <typename T>
void conv_adjoint_serial(const ConvDims& d, const T* g, const T* w, T* dx);
template <typename T>
void conv_adjoint_parallel(const ConvDims& d, const T* g, const T* w, T* dx);

// Weight gradient: dw[oc,ic,i,j] = sum_{n,oh,ow} g[n,oc,oh,ow] * x[n,ic,oh*s-p+i,ow*s-p+j]
// (g on the out side, x on the in side).
template <typename T>
void conv_weight_grad_serial(const ConvDims& d, const T* g, const T* x, T* dw);
template <typename T>
void conv_weight_grad_parallel(const ConvDims& d, const T* g, const T* x, T* dw);

// Dispatch on lidarsim::runtime::threads().
template <typename T>
void conv_forward(const ConvDims& d, const T* x, const T* w, T* y);
template <typename T>
void conv_adjoint(const ConvDims& d, const T* g, const T* w, T* dx);
template <typename T>
void conv_weight_grad(const ConvDims& d, const T* g, const T* x, T* dw);

}  // namespace lidarsim::nn::kernels
