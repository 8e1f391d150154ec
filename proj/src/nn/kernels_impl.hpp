#pragma once

// Shared per-element bodies for the convolution kernels. The serial and
// OpenMP translation units both instantiate these, which keeps the two paths
// bitwise identical by construction.

#include <cstddef>

#include "lidarsim/nn/kernels.hpp"

namespace lidarsim::nn::kernels::detail {

template <typename T>
inline void conv_forward_cell(const ConvDims& d, const T* x, const T* w, T* y, int n, int oc) {
    const int oh_n = d.out_h();
    const int ow_n = d.out_w();
    const std::size_t in_plane = static_cast<std::size_t>(d.in_h) * d.in_w;
    const std::size_t in_stride_n = static_cast<std::size_t>(d.in_ch) * in_plane;
    const T* wbase = w + static_cast<std::size_t>(oc) * d.in_ch * d.kernel * d.kernel;
    T* ybase = y + (static_cast<std::size_t>(n) * d.out_ch + oc) * oh_n * ow_n;
    for (int oh = 0; oh < oh_n; ++oh) {
        for (int ow = 0; ow < ow_n; ++ow) {
            T acc{};
            for (int ic = 0; ic < d.in_ch; ++ic) {
                const T* xc = x + static_cast<std::size_t>(n) * in_stride_n + ic * in_plane;
                const T* wc = wbase + static_cast<std::size_t>(ic) * d.kernel * d.kernel;
                for (int i = 0; i < d.kernel; ++i) {
                    const int ih = oh * d.stride - d.pad + i;
                    if (ih < 0 || ih >= d.in_h) continue;
                    for (int j = 0; j < d.kernel; ++j) {
                        const int iw = ow * d.stride - d.pad + j;
                        if (iw < 0 || iw >= d.in_w) continue;
                        acc += xc[static_cast<std::size_t>(ih) * d.in_w + iw] *
                               wc[i * d.kernel + j];
                    }
                }
            }
            ybase[static_cast<std::size_t>(oh) * ow_n + ow] = acc;
        }
    }
}

template <typename T>
inline void conv_adjoint_cell(const ConvDims& d, const T* g, const T* w, T* dx, int n, int ic) {
    const int oh_n = d.out_h();
    const int ow_n = d.out_w();
    const std::size_t out_plane = static_cast<std::size_t>(oh_n) * ow_n;
    const std::size_t kk = static_cast<std::size_t>(d.kernel) * d.kernel;
    T* dxc = dx + (static_cast<std::size_t>(n) * d.in_ch + ic) * d.in_h * d.in_w;
    for (int ih = 0; ih < d.in_h; ++ih) {
        for (int iw = 0; iw < d.in_w; ++iw) {
            T acc{};
            for (int oc = 0; oc < d.out_ch; ++oc) {
                const T* gc = g + (static_cast<std::size_t>(n) * d.out_ch + oc) * out_plane;
                const T* wc = w + (static_cast<std::size_t>(oc) * d.in_ch + ic) * kk;
                for (int i = 0; i < d.kernel; ++i) {
                    const int num_h = ih + d.pad - i;
                    if (num_h < 0 || num_h % d.stride != 0) continue;
                    const int oh = num_h / d.stride;
                    if (oh >= oh_n) continue;
                    for (int j = 0; j < d.kernel; ++j) {
                        const int num_w = iw + d.pad - j;
                        if (num_w < 0 || num_w % d.stride != 0) continue;
                        const int ow = num_w / d.stride;
                        if (ow >= ow_n) continue;
                        acc += gc[static_cast<std::size_t>(oh) * ow_n + ow] *
                               wc[i * d.kernel + j];
                    }
                }
            }
            dxc[static_cast<std::size_t>(ih) * d.in_w + iw] = acc;
        }
    }
}

template <typename T>
inline void conv_weight_grad_cell(const ConvDims& d, const T* g, const T* x, T* dw, int oc,
                                  int ic) {
    const int oh_n = d.out_h();
    const int ow_n = d.out_w();
    const std::size_t out_plane = static_cast<std::size_t>(oh_n) * ow_n;
    const std::size_t in_plane = static_cast<std::size_t>(d.in_h) * d.in_w;
    T* dwc = dw + (static_cast<std::size_t>(oc) * d.in_ch + ic) * d.kernel * d.kernel;
    for (int i = 0; i < d.kernel; ++i) {
        for (int j = 0; j < d.kernel; ++j) {
            T acc{};
            for (int n = 0; n < d.batch; ++n) {
                const T* gc = g + (static_cast<std::size_t>(n) * d.out_ch + oc) * out_plane;
                const T* xc = x + (static_cast<std::size_t>(n) * d.in_ch + ic) * in_plane;
                for (int oh = 0; oh < oh_n; ++oh) {
                    const int ih = oh * d.stride - d.pad + i;
                    if (ih < 0 || ih >= d.in_h) continue;
                    for (int ow = 0; ow < ow_n; ++ow) {
                        const int iw = ow * d.stride - d.pad + j;
                        if (iw < 0 || iw >= d.in_w) continue;
                        acc += gc[static_cast<std::size_t>(oh) * ow_n + ow] *
                               xc[static_cast<std::size_t>(ih) * d.in_w + iw];
                    }
                }
            }
            dwc[i * d.kernel + j] = acc;
        }
    }
}

}  // namespace lidarsim::nn::kernels::detail
