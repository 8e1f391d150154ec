#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lidarsim/error.hpp"

namespace lidarsim::nn {

/// Dense rank-4 tensor in NCHW order. Parameters reuse the same container
/// (conv weights as [out, in, kh, kw], biases as [1, c, 1, 1]).
template <typename T>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, T fill = T{})
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

    static Tensor zeros(int n, int c, int h, int w) { return Tensor(n, c, h, w); }
    static Tensor zeros_like(const Tensor& other) {
        return Tensor(other.n, other.c, other.h, other.w);
    }

    std::size_t size() const { return v.size(); }
    std::array<int, 4> shape() const { return {n, c, h, w}; }
    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    T& at(int in, int ic, int ih, int iw) {
        return v[((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw];
    }
    const T& at(int in, int ic, int ih, int iw) const {
        return v[((static_cast<std::size_t>(in) * c + ic) * h + ih) * w + iw];
    }

    void fill(T value) { std::fill(v.begin(), v.end(), value); }

    std::string shape_str() const {
        return "[" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) +
               "," + std::to_string(w) + "]";
    }
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (!a.same_shape(b))
        raise("ShapeMismatch",
              std::string(what) + ": " + a.shape_str() + " vs " + b.shape_str());
}

/// Channel concatenation [a | b] and its adjoint.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        raise("ShapeMismatch", "concat_channels: " + a.shape_str() + " vs " + b.shape_str());
    Tensor<T> out(a.n, a.c + b.c, a.h, a.w);
    const std::size_t plane = static_cast<std::size_t>(a.h) * a.w;
    for (int in = 0; in < a.n; ++in) {
        std::copy_n(&a.v[static_cast<std::size_t>(in) * a.c * plane], a.c * plane,
                    &out.v[static_cast<std::size_t>(in) * out.c * plane]);
        std::copy_n(&b.v[static_cast<std::size_t>(in) * b.c * plane], b.c * plane,
                    &out.v[static_cast<std::size_t>(in) * out.c * plane + a.c * plane]);
    }
    return out;
}

template <typename T>
void split_channels(const Tensor<T>& joint, int first_channels, Tensor<T>& first,
                    Tensor<T>& second) {
    first = Tensor<T>(joint.n, first_channels, joint.h, joint.w);
    second = Tensor<T>(joint.n, joint.c - first_channels, joint.h, joint.w);
    const std::size_t plane = static_cast<std::size_t>(joint.h) * joint.w;
    for (int in = 0; in < joint.n; ++in) {
        std::copy_n(&joint.v[static_cast<std::size_t>(in) * joint.c * plane],
                    first.c * plane, &first.v[static_cast<std::size_t>(in) * first.c * plane]);
        std::copy_n(&joint.v[static_cast<std::size_t>(in) * joint.c * plane + first.c * plane],
                    second.c * plane,
                    &second.v[static_cast<std::size_t>(in) * second.c * plane]);
    }
}

}  // namespace lidarsim::nn
