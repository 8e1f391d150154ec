#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lidarsim/nn/kernels.hpp"
#include "lidarsim/nn/rng.hpp"
#include "lidarsim/nn/tensor.hpp"

namespace lidarsim::nn {

/// Trainable tensor with gradient buffer and Adam state.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;
    Tensor<T> moment1;
    Tensor<T> moment2;
    std::int64_t steps = 0;

    Parameter() = default;
    Parameter(std::string name_, Tensor<T> init)
        : name(std::move(name_)), value(std::move(init)) {
        grad = Tensor<T>::zeros_like(value);
        moment1 = Tensor<T>::zeros_like(value);
        moment2 = Tensor<T>::zeros_like(value);
    }

    void zero_grad() { grad.fill(T{}); }
};

/// Standard Adam with bias correction; zeroes the gradient buffer afterwards.
template <typename T>
void adam_step(Parameter<T>& p, double lr, double beta1, double beta2, double epsilon) {
    p.steps += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(p.steps));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(p.steps));
    for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = static_cast<double>(p.grad.v[i]);
        const double m = beta1 * static_cast<double>(p.moment1.v[i]) + (1.0 - beta1) * g;
        const double v = beta2 * static_cast<double>(p.moment2.v[i]) + (1.0 - beta2) * g * g;
        p.moment1.v[i] = static_cast<T>(m);
        p.moment2.v[i] = static_cast<T>(v);
        const double update = lr * (m / bc1) / (std::sqrt(v / bc2) + epsilon);
        p.value.v[i] = static_cast<T>(static_cast<double>(p.value.v[i]) - update);
    }
    p.zero_grad();
}

template <typename T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor<T> forward(const Tensor<T>& x) = 0;
    /// Returns dL/dx and accumulates parameter gradients. Must follow the
    /// matching forward (layers cache what they need).
    virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
    virtual void collect_parameters(std::vector<Parameter<T>*>&) {}
    virtual void set_training(bool) {}
};

template <typename T>
class Conv2d : public Layer<T> {
public:
    Conv2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng,
           double init_std = 0.02)
        : stride_(stride), pad_(pad), kernel_(kernel), in_ch_(in_ch), out_ch_(out_ch) {
        Tensor<T> w(out_ch, in_ch, kernel, kernel);
        for (auto& v : w.v) v = static_cast<T>(rng.normal(0.0, init_std));
        weight_ = Parameter<T>(name + ".w", std::move(w));
        bias_ = Parameter<T>(name + ".b", Tensor<T>(1, out_ch, 1, 1));
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        if (x.c != in_ch_)
            raise("ShapeMismatch", weight_.name + ": input has " + std::to_string(x.c) +
                                       " channels, expected " + std::to_string(in_ch_));
        if (x.h + 2 * pad_ < kernel_ || x.w + 2 * pad_ < kernel_)
            raise("ShapeMismatch", weight_.name + ": input " + x.shape_str() +
                                       " smaller than kernel");
        x_ = x;
        dims_ = kernels::ConvDims{x.n, in_ch_, x.h, x.w, out_ch_, kernel_, stride_, pad_};
        Tensor<T> y(x.n, out_ch_, dims_.out_h(), dims_.out_w());
        kernels::conv_forward(dims_, x.v.data(), weight_.value.v.data(), y.v.data());
        const std::size_t plane = static_cast<std::size_t>(y.h) * y.w;
        for (int n = 0; n < y.n; ++n)
            for (int oc = 0; oc < y.c; ++oc) {
                const T b = bias_.value.v[oc];
                T* yp = &y.v[(static_cast<std::size_t>(n) * y.c + oc) * plane];
                for (std::size_t i = 0; i < plane; ++i) yp[i] += b;
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dw = Tensor<T>::zeros_like(weight_.value);
        kernels::conv_weight_grad(dims_, dy.v.data(), x_.v.data(), dw.v.data());
        for (std::size_t i = 0; i < dw.size(); ++i) weight_.grad.v[i] += dw.v[i];
        const std::size_t plane = static_cast<std::size_t>(dy.h) * dy.w;
        for (int n = 0; n < dy.n; ++n)
            for (int oc = 0; oc < dy.c; ++oc) {
                T acc{};
                const T* dp = &dy.v[(static_cast<std::size_t>(n) * dy.c + oc) * plane];
                for (std::size_t i = 0; i < plane; ++i) acc += dp[i];
                bias_.grad.v[oc] += acc;
            }
        Tensor<T> dx(x_.n, x_.c, x_.h, x_.w);
        kernels::conv_adjoint(dims_, dy.v.data(), weight_.value.v.data(), dx.v.data());
        return dx;
    }

    void collect_parameters(std::vector<Parameter<T>*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

    Parameter<T>& weight() { return weight_; }
    Parameter<T>& bias() { return bias_; }

private:
    Parameter<T> weight_;  // [out, in, k, k]
    Parameter<T> bias_;    // [1, out, 1, 1]
    Tensor<T> x_;
    kernels::ConvDims dims_;
    int stride_, pad_, kernel_, in_ch_, out_ch_;
};

template <typename T>
class ConvTranspose2d : public Layer<T> {
public:
    ConvTranspose2d(std::string name, int in_ch, int out_ch, int kernel, int stride, int pad,
                    Rng& rng, double init_std = 0.02)
        : stride_(stride), pad_(pad), kernel_(kernel), in_ch_(in_ch), out_ch_(out_ch) {
        Tensor<T> w(in_ch, out_ch, kernel, kernel);
        for (auto& v : w.v) v = static_cast<T>(rng.normal(0.0, init_std));
        weight_ = Parameter<T>(name + ".w", std::move(w));
        bias_ = Parameter<T>(name + ".b", Tensor<T>(1, out_ch, 1, 1));
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        if (x.c != in_ch_)
            raise("ShapeMismatch", weight_.name + ": input has " + std::to_string(x.c) +
                                       " channels, expected " + std::to_string(in_ch_));
        x_ = x;
        const int oh = (x.h - 1) * stride_ - 2 * pad_ + kernel_;
        const int ow = (x.w - 1) * stride_ - 2 * pad_ + kernel_;
        if (oh <= 0 || ow <= 0)
            raise("ShapeMismatch", weight_.name + ": degenerate transpose output");
        // Conv-view geometry: the transpose output is the dense in-side.
        dims_ = kernels::ConvDims{x.n, out_ch_, oh, ow, in_ch_, kernel_, stride_, pad_};
        Tensor<T> y(x.n, out_ch_, oh, ow);
        kernels::conv_adjoint(dims_, x.v.data(), weight_.value.v.data(), y.v.data());
        const std::size_t plane = static_cast<std::size_t>(oh) * ow;
        for (int n = 0; n < y.n; ++n)
            for (int oc = 0; oc < out_ch_; ++oc) {
                const T b = bias_.value.v[oc];
                T* yp = &y.v[(static_cast<std::size_t>(n) * out_ch_ + oc) * plane];
                for (std::size_t i = 0; i < plane; ++i) yp[i] += b;
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dw = Tensor<T>::zeros_like(weight_.value);
        kernels::conv_weight_grad(dims_, x_.v.data(), dy.v.data(), dw.v.data());
        for (std::size_t i = 0; i < dw.size(); ++i) weight_.grad.v[i] += dw.v[i];
        const std::size_t plane = static_cast<std::size_t>(dy.h) * dy.w;
        for (int n = 0; n < dy.n; ++n)
            for (int oc = 0; oc < out_ch_; ++oc) {
                T acc{};
                const T* dp = &dy.v[(static_cast<std::size_t>(n) * out_ch_ + oc) * plane];
                for (std::size_t i = 0; i < plane; ++i) acc += dp[i];
                bias_.grad.v[oc] += acc;
            }
        Tensor<T> dx(x_.n, x_.c, x_.h, x_.w);
        kernels::conv_forward(dims_, dy.v.data(), weight_.value.v.data(), dx.v.data());
        return dx;
    }

    void collect_parameters(std::vector<Parameter<T>*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

    Parameter<T>& weight() { return weight_; }
    Parameter<T>& bias() { return bias_; }

private:
    Parameter<T> weight_;  // [in, out, k, k]
    Parameter<T> bias_;    // [1, out, 1, 1]
    Tensor<T> x_;
    kernels::ConvDims dims_;
    int stride_, pad_, kernel_, in_ch_, out_ch_;
};

/// Normalization over batch and spatial dims with current-batch statistics
/// (training-mode semantics at all times; with batch 1 this is per-channel
/// instance normalization, matching the reference translation setup).
template <typename T>
class BatchNorm2d : public Layer<T> {
public:
    BatchNorm2d(std::string name, int channels, double epsilon = 1e-5)
        : epsilon_(epsilon), channels_(channels) {
        gamma_ = Parameter<T>(name + ".gamma", Tensor<T>(1, channels, 1, 1, T{1}));
        beta_ = Parameter<T>(name + ".beta", Tensor<T>(1, channels, 1, 1));
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        if (x.c != channels_) raise("ShapeMismatch", gamma_.name + ": channel mismatch");
        const std::size_t m = static_cast<std::size_t>(x.n) * x.h * x.w;
        if (m < 2) raise("DegenerateChannel", gamma_.name + ": batch*h*w must be >= 2");
        xhat_ = Tensor<T>::zeros_like(x);
        inv_std_.assign(channels_, 0.0);
        Tensor<T> y = Tensor<T>::zeros_like(x);
        const std::size_t plane = static_cast<std::size_t>(x.h) * x.w;
        for (int c = 0; c < channels_; ++c) {
            double mean = 0.0;
            for (int n = 0; n < x.n; ++n) {
                const T* xp = &x.v[(static_cast<std::size_t>(n) * x.c + c) * plane];
                for (std::size_t i = 0; i < plane; ++i) mean += static_cast<double>(xp[i]);
            }
            mean /= static_cast<double>(m);
            double var = 0.0;
            for (int n = 0; n < x.n; ++n) {
                const T* xp = &x.v[(static_cast<std::size_t>(n) * x.c + c) * plane];
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = static_cast<double>(xp[i]) - mean;
                    var += d * d;
                }
            }
            var /= static_cast<double>(m);
            const double denom = var + epsilon_;
            if (!(denom > 0.0))
                raise("DegenerateChannel", gamma_.name + ": variance + epsilon underflows");
            const double istd = 1.0 / std::sqrt(denom);
            inv_std_[c] = istd;
            const double g = static_cast<double>(gamma_.value.v[c]);
            const double b = static_cast<double>(beta_.value.v[c]);
            for (int n = 0; n < x.n; ++n) {
                const T* xp = &x.v[(static_cast<std::size_t>(n) * x.c + c) * plane];
                T* hp = &xhat_.v[(static_cast<std::size_t>(n) * x.c + c) * plane];
                T* yp = &y.v[(static_cast<std::size_t>(n) * x.c + c) * plane];
                for (std::size_t i = 0; i < plane; ++i) {
                    const double xh = (static_cast<double>(xp[i]) - mean) * istd;
                    hp[i] = static_cast<T>(xh);
                    yp[i] = static_cast<T>(g * xh + b);
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        require_same_shape(dy, xhat_, "BatchNorm2d::backward");
        const std::size_t m = static_cast<std::size_t>(dy.n) * dy.h * dy.w;
        const std::size_t plane = static_cast<std::size_t>(dy.h) * dy.w;
        Tensor<T> dx = Tensor<T>::zeros_like(dy);
        for (int c = 0; c < channels_; ++c) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (int n = 0; n < dy.n; ++n) {
                const T* dp = &dy.v[(static_cast<std::size_t>(n) * dy.c + c) * plane];
                const T* hp = &xhat_.v[(static_cast<std::size_t>(n) * dy.c + c) * plane];
                for (std::size_t i = 0; i < plane; ++i) {
                    sum_dy += static_cast<double>(dp[i]);
                    sum_dy_xhat += static_cast<double>(dp[i]) * static_cast<double>(hp[i]);
                }
            }
            beta_.grad.v[c] += static_cast<T>(sum_dy);
            gamma_.grad.v[c] += static_cast<T>(sum_dy_xhat);
            const double g = static_cast<double>(gamma_.value.v[c]);
            const double istd = inv_std_[c];
            const double mean_dy = sum_dy / static_cast<double>(m);
            const double mean_dy_xhat = sum_dy_xhat / static_cast<double>(m);
            for (int n = 0; n < dy.n; ++n) {
                const T* dp = &dy.v[(static_cast<std::size_t>(n) * dy.c + c) * plane];
                const T* hp = &xhat_.v[(static_cast<std::size_t>(n) * dy.c + c) * plane];
                T* xp = &dx.v[(static_cast<std::size_t>(n) * dy.c + c) * plane];
                for (std::size_t i = 0; i < plane; ++i) {
                    const double dxh = static_cast<double>(dp[i]) - mean_dy -
                                       static_cast<double>(hp[i]) * mean_dy_xhat;
                    xp[i] = static_cast<T>(g * istd * dxh);
                }
            }
        }
        return dx;
    }

    void collect_parameters(std::vector<Parameter<T>*>& out) override {
        out.push_back(&gamma_);
        out.push_back(&beta_);
    }

private:
    Parameter<T> gamma_;
    Parameter<T> beta_;
    Tensor<T> xhat_;
    std::vector<double> inv_std_;
    double epsilon_;
    int channels_;
};

template <typename T>
class LeakyReLU : public Layer<T> {
public:
    explicit LeakyReLU(double slope = 0.2) : slope_(slope) {}

    Tensor<T> forward(const Tensor<T>& x) override {
        x_ = x;
        Tensor<T> y = x;
        for (auto& v : y.v)
            if (v < T{}) v = static_cast<T>(slope_ * static_cast<double>(v));
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (x_.v[i] < T{}) dx.v[i] = static_cast<T>(slope_ * static_cast<double>(dx.v[i]));
        return dx;
    }

private:
    Tensor<T> x_;
    double slope_;
};

template <typename T>
class ReLU : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x) override {
        x_ = x;
        Tensor<T> y = x;
        for (auto& v : y.v) v = std::max(v, T{});
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (x_.v[i] <= T{}) dx.v[i] = T{};
        return dx;
    }

private:
    Tensor<T> x_;
};

template <typename T>
class Tanh : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x) override {
        y_ = x;
        for (auto& v : y_.v) v = static_cast<T>(std::tanh(static_cast<double>(v)));
        return y_;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i) {
            const double y = static_cast<double>(y_.v[i]);
            dx.v[i] = static_cast<T>(static_cast<double>(dx.v[i]) * (1.0 - y * y));
        }
        return dx;
    }

private:
    Tensor<T> y_;
};

template <typename T>
class Sigmoid : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x) override {
        y_ = x;
        for (auto& v : y_.v)
            v = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
        return y_;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i) {
            const double y = static_cast<double>(y_.v[i]);
            dx.v[i] = static_cast<T>(static_cast<double>(dx.v[i]) * y * (1.0 - y));
        }
        return dx;
    }

private:
    Tensor<T> y_;
};

/// Inverted dropout with an explicitly managed mask: the training loop calls
/// request_refresh() once per step and the next forward draws a fresh mask.
/// Without a refresh request the mask is stable, which keeps repeated
/// forwards (finite differences) consistent.
template <typename T>
class Dropout : public Layer<T> {
public:
    Dropout(double rate, Rng* rng) : rate_(rate), rng_(rng) {}

    void request_refresh() { want_refresh_ = true; }

    Tensor<T> forward(const Tensor<T>& x) override {
        if (!training_ || rate_ <= 0.0) {
            passthrough_ = true;
            return x;
        }
        passthrough_ = false;
        if (want_refresh_ || mask_.size() != x.size()) {
            mask_.resize(x.size());
            const T keep = static_cast<T>(1.0 / (1.0 - rate_));
            for (auto& m : mask_) m = rng_->uniform() < rate_ ? T{} : keep;
            want_refresh_ = false;
        }
        Tensor<T> y = x;
        for (std::size_t i = 0; i < y.size(); ++i) y.v[i] *= mask_[i];
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        if (passthrough_) return dy;
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i) dx.v[i] *= mask_[i];
        return dx;
    }

    void set_training(bool training) override { training_ = training; }

private:
    double rate_;
    Rng* rng_;
    std::vector<T> mask_;
    bool training_ = true;
    bool want_refresh_ = false;
    bool passthrough_ = false;
};

template <typename T>
class Sequential : public Layer<T> {
public:
    template <typename L, typename... Args>
    L* emplace(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L* raw = layer.get();
        layers_.push_back(std::move(layer));
        return raw;
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        Tensor<T> cur = x;
        for (auto& l : layers_) cur = l->forward(cur);
        return cur;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> cur = dy;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
        return cur;
    }

    void collect_parameters(std::vector<Parameter<T>*>& out) override {
        for (auto& l : layers_) l->collect_parameters(out);
    }

    void set_training(bool training) override {
        for (auto& l : layers_) l->set_training(training);
    }

private:
    std::vector<std::unique_ptr<Layer<T>>> layers_;
};

// Elementwise activation entry points mirroring the layer math (handy for
// scalar checks).
inline double leaky_relu(double x, double slope = 0.2) { return x >= 0 ? x : slope * x; }
inline double relu(double x) { return x > 0 ? x : 0.0; }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace lidarsim::nn
