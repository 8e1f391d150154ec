#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lidarsim/image.hpp"
#include "lidarsim/lidar_image.hpp"
#include "lidarsim/nn/checkpoint.hpp"
#include "lidarsim/nn/layers.hpp"

namespace lidarsim::pix2pix {

using nn::Parameter;
using nn::Rng;
using nn::Tensor;

struct UNetConfig {
    int input_size = 256;  // square, power of two
    int base_channels = 64;
    int depth = 8;  // number of down/up blocks
    int in_channels = 3;
    int out_channels = 1;
    int dropout_blocks = 3;  // first decoder blocks carrying dropout
    double dropout_rate = 0.5;

    void validate() const;
    static UNetConfig desk() {
        UNetConfig cfg;
        cfg.input_size = 64;
        cfg.base_channels = 8;
        cfg.depth = 4;
        return cfg;
    }
};

struct PatchGANConfig {
    int base_channels = 64;
    int stride2_layers = 3;  // stride-2 blocks before the stride-1 block + output conv
    int condition_channels = 3;
    int candidate_channels = 1;

    void validate() const;
    static PatchGANConfig desk() {
        PatchGANConfig cfg;
        cfg.base_channels = 8;
        return cfg;
    }
};

/// Spatial extent of the discriminator logit grid for a square input.
int patchgan_logit_extent(const PatchGANConfig& cfg, int input_size);

struct TrainConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double adam_epsilon = 1e-8;
    double lambda = 100.0;
    int steps = 32000;
    int batch = 1;
    std::uint64_t seed = 42;
    int checkpoint_every = 0;  // 0 = final only
    int log_every = 1;
};

template <typename T>
struct LossGrad {
    double value = 0;
    Tensor<T> grad;
};

/// Mean sigmoid binary cross-entropy of logits against a constant target,
/// evaluated in the numerically stable form.
template <typename T>
LossGrad<T> bce_with_logits(const Tensor<T>& logits, double target) {
    LossGrad<T> out;
    out.grad = Tensor<T>::zeros_like(logits);
    const double n = static_cast<double>(logits.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        const double z = static_cast<double>(logits.v[i]);
        acc += std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
        out.grad.v[i] = static_cast<T>((nn::sigmoid(z) - target) / n);
    }
    out.value = acc / n;
    return out;
}

/// Mean absolute error with gradient w.r.t. the prediction.
template <typename T>
LossGrad<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    nn::require_same_shape(pred, target, "l1_loss");
    LossGrad<T> out;
    out.grad = Tensor<T>::zeros_like(pred);
    const double n = static_cast<double>(pred.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = static_cast<double>(pred.v[i]) - static_cast<double>(target.v[i]);
        acc += std::abs(d);
        out.grad.v[i] = static_cast<T>((d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) / n);
    }
    out.value = acc / n;
    return out;
}

struct GeneratorLossParts {
    double total = 0;
    double adversarial = 0;
    double l1 = 0;
};

/// total = BCE(fake logits vs ones) + lambda * mean|gen_out - target|.
template <typename T>
GeneratorLossParts generator_loss(const Tensor<T>& disc_fake_logits, const Tensor<T>& gen_out,
                                  const Tensor<T>& target, double lambda) {
    nn::require_same_shape(gen_out, target, "generator_loss");
    GeneratorLossParts parts;
    parts.adversarial = bce_with_logits(disc_fake_logits, 1.0).value;
    parts.l1 = l1_loss(gen_out, target).value;
    parts.total = parts.adversarial + lambda * parts.l1;
    return parts;
}

/// BCE(real vs ones) + BCE(fake vs zeros).
template <typename T>
double discriminator_loss(const Tensor<T>& real_logits, const Tensor<T>& fake_logits) {
    nn::require_same_shape(real_logits, fake_logits, "discriminator_loss");
    return bce_with_logits(real_logits, 1.0).value + bce_with_logits(fake_logits, 0.0).value;
}

/// U-Net: stride-2 4x4 conv encoder (batch norm except on the first and
/// innermost blocks, LeakyReLU 0.2) mirrored by stride-2 4x4 transpose-conv
/// decoder (batch norm, dropout on the first blocks, ReLU) with skip
/// concatenation, final tanh. Channel schedule base * min(2^level, 8).
template <typename T>
class UNetGenerator {
public:
    UNetGenerator(const UNetConfig& cfg, Rng& init_rng, Rng* dropout_rng);

    Tensor<T> forward(const Tensor<T>& x);
    Tensor<T> backward(const Tensor<T>& dy);
    void collect_parameters(std::vector<Parameter<T>*>& out);
    std::vector<Parameter<T>*> parameters();
    void set_training(bool training);
    void request_dropout_refresh();
    const UNetConfig& config() const { return cfg_; }

private:
    UNetConfig cfg_;
    std::vector<std::unique_ptr<nn::Conv2d<T>>> enc_conv_;
    std::vector<std::unique_ptr<nn::BatchNorm2d<T>>> enc_bn_;  // nullptr where absent
    std::vector<std::unique_ptr<nn::LeakyReLU<T>>> enc_act_;
    std::vector<std::unique_ptr<nn::ConvTranspose2d<T>>> dec_conv_;
    std::vector<std::unique_ptr<nn::BatchNorm2d<T>>> dec_bn_;
    std::vector<std::unique_ptr<nn::Dropout<T>>> dec_drop_;
    std::vector<std::unique_ptr<nn::ReLU<T>>> dec_act_;
    nn::Tanh<T> out_act_;
    std::vector<int> skip_channels_;
};

/// PatchGAN on the channel-concatenated (condition, candidate) pair; emits a
/// logit grid, no final sigmoid.
template <typename T>
class PatchGAN {
public:
    PatchGAN(const PatchGANConfig& cfg, Rng& init_rng);

    Tensor<T> forward(const Tensor<T>& condition, const Tensor<T>& candidate);
    /// Returns (d_condition, d_candidate).
    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& dlogits);
    void collect_parameters(std::vector<Parameter<T>*>& out);
    std::vector<Parameter<T>*> parameters();
    void set_training(bool training);
    void zero_grads();
    const PatchGANConfig& config() const { return cfg_; }

private:
    PatchGANConfig cfg_;
    nn::Sequential<T> net_;
};

struct StepRecord {
    int step = 0;
    double d_loss = 0;
    double g_total = 0;
    double g_adv = 0;
    double g_l1 = 0;
};

template <typename T>
class Pix2Pix {
public:
    Pix2Pix(const UNetConfig& gcfg, const PatchGANConfig& dcfg, std::uint64_t seed);

    /// One discriminator Adam step followed by one generator Adam step on a
    /// single (input, target) pair, both already scaled to [-1, 1].
    StepRecord train_step(const Tensor<T>& input, const Tensor<T>& target,
                          const TrainConfig& cfg, int step_index);

    /// [0,1] image of the network's input size to a visibility map.
    VisibilityMap infer(const ImageF& image);
    Tensor<T> infer_tensor(const Tensor<T>& input);  // eval-mode forward

    UNetGenerator<T>& generator() { return gen_; }
    PatchGAN<T>& discriminator() { return disc_; }

    std::vector<nn::NamedTensor> snapshot();
    void restore(const std::vector<nn::NamedTensor>& params);

private:
    UNetConfig gcfg_;
    PatchGANConfig dcfg_;
    Rng init_rng_;
    Rng dropout_rng_;
    UNetGenerator<T> gen_;
    PatchGAN<T> disc_;
};

struct TrainHooks {
    /// Called per logged step.
    std::function<void(const StepRecord&)> on_record;
    /// Called when a checkpoint should be persisted (periodic + final).
    std::function<void(int step)> on_checkpoint;
};

/// Cycles through the samples in order; throws EmptyDataset / NonFiniteLoss
/// (after restoring the last finite state) per the training contract.
template <typename T>
std::vector<StepRecord> train(Pix2Pix<T>& model,
                              const std::vector<std::pair<Tensor<T>, Tensor<T>>>& pairs,
                              const TrainConfig& cfg, const TrainHooks& hooks = {});

// [0,1] images <-> [-1,1] network tensors.
template <typename T>
Tensor<T> image_to_signed_tensor(const ImageF& img) {
    Tensor<T> t(1, img.channels, img.height, img.width);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                t.at(0, c, y, x) = static_cast<T>(2.0 * img.at(x, y, c) - 1.0);
    return t;
}

template <typename T>
Tensor<T> map_to_signed_tensor(const VisibilityMap& map) {
    Tensor<T> t(1, 1, map.height, map.width);
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x)
            t.at(0, 0, y, x) = static_cast<T>(2.0 * map.at(x, y) - 1.0);
    return t;
}

template <typename T>
VisibilityMap signed_tensor_to_map(const Tensor<T>& t) {
    VisibilityMap map(t.w, t.h);
    for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x) {
            const double v = (static_cast<double>(t.at(0, 0, y, x)) + 1.0) / 2.0;
            map.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    return map;
}

extern template class UNetGenerator<float>;
extern template class UNetGenerator<double>;
extern template class PatchGAN<float>;
extern template class PatchGAN<double>;
extern template class Pix2Pix<float>;
extern template class Pix2Pix<double>;
extern template std::vector<StepRecord> train<float>(
    Pix2Pix<float>&, const std::vector<std::pair<Tensor<float>, Tensor<float>>>&,
    const TrainConfig&, const TrainHooks&);
extern template std::vector<StepRecord> train<double>(
    Pix2Pix<double>&, const std::vector<std::pair<Tensor<double>, Tensor<double>>>&,
    const TrainConfig&, const TrainHooks&);

}  // namespace lidarsim::pix2pix
