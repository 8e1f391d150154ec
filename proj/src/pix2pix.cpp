#include "lidarsim/pix2pix.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "lidarsim/error.hpp"

namespace lidarsim::pix2pix {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

int channel_at(int base, int level) { return base * std::min(1 << level, 8); }

}  // namespace

void UNetConfig::validate() const {
    if (base_channels < 1) raise("InvalidConfig", "base_channels must be >= 1");
    if (depth < 1) raise("InvalidConfig", "depth must be >= 1");
    if (!is_power_of_two(input_size))
        raise("InvalidConfig", "input_size must be a power of two, got " +
                                   std::to_string(input_size));
    if (input_size < (1 << depth))
        raise("InvalidConfig", "input_size " + std::to_string(input_size) +
                                   " is smaller than 2^depth = " + std::to_string(1 << depth));
    if (in_channels < 1 || out_channels < 1) raise("InvalidConfig", "channel counts must be >= 1");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        raise("InvalidConfig", "dropout_rate must lie in [0, 1)");
}

void PatchGANConfig::validate() const {
    if (base_channels < 1) raise("InvalidConfig", "base_channels must be >= 1");
    if (stride2_layers < 1) raise("InvalidConfig", "stride2_layers must be >= 1");
    if (condition_channels < 1 || candidate_channels < 1)
        raise("InvalidConfig", "channel counts must be >= 1");
}

int patchgan_logit_extent(const PatchGANConfig& cfg, int input_size) {
    int s = input_size;
    for (int i = 0; i < cfg.stride2_layers; ++i) s = (s + 2 * 1 - 4) / 2 + 1;
    s = (s + 2 * 1 - 4) / 1 + 1;  // stride-1 block
    s = (s + 2 * 1 - 4) / 1 + 1;  // output conv
    return s;
}

// ---------------------------------------------------------------------------
// UNetGenerator

template <typename T>
UNetGenerator<T>::UNetGenerator(const UNetConfig& cfg, Rng& init_rng, Rng* dropout_rng)
    : cfg_(cfg) {
    cfg_.validate();
    const int depth = cfg_.depth;
    for (int i = 0; i < depth; ++i) {
        const int in_ch = i == 0 ? cfg_.in_channels : channel_at(cfg_.base_channels, i - 1);
        const int out_ch = channel_at(cfg_.base_channels, i);
        enc_conv_.push_back(std::make_unique<nn::Conv2d<T>>("g.enc" + std::to_string(i), in_ch,
                                                            out_ch, 4, 2, 1, init_rng));
        // No norm on the first block (reference architecture) nor on the
        // innermost one, whose 1x1 spatial extent leaves batch-1 statistics
        // degenerate.
        const bool has_bn = i > 0 && i < depth - 1;
        enc_bn_.push_back(has_bn ? std::make_unique<nn::BatchNorm2d<T>>(
                                       "g.enc" + std::to_string(i) + ".bn", out_ch)
                                 : nullptr);
        enc_act_.push_back(std::make_unique<nn::LeakyReLU<T>>(0.2));
        skip_channels_.push_back(out_ch);
    }
    for (int j = 0; j < depth; ++j) {
        const bool outermost = j == depth - 1;
        const int enc_level = depth - 1 - j;  // mirrored encoder level
        const int in_ch = j == 0 ? channel_at(cfg_.base_channels, depth - 1)
                                 : 2 * channel_at(cfg_.base_channels, enc_level);
        const int out_ch =
            outermost ? cfg_.out_channels : channel_at(cfg_.base_channels, enc_level - 1);
        dec_conv_.push_back(std::make_unique<nn::ConvTranspose2d<T>>(
            "g.dec" + std::to_string(j), in_ch, out_ch, 4, 2, 1, init_rng));
        dec_bn_.push_back(outermost ? nullptr
                                    : std::make_unique<nn::BatchNorm2d<T>>(
                                          "g.dec" + std::to_string(j) + ".bn", out_ch));
        const bool has_dropout = !outermost && j < cfg_.dropout_blocks && cfg_.dropout_rate > 0;
        dec_drop_.push_back(has_dropout
                                ? std::make_unique<nn::Dropout<T>>(cfg_.dropout_rate, dropout_rng)
                                : nullptr);
        dec_act_.push_back(outermost ? nullptr : std::make_unique<nn::ReLU<T>>());
    }
}

template <typename T>
Tensor<T> UNetGenerator<T>::forward(const Tensor<T>& x) {
    if (x.c != cfg_.in_channels)
        raise("ShapeMismatch", "generator input has " + std::to_string(x.c) +
                                   " channels, expected " + std::to_string(cfg_.in_channels));
    if (x.h != x.w) raise("SizeMismatch", "generator input must be square, got " + x.shape_str());
    if (x.h != cfg_.input_size)
        raise("SizeMismatch", "generator input is " + std::to_string(x.h) +
                                  " px, configured for " + std::to_string(cfg_.input_size));

    const int depth = cfg_.depth;
    std::vector<Tensor<T>> enc_out(depth);
    Tensor<T> cur = x;
    for (int i = 0; i < depth; ++i) {
        cur = enc_conv_[i]->forward(cur);
        if (enc_bn_[i]) cur = enc_bn_[i]->forward(cur);
        cur = enc_act_[i]->forward(cur);
        enc_out[i] = cur;
    }
    for (int j = 0; j < depth; ++j) {
        const bool outermost = j == depth - 1;
        const Tensor<T> input =
            j == 0 ? cur : concat_channels(cur, enc_out[depth - 1 - j]);
        Tensor<T> t = dec_conv_[j]->forward(input);
        if (!outermost) {
            t = dec_bn_[j]->forward(t);
            if (dec_drop_[j]) t = dec_drop_[j]->forward(t);
            cur = dec_act_[j]->forward(t);
        } else {
            cur = out_act_.forward(t);
        }
    }
    return cur;
}

template <typename T>
Tensor<T> UNetGenerator<T>::backward(const Tensor<T>& dy) {
    const int depth = cfg_.depth;
    std::vector<Tensor<T>> skip_grad(depth);  // gradients flowing into encoder outputs

    Tensor<T> cur = dy;
    for (int j = depth - 1; j >= 0; --j) {
        const bool outermost = j == depth - 1;
        Tensor<T> t = outermost ? out_act_.backward(cur) : cur;
        if (!outermost) {
            t = dec_act_[j]->backward(t);
            if (dec_drop_[j]) t = dec_drop_[j]->backward(t);
            t = dec_bn_[j]->backward(t);
        }
        Tensor<T> dinput = dec_conv_[j]->backward(t);
        if (j == 0) {
            cur = dinput;  // goes straight into the innermost encoder output
        } else {
            Tensor<T> dprev, dskip;
            split_channels(dinput, dinput.c / 2, dprev, dskip);
            skip_grad[depth - 1 - j] = std::move(dskip);
            cur = std::move(dprev);
        }
    }

    for (int i = depth - 1; i >= 0; --i) {
        if (i < depth - 1 && skip_grad[i].size() > 0) {
            // The encoder output feeds both the next encoder block and a skip.
            for (std::size_t k = 0; k < cur.size(); ++k) cur.v[k] += skip_grad[i].v[k];
        }
        cur = enc_act_[i]->backward(cur);
        if (enc_bn_[i]) cur = enc_bn_[i]->backward(cur);
        cur = enc_conv_[i]->backward(cur);
    }
    return cur;
}

template <typename T>
void UNetGenerator<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
    for (int i = 0; i < cfg_.depth; ++i) {
        enc_conv_[i]->collect_parameters(out);
        if (enc_bn_[i]) enc_bn_[i]->collect_parameters(out);
    }
    for (int j = 0; j < cfg_.depth; ++j) {
        dec_conv_[j]->collect_parameters(out);
        if (dec_bn_[j]) dec_bn_[j]->collect_parameters(out);
    }
}

template <typename T>
std::vector<Parameter<T>*> UNetGenerator<T>::parameters() {
    std::vector<Parameter<T>*> out;
    collect_parameters(out);
    return out;
}

template <typename T>
void UNetGenerator<T>::set_training(bool training) {
    for (auto& d : dec_drop_)
        if (d) d->set_training(training);
}

template <typename T>
void UNetGenerator<T>::request_dropout_refresh() {
    for (auto& d : dec_drop_)
        if (d) d->request_refresh();
}

// ---------------------------------------------------------------------------
// PatchGAN

template <typename T>
PatchGAN<T>::PatchGAN(const PatchGANConfig& cfg, Rng& init_rng) : cfg_(cfg) {
    cfg_.validate();
    int in_ch = cfg_.condition_channels + cfg_.candidate_channels;
    int out_ch = cfg_.base_channels;
    net_.template emplace<nn::Conv2d<T>>("d.l0", in_ch, out_ch, 4, 2, 1, init_rng);
    net_.template emplace<nn::LeakyReLU<T>>(0.2);
    for (int i = 1; i < cfg_.stride2_layers; ++i) {
        in_ch = out_ch;
        out_ch = channel_at(cfg_.base_channels, i);
        net_.template emplace<nn::Conv2d<T>>("d.l" + std::to_string(i), in_ch, out_ch, 4, 2, 1,
                                             init_rng);
        net_.template emplace<nn::BatchNorm2d<T>>("d.l" + std::to_string(i) + ".bn", out_ch);
        net_.template emplace<nn::LeakyReLU<T>>(0.2);
    }
    in_ch = out_ch;
    out_ch = channel_at(cfg_.base_channels, cfg_.stride2_layers);
    net_.template emplace<nn::Conv2d<T>>("d.pre", in_ch, out_ch, 4, 1, 1, init_rng);
    net_.template emplace<nn::BatchNorm2d<T>>("d.pre.bn", out_ch);
    net_.template emplace<nn::LeakyReLU<T>>(0.2);
    net_.template emplace<nn::Conv2d<T>>("d.out", out_ch, 1, 4, 1, 1, init_rng);
}

template <typename T>
Tensor<T> PatchGAN<T>::forward(const Tensor<T>& condition, const Tensor<T>& candidate) {
    if (condition.c != cfg_.condition_channels || candidate.c != cfg_.candidate_channels)
        raise("ShapeMismatch", "discriminator channel mismatch");
    return net_.forward(concat_channels(condition, candidate));
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> PatchGAN<T>::backward(const Tensor<T>& dlogits) {
    const Tensor<T> djoint = net_.backward(dlogits);
    Tensor<T> dcond, dcand;
    split_channels(djoint, cfg_.condition_channels, dcond, dcand);
    return {std::move(dcond), std::move(dcand)};
}

template <typename T>
void PatchGAN<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
    net_.collect_parameters(out);
}

template <typename T>
std::vector<Parameter<T>*> PatchGAN<T>::parameters() {
    std::vector<Parameter<T>*> out;
    collect_parameters(out);
    return out;
}

template <typename T>
void PatchGAN<T>::set_training(bool training) {
    net_.set_training(training);
}

template <typename T>
void PatchGAN<T>::zero_grads() {
    for (Parameter<T>* p : parameters()) p->zero_grad();
}

// ---------------------------------------------------------------------------
// Pix2Pix

template <typename T>
Pix2Pix<T>::Pix2Pix(const UNetConfig& gcfg, const PatchGANConfig& dcfg, std::uint64_t seed)
    : gcfg_(gcfg), dcfg_(dcfg), init_rng_(seed),
      dropout_rng_(seed ^ 0x9e3779b97f4a7c15ull),
      gen_(gcfg, init_rng_, &dropout_rng_), disc_(dcfg, init_rng_) {}

template <typename T>
StepRecord Pix2Pix<T>::train_step(const Tensor<T>& input, const Tensor<T>& target,
                                  const TrainConfig& cfg, int step_index) {
    StepRecord rec;
    rec.step = step_index;

    gen_.set_training(true);
    disc_.set_training(true);
    gen_.request_dropout_refresh();
    const Tensor<T> fake = gen_.forward(input);

    // Discriminator step.
    disc_.zero_grads();
    const Tensor<T> real_logits = disc_.forward(input, target);
    const auto bce_real = bce_with_logits(real_logits, 1.0);
    disc_.backward(bce_real.grad);
    const Tensor<T> fake_logits = disc_.forward(input, fake);
    const auto bce_fake = bce_with_logits(fake_logits, 0.0);
    disc_.backward(bce_fake.grad);
    rec.d_loss = bce_real.value + bce_fake.value;
    for (Parameter<T>* p : disc_.parameters())
        nn::adam_step(*p, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_epsilon);

    // Generator step against the updated discriminator.
    for (Parameter<T>* p : gen_.parameters()) p->zero_grad();
    const Tensor<T> fake_logits2 = disc_.forward(input, fake);
    const auto adv = bce_with_logits(fake_logits2, 1.0);
    auto [dcond, dcand] = disc_.backward(adv.grad);
    const auto l1 = l1_loss(fake, target);
    Tensor<T> dfake = dcand;
    for (std::size_t i = 0; i < dfake.size(); ++i)
        dfake.v[i] += static_cast<T>(cfg.lambda * static_cast<double>(l1.grad.v[i]));
    gen_.backward(dfake);
    for (Parameter<T>* p : gen_.parameters())
        nn::adam_step(*p, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_epsilon);
    // The adversarial backward polluted the discriminator gradients.
    disc_.zero_grads();

    rec.g_adv = adv.value;
    rec.g_l1 = l1.value;
    rec.g_total = adv.value + cfg.lambda * l1.value;
    return rec;
}

template <typename T>
Tensor<T> Pix2Pix<T>::infer_tensor(const Tensor<T>& input) {
    gen_.set_training(false);
    Tensor<T> out = gen_.forward(input);
    gen_.set_training(true);
    return out;
}

template <typename T>
VisibilityMap Pix2Pix<T>::infer(const ImageF& image) {
    if (image.width != gcfg_.input_size || image.height != gcfg_.input_size)
        raise("SizeMismatch", "infer input is " + std::to_string(image.width) + "x" +
                                  std::to_string(image.height) + ", network expects " +
                                  std::to_string(gcfg_.input_size));
    if (image.channels != gcfg_.in_channels)
        raise("ShapeMismatch", "infer input channel mismatch");
    const Tensor<T> out = infer_tensor(image_to_signed_tensor<T>(image));
    return signed_tensor_to_map(out);
}

template <typename T>
std::vector<nn::NamedTensor> Pix2Pix<T>::snapshot() {
    std::vector<nn::NamedTensor> out;
    std::vector<Parameter<T>*> params = gen_.parameters();
    for (Parameter<T>* p : disc_.parameters()) params.push_back(p);
    out.reserve(params.size());
    for (const Parameter<T>* p : params) {
        nn::NamedTensor t;
        t.name = p->name;
        t.shape = p->value.shape();
        t.values.resize(p->value.size());
        for (std::size_t i = 0; i < t.values.size(); ++i)
            t.values[i] = static_cast<float>(p->value.v[i]);
        out.push_back(std::move(t));
    }
    return out;
}

template <typename T>
void Pix2Pix<T>::restore(const std::vector<nn::NamedTensor>& params) {
    std::map<std::string, const nn::NamedTensor*> by_name;
    for (const auto& t : params) by_name[t.name] = &t;
    std::vector<Parameter<T>*> own = gen_.parameters();
    for (Parameter<T>* p : disc_.parameters()) own.push_back(p);
    for (Parameter<T>* p : own) {
        const auto it = by_name.find(p->name);
        if (it == by_name.end())
            raise("MalformedCheckpoint", "checkpoint is missing parameter " + p->name);
        const nn::NamedTensor& t = *it->second;
        if (t.shape != p->value.shape())
            raise("MalformedCheckpoint", "checkpoint shape mismatch for " + p->name);
        for (std::size_t i = 0; i < t.values.size(); ++i)
            p->value.v[i] = static_cast<T>(t.values[i]);
    }
}

template <typename T>
std::vector<StepRecord> train(Pix2Pix<T>& model,
                              const std::vector<std::pair<Tensor<T>, Tensor<T>>>& pairs,
                              const TrainConfig& cfg, const TrainHooks& hooks) {
    if (pairs.empty()) raise("EmptyDataset", "training requires at least one sample pair");
    if (cfg.steps < 1) raise("InvalidConfig", "steps must be >= 1");

    std::vector<StepRecord> log;
    std::vector<nn::NamedTensor> last_good = model.snapshot();
    const int snapshot_every = cfg.checkpoint_every > 0 ? cfg.checkpoint_every : 500;

    for (int step = 1; step <= cfg.steps; ++step) {
        const auto& [input, target] = pairs[static_cast<std::size_t>(step - 1) % pairs.size()];
        const StepRecord rec = model.train_step(input, target, cfg, step);
        if (!std::isfinite(rec.d_loss) || !std::isfinite(rec.g_total)) {
            model.restore(last_good);
            if (hooks.on_checkpoint) hooks.on_checkpoint(step - 1);
            raise("NonFiniteLoss",
                  "training diverged at step " + std::to_string(step) + "; restored last state");
        }
        if (cfg.log_every > 0 && (step % cfg.log_every == 0 || step == cfg.steps)) {
            log.push_back(rec);
            if (hooks.on_record) hooks.on_record(rec);
        }
        if (step % snapshot_every == 0) last_good = model.snapshot();
        if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && hooks.on_checkpoint)
            hooks.on_checkpoint(step);
    }
    if (hooks.on_checkpoint) hooks.on_checkpoint(cfg.steps);
    return log;
}

template class UNetGenerator<float>;
template class UNetGenerator<double>;
template class PatchGAN<float>;
template class PatchGAN<double>;
template class Pix2Pix<float>;
template class Pix2Pix<double>;
template std::vector<StepRecord> train<float>(
    Pix2Pix<float>&, const std::vector<std::pair<Tensor<float>, Tensor<float>>>&,
    const TrainConfig&, const TrainHooks&);
template std::vector<StepRecord> train<double>(
    Pix2Pix<double>&, const std::vector<std::pair<Tensor<double>, Tensor<double>>>&,
    const TrainConfig&, const TrainHooks&);

}  // namespace lidarsim::pix2pix
