#include "hifind/unetlk.hpp"

#include <algorithm>
#include <cmath>

#include "hifind/nn/loss.hpp"
#include "hifind/nn/ops.hpp"

namespace hifind::unetlk {

void UnetLKConfig::validate() const {
  if (levels != 4) fail_usage("Unet-LK is a four-level architecture");
  if (base_width < 1) fail_usage("base_width must be >= 1");
  if (kernel.f % 2 == 0 || kernel.r % 2 == 0 || kernel.d % 2 == 0)
    fail_usage("kernel dims must be odd for same padding");
  if (in_channels != 1 || out_channels != 1)
    fail_usage("single-channel input/output only");
}

UnetLK::Conv UnetLK::make_conv(const std::string& name, int64_t c_in,
                               int64_t c_out, Vox3 kernel, Rng& rng) {
  Conv c;
  c.w = nn::Tensor::make({c_out, c_in, kernel.f, kernel.r, kernel.d}, true);
  c.b = nn::Tensor::make({c_out}, true);
  // He fan-in initialization.
  const double std =
      std::sqrt(2.0 / double(c_in * kernel.f * kernel.r * kernel.d));
  for (auto& v : c.w->v) v = float(rng.normal(0.0, std));
  params_.emplace_back(name + ".w", c.w);
  params_.emplace_back(name + ".b", c.b);
  return c;
}

UnetLK::Conv UnetLK::make_transpose(const std::string& name, int64_t c_in,
                                    int64_t c_out, int64_t factor, Rng& rng) {
  Conv c;
  c.w = nn::Tensor::make({c_in, c_out, factor, factor, factor}, true);
  c.b = nn::Tensor::make({c_out}, true);
  const double std = std::sqrt(2.0 / double(c_in * factor * factor * factor));
  for (auto& v : c.w->v) v = float(rng.normal(0.0, std));
  params_.emplace_back(name + ".w", c.w);
  params_.emplace_back(name + ".b", c.b);
  return c;
}

UnetLK::Norm UnetLK::make_norm(const std::string& name, int64_t channels) {
  Norm n;
  n.gamma = nn::Tensor::make({channels}, true);
  n.beta = nn::Tensor::make({channels}, true);
  for (auto& v : n.gamma->v) v = 1.0f;
  params_.emplace_back(name + ".gamma", n.gamma);
  params_.emplace_back(name + ".beta", n.beta);
  return n;
}

UnetLK::Block UnetLK::make_block(const std::string& name, int64_t c_in,
                                 int64_t c_out, Rng& rng) {
  Block b;
  b.c1 = make_conv(name + ".conv1", c_in, c_out, config_.kernel, rng);
  b.n1 = make_norm(name + ".norm1", c_out);
  b.c2 = make_conv(name + ".conv2", c_out, c_out, config_.kernel, rng);
  b.n2 = make_norm(name + ".norm2", c_out);
  return b;
}

UnetLK::UnetLK(const UnetLKConfig& config, uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int64_t w = config_.base_width;
  enc_[0] = make_block("enc1", config_.in_channels, w, rng);
  enc_[1] = make_block("enc2", w, 2 * w, rng);
  enc_[2] = make_block("enc3", 2 * w, 4 * w, rng);
  enc_[3] = make_block("enc4", 4 * w, 8 * w, rng);
  up_[0] = make_transpose("up3", 8 * w, 4 * w, 2, rng);
  dec_[0] = make_block("dec3", 8 * w, 4 * w, rng);
  up_[1] = make_transpose("up2", 4 * w, 2 * w, 2, rng);
  dec_[1] = make_block("dec2", 4 * w, 2 * w, rng);
  up_[2] = make_transpose("up1", 2 * w, w, 2, rng);
  dec_[2] = make_block("dec1", 2 * w, w, rng);
  final_ = make_conv("final", w, config_.out_channels, {1, 1, 1}, rng);
}

nn::Tensor::Ptr UnetLK::run_block(nn::Tape& tape, const Block& blk,
                                  const nn::Tensor::Ptr& x) const {
  const Vox3 pad{(config_.kernel.f - 1) / 2, (config_.kernel.r - 1) / 2,
                 (config_.kernel.d - 1) / 2};
  auto h = nn::conv3d(tape, x, blk.c1.w, blk.c1.b, pad);
  h = nn::instance_norm(tape, h, blk.n1.gamma, blk.n1.beta);
  h = nn::relu(tape, h);
  h = nn::conv3d(tape, h, blk.c2.w, blk.c2.b, pad);
  h = nn::instance_norm(tape, h, blk.n2.gamma, blk.n2.beta);
  return nn::relu(tape, h);
}

nn::Tensor::Ptr UnetLK::forward(nn::Tape& tape,
                                const nn::Tensor::Ptr& input) const {
  if (input->shape.size() != 4 || input->shape[0] != config_.in_channels)
    fail_data("forward expects a (1,F,R,D) tensor");
  for (int a = 1; a < 4; ++a)
    if (input->shape[a] % kDivisor != 0)
      fail_data("input extents must divide by " + std::to_string(kDivisor) +
                ", got " + std::to_string(input->shape[a]));

  auto e1 = run_block(tape, enc_[0], input);
  auto p1 = nn::maxpool3d(tape, e1);
  auto e2 = run_block(tape, enc_[1], p1);
  auto p2 = nn::maxpool3d(tape, e2);
  auto e3 = run_block(tape, enc_[2], p2);
  auto p3 = nn::maxpool3d(tape, e3);
  auto bottom = run_block(tape, enc_[3], p3);

  auto u3 = nn::conv_transpose3d(tape, bottom, up_[0].w, up_[0].b);
  auto d3 = run_block(tape, dec_[0], nn::concat_channels(tape, u3, e3));
  auto u2 = nn::conv_transpose3d(tape, d3, up_[1].w, up_[1].b);
  auto d2 = run_block(tape, dec_[1], nn::concat_channels(tape, u2, e2));
  auto u1 = nn::conv_transpose3d(tape, d2, up_[2].w, up_[2].b);
  auto d1 = run_block(tape, dec_[2], nn::concat_channels(tape, u1, e1));

  auto logits = nn::conv3d(tape, d1, final_.w, final_.b);
  return nn::sigmoid(tape, logits);
}

int64_t UnetLK::param_count() const {
  int64_t n = 0;
  for (const auto& [name, t] : params_) n += t->numel();
  return n;
}

void UnetLK::load_tensors(
    const std::map<std::string, nn::Tensor::Ptr>& tensors) {
  if (tensors.size() != params_.size())
    fail_data("checkpoint has " + std::to_string(tensors.size()) +
              " tensors, model expects " + std::to_string(params_.size()));
  for (auto& [name, t] : params_) {
    auto it = tensors.find(name);
    if (it == tensors.end()) fail_data("checkpoint missing tensor: " + name);
    if (it->second->shape != t->shape)
      fail_data("checkpoint tensor shape mismatch: " + name);
    t->v = it->second->v;
  }
}

nn::Tensor::Ptr patch_to_tensor(const preproc::Patch& patch) {
  auto t = nn::Tensor::make(
      {1, patch.shape.f, patch.shape.r, patch.shape.d});
  std::copy(patch.data.begin(), patch.data.end(), t->v.begin());
  return t;
}

nn::Tensor::Ptr label_to_tensor(const preproc::Patch& patch) {
  auto t = nn::Tensor::make(
      {1, patch.shape.f, patch.shape.r, patch.shape.d});
  for (size_t i = 0; i < patch.label.size(); ++i)
    t->v[i] = float(patch.label[i]);
  return t;
}

detect::PatchModel make_patch_model(const UnetLK& model) {
  return [&model](const preproc::Patch& patch, std::span<float> prob_out) {
    nn::Tape tape;
    auto pred = model.forward(tape, patch_to_tensor(patch));
    std::copy(pred->v.begin(), pred->v.end(), prob_out.begin());
  };
}

double evaluate_patch_dice(const UnetLK& model,
                           const std::vector<preproc::Patch>& patches) {
  int64_t inter = 0, np = 0, ny = 0;
  for (const auto& patch : patches) {
    nn::Tape tape;
    auto pred = model.forward(tape, patch_to_tensor(patch));
    for (size_t i = 0; i < pred->v.size(); ++i) {
      const bool p = pred->v[i] > 0.5f;
      const bool y = patch.label[i] != 0;
      inter += p && y;
      np += p;
      ny += y;
    }
  }
  if (np + ny == 0) return 1.0;
  return 2.0 * double(inter) / double(np + ny);
}

TrainResult train_model(UnetLK& model, nn::Adam& optimizer,
                        const EpochSampler& sampler,
                        const std::vector<preproc::Patch>& val_patches,
                        const TrainOptions& options,
                        const EpochCallback& on_epoch) {
  if (options.epochs < 1) fail_usage("epochs must be >= 1");
  if (options.batch_size < 1) fail_usage("batch_size must be >= 1");

  TrainResult result;
  const int64_t stop = options.end_epoch < 0
                           ? options.epochs
                           : std::min(options.end_epoch, options.epochs);
  for (int64_t epoch = options.start_epoch; epoch < stop; ++epoch) {
    const double lr = nn::lr_schedule(epoch, options.epochs, options.lr_start,
                                      options.lr_end);
    std::vector<preproc::Patch> patches = sampler(epoch);
    if (patches.empty()) fail_data("empty training dataset");

    // Deterministic per-epoch shuffle, independent of resume history.
    Rng shuffle_rng(derive_seed(options.seed, 0x5u + uint64_t(epoch)));
    for (size_t i = patches.size(); i > 1; --i)
      std::swap(patches[i - 1],
                patches[size_t(shuffle_rng.uniform_int(0, int64_t(i) - 1))]);

    double loss_sum = 0.0;
    size_t cursor = 0;
    while (cursor < patches.size()) {
      const size_t batch =
          std::min(size_t(options.batch_size), patches.size() - cursor);
      optimizer.zero_grad();
      for (size_t i = 0; i < batch; ++i) {
        const auto& patch = patches[cursor + i];
        nn::Tape tape;
        auto pred = model.forward(tape, patch_to_tensor(patch));
        auto loss = nn::combined_loss(tape, pred, label_to_tensor(patch));
        loss_sum += double(loss->v[0]);
        tape.backward(loss, 1.0 / double(batch));
      }
      optimizer.step(lr);
      cursor += batch;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.train_loss = loss_sum / double(patches.size());
    stats.val_dice =
        val_patches.empty() ? 0.0 : evaluate_patch_dice(model, val_patches);
    const bool is_best = val_patches.empty()
                             ? true  // no validation split: keep the latest
                             : result.best_epoch < 0 ||
                                   stats.val_dice > result.best_val_dice;
    if (is_best) {
      result.best_val_dice = stats.val_dice;
      result.best_epoch = epoch;
    }
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats, is_best);
  }
  return result;
}

}  // namespace hifind::unetlk
