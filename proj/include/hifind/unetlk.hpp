#pragma once

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hifind/detect.hpp"
#include "hifind/nn/optim.hpp"
#include "hifind/nn/tensor.hpp"
#include "hifind/preproc.hpp"

namespace hifind::unetlk {

// Four-level 3D U-Net with the elongated (7,3,3) kernel. Channel widths
// double per level starting at base_width; the paper-scale network is
// reached around base_width 24 (~7M parameters), the desk-scale default is
// 8.
struct UnetLKConfig {
  int64_t base_width = 8;
  int levels = 4;  // architecture is fixed at 4 resolution levels
  Vox3 kernel{7, 3, 3};
  int64_t in_channels = 1;
  int64_t out_channels = 1;

  void validate() const;
};

// Input extents must divide by 2^(levels-1).
inline constexpr int64_t kDivisor = 8;

class UnetLK {
 public:
  UnetLK(const UnetLKConfig& config, uint64_t seed);

  // input (1,F,R,D) with F,R,D divisible by 8 -> probabilities (1,F,R,D),
  // all strictly inside (0,1).
  nn::Tensor::Ptr forward(nn::Tape& tape, const nn::Tensor::Ptr& input) const;

  // Named parameters in deterministic (registration) order.
  const std::vector<std::pair<std::string, nn::Tensor::Ptr>>& parameters()
      const {
    return params_;
  }
  int64_t param_count() const;
  const UnetLKConfig& config() const { return config_; }

  void load_tensors(const std::map<std::string, nn::Tensor::Ptr>& tensors);

 private:
  struct Conv {
    nn::Tensor::Ptr w, b;
  };
  struct Norm {
    nn::Tensor::Ptr gamma, beta;
  };
  struct Block {
    Conv c1, c2;
    Norm n1, n2;
  };

  Conv make_conv(const std::string& name, int64_t c_in, int64_t c_out,
                 Vox3 kernel, Rng& rng);
  Conv make_transpose(const std::string& name, int64_t c_in, int64_t c_out,
                      int64_t factor, Rng& rng);
  Norm make_norm(const std::string& name, int64_t channels);
  Block make_block(const std::string& name, int64_t c_in, int64_t c_out,
                   Rng& rng);
  nn::Tensor::Ptr run_block(nn::Tape& tape, const Block& blk,
                            const nn::Tensor::Ptr& x) const;

  UnetLKConfig config_;
  Block enc_[4];  // enc_[3] is the bottleneck
  Conv up_[3];
  Block dec_[3];
  Conv final_;
  std::vector<std::pair<std::string, nn::Tensor::Ptr>> params_;
};

// Turns a (normalized) patch into model input / target tensors.
nn::Tensor::Ptr patch_to_tensor(const preproc::Patch& patch);
nn::Tensor::Ptr label_to_tensor(const preproc::Patch& patch);

// Adapter for detect::sliding_window_infer.
detect::PatchModel make_patch_model(const UnetLK& model);

struct TrainOptions {
  int64_t epochs = 60;  // also the span of the LR schedule
  int64_t batch_size = 2;
  double lr_start = 0.01;
  double lr_end = 0.0005;
  uint64_t seed = 0;
  int64_t start_epoch = 0;  // > 0 when resuming
  int64_t end_epoch = -1;   // stop before this epoch (-1: run to `epochs`)
};

struct EpochStats {
  int64_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_dice = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
  double best_val_dice = 0.0;
  int64_t best_epoch = -1;
};

// Provides the (already augmented, clip-normalized) patches for one epoch.
using EpochSampler = std::function<std::vector<preproc::Patch>(int64_t epoch)>;
// Called after every epoch; is_best marks a new best validation dice.
using EpochCallback = std::function<void(const EpochStats&, bool is_best)>;

// Single-worker deterministic training loop: shuffles each epoch's patches
// with a seed derived from (seed, epoch), accumulates per-sample gradients
// with weight 1/batch, and steps Adam once per batch.
TrainResult train_model(UnetLK& model, nn::Adam& optimizer,
                        const EpochSampler& sampler,
                        const std::vector<preproc::Patch>& val_patches,
                        const TrainOptions& options,
                        const EpochCallback& on_epoch = nullptr);

// Aggregate hard Dice (threshold 0.5) of the model over a patch set; 1.0
// when both prediction and labels are empty.
double evaluate_patch_dice(const UnetLK& model,
                           const std::vector<preproc::Patch>& patches);

}  // namespace hifind::unetlk
