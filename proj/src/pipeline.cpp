#include "hifind/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "hifind/cube_io.hpp"
#include "hifind/detect.hpp"
#include "hifind/eval.hpp"
#include "hifind/nn/checkpoint.hpp"
#include "hifind/preproc.hpp"
#include "hifind/render.hpp"
#include "hifind/synth.hpp"
#include "hifind/unetlk.hpp"

namespace fs = std::filesystem;

namespace hifind::pipeline {

namespace {

int64_t effective_jobs(const Config& cfg) {
  if (cfg.get_bool("deterministic", false)) return 1;
  const int64_t jobs = cfg.get_int("jobs", 0);
  if (jobs > 0) return jobs;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int64_t(hw) : 1;
}

// Runs fn(0..n-1) on up to `jobs` threads; rethrows the first failure.
void run_parallel(int64_t n, int64_t jobs,
                  const std::function<void(int64_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex err_mutex;
  std::atomic<int64_t> next{0};
  auto worker = [&]() {
    while (true) {
      const int64_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::scoped_lock lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  const int64_t nthreads = std::min(jobs, n);
  threads.reserve(size_t(nthreads));
  for (int64_t t = 0; t < nthreads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

// ---- run metadata -------------------------------------------------------

std::vector<std::string> run_comments(const Config& cfg,
                                      const std::string& command) {
  return {"generated_by=hifind " + command, "config_hash=" + cfg.hash_hex(),
          "seed=" + std::to_string(cfg.get_int("seed", 0))};
}

// Binary containers have a pinned byte layout, so their run metadata lives
// in a small text sidecar next to the file.
void write_meta_sidecar(const std::string& path, const Config& cfg) {
  std::ofstream f(path + ".meta", std::ios::trunc);
  if (!f) fail_data("cannot write metadata sidecar for " + path);
  f << "config_hash=" << cfg.hash_hex() << "\n"
    << "seed=" << cfg.get_int("seed", 0) << "\n";
}

std::optional<std::string> read_hash_of(const std::string& path) {
  // Catalog / CSV: '# config_hash=...' comment. Binary: .meta sidecar.
  auto parse = [](std::istream& is) -> std::optional<std::string> {
    std::string line;
    while (std::getline(is, line)) {
      size_t at = line.find("config_hash=");
      if (at != std::string::npos) return line.substr(at + 12);
      if (!line.empty() && line[0] != '#') break;
    }
    return std::nullopt;
  };
  if (fs::exists(path + ".meta")) {
    std::ifstream f(path + ".meta");
    return parse(f);
  }
  std::ifstream f(path);
  if (!f) return std::nullopt;
  return parse(f);
}

// ---- file layout helpers ------------------------------------------------

bool has_suffix(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Plain cubes: *.hicube that are not derived products.
std::vector<std::string> list_cube_stems(const std::string& dir) {
  std::vector<std::string> stems;
  if (!fs::is_directory(dir)) fail_data("not a directory: " + dir);
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (!has_suffix(name, ".hicube")) continue;
    const std::string stem = name.substr(0, name.size() - 7);
    if (has_suffix(stem, ".mask") || has_suffix(stem, ".prob") ||
        has_suffix(stem, ".pred") || has_suffix(stem, ".base"))
      continue;
    stems.push_back(stem);
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// ---- synth --------------------------------------------------------------

const std::set<std::string> kSynthKeys = {
    "out_dir", "prefix", "n_cubes", "cube_shape", "n_sources", "noise_sigma",
    "extent_freq", "extent_spatial", "amplitude_snr", "ripple_amplitude",
    "rfi_narrowband", "rfi_narrowband_strength", "rfi_narrowband_channels",
    "rfi_broadband", "rfi_broadband_strength", "rfi_broadband_width",
    "seed", "jobs", "deterministic"};

synth::SynthSpec spec_from_config(const Config& cfg, uint64_t cube_seed) {
  synth::SynthSpec spec;
  spec.cube_shape = cfg.get_vox3("cube_shape", {256, 24, 32});
  spec.n_sources = cfg.get_int("n_sources", 2);
  spec.noise_sigma = cfg.get_range("noise_sigma", {2.8, 3.8});
  auto ef = cfg.get_range("extent_freq", {70, 90});
  spec.source_extent_freq = {int64_t(ef.first), int64_t(ef.second)};
  auto es = cfg.get_range("extent_spatial", {8, 12});
  spec.source_extent_spatial = {int64_t(es.first), int64_t(es.second)};
  spec.source_amplitude_snr = cfg.get_range("amplitude_snr", {6.0, 12.0});
  spec.ripple_amplitude = cfg.get_f64("ripple_amplitude", 0.0);
  spec.seed = cube_seed;

  // RFI placement comes from an independent derived stream so that
  // disabling RFI leaves the rest of the cube bit-identical.
  Rng rfi_rng(derive_seed(cube_seed, 0x52F1));
  auto nbc = cfg.get_range("rfi_narrowband_channels", {4, 8});
  auto bbw = cfg.get_range("rfi_broadband_width", {2, 4});
  spec.rfi = synth::make_random_rfi(
      spec.cube_shape, cfg.get_int("rfi_narrowband", 0),
      {int64_t(nbc.first), int64_t(nbc.second)},
      cfg.get_f64("rfi_narrowband_strength", 8.0),
      cfg.get_int("rfi_broadband", 0),
      {int64_t(bbw.first), int64_t(bbw.second)},
      cfg.get_f64("rfi_broadband_strength", 10.0), rfi_rng);
  return spec;
}

}  // namespace

void cmd_synth(const Config& cfg) {
  cfg.check_allowed(kSynthKeys);
  const std::string out_dir = cfg.get_str("out_dir");
  const std::string prefix = cfg.get_str("prefix", "cube");
  const int64_t n_cubes = cfg.get_int("n_cubes", 1);
  const uint64_t seed = uint64_t(cfg.get_int("seed", 0));
  if (n_cubes < 1) fail_usage("n_cubes must be >= 1");
  fs::create_directories(out_dir);

  std::mutex print_mutex;
  run_parallel(n_cubes, effective_jobs(cfg), [&](int64_t i) {
    auto spec = spec_from_config(cfg, derive_seed(seed, uint64_t(i)));
    auto result = synth::synth_cube(spec);

    const std::string stem = fmt("%s_%04lld", prefix.c_str(), (long long)i);
    const std::string cube_path = join(out_dir, stem + ".hicube");
    const std::string mask_path = join(out_dir, stem + ".mask.hicube");
    io::write_cube(result.cube, cube_path);
    io::write_mask(result.mask, mask_path);
    write_meta_sidecar(cube_path, cfg);
    write_meta_sidecar(mask_path, cfg);

    auto comments = run_comments(cfg, "synth");
    comments.push_back(fmt("cube_seed=%llu", (unsigned long long)spec.seed));
    comments.push_back(fmt("noise_sigma=%.6g", result.noise_sigma));
    io::write_catalog(result.catalog, join(out_dir, stem + ".catalog.csv"),
                      comments);

    std::scoped_lock lock(print_mutex);
    std::printf("synth %s: %zu sources, sigma=%.3f, shape=%s\n", stem.c_str(),
                result.catalog.size(), result.noise_sigma,
                to_string(result.cube.shape).c_str());
  });
  std::printf("synth: wrote %lld cube(s) to %s\n", (long long)n_cubes,
              out_dir.c_str());
}

// ---- train ----------------------------------------------------------------

namespace {

const std::set<std::string> kTrainKeys = {
    "data_dir", "checkpoint", "history", "rebin", "patch", "stride",
    "base_width", "epochs", "batch_size", "lr_start", "lr_end",
    "patches_per_cube", "val_fraction", "flip_prob", "noise_sigma_aug",
    "cutmix_prob", "cutmix_intensity", "resume", "seed", "jobs",
    "deterministic"};

struct LoadedCube {
  SpectralCube cube;  // rebinned when requested; raw intensities
  LabelVolume mask;
};

std::vector<LoadedCube> load_dataset(const std::string& dir, bool rebin,
                                     std::vector<std::string>* stems_out) {
  auto stems = list_cube_stems(dir);
  if (stems.empty()) fail_data("no cubes found in " + dir);
  std::vector<LoadedCube> out;
  for (const auto& stem : stems) {
    LoadedCube lc;
    lc.cube = io::read_cube(join(dir, stem + ".hicube"));
    lc.mask = io::read_mask(join(dir, stem + ".mask.hicube"));
    if (lc.cube.shape != lc.mask.shape)
      fail_data("cube/mask grid mismatch for " + stem);
    if (rebin) {
      lc.cube = preproc::rebin_freq(lc.cube);
      lc.mask = preproc::rebin_mask(lc.mask);
    }
    out.push_back(std::move(lc));
  }
  if (stems_out) *stems_out = stems;
  return out;
}

}  // namespace

void cmd_train(const Config& cfg) {
  cfg.check_allowed(kTrainKeys);
  const std::string data_dir = cfg.get_str("data_dir");
  const std::string ckpt_path = cfg.get_str("checkpoint");
  const std::string history_path =
      cfg.get_str("history", ckpt_path + ".history.csv");
  const bool rebin = cfg.get_bool("rebin", true);
  const Vox3 patch = cfg.get_vox3("patch", {128, 16, 16});
  Vox3 stride = cfg.get_vox3("stride", {patch.f / 2, patch.r / 2, patch.d / 2});
  const uint64_t seed = uint64_t(cfg.get_int("seed", 0));
  const int64_t patches_per_cube = cfg.get_int("patches_per_cube", 4);
  const double val_fraction = cfg.get_f64("val_fraction", 0.2);
  const bool resume = cfg.get_bool("resume", false);

  for (int a = 0; a < 3; ++a)
    if (patch[a] % unetlk::kDivisor != 0)
      fail_usage("patch extents must divide by 8, got " + to_string(patch));
  if (patches_per_cube < 2 || patches_per_cube % 2 != 0)
    fail_usage("patches_per_cube must be even and >= 2");

  std::vector<LoadedCube> data = load_dataset(data_dir, rebin, nullptr);
  const int64_t n_val =
      data.size() >= 2
          ? std::clamp<int64_t>(int64_t(std::lround(val_fraction *
                                                    double(data.size()))),
                                data.size() >= 5 ? 1 : 0,
                                int64_t(data.size()) - 1)
          : 0;
  const int64_t n_train = int64_t(data.size()) - n_val;

  unetlk::UnetLKConfig model_cfg;
  model_cfg.base_width = cfg.get_int("base_width", 8);
  unetlk::UnetLK model(model_cfg, derive_seed(seed, 0x1417));
  std::printf("train: %lld train + %lld val cubes, %lld parameters\n",
              (long long)n_train, (long long)n_val,
              (long long)model.param_count());

  nn::Adam adam;
  for (const auto& [name, t] : model.parameters()) adam.add_param(name, t);

  const preproc::AugmentConfig aug{
      cfg.get_f64("flip_prob", 0.5), 0.0,
      cfg.get_range("noise_sigma_aug", {2.8, 3.8}),
      cfg.get_range("cutmix_intensity", {0.30, 0.80}),
      cfg.get_f64("cutmix_prob", 0.5)};

  auto sampler = [&](int64_t epoch) {
    std::vector<preproc::Patch> patches;
    for (int64_t j = 0; j < n_train; ++j) {
      Rng rng(derive_seed(seed, 0x100000 + uint64_t(epoch) * 4096 +
                                    uint64_t(j)));
      auto set = preproc::sample_training_patches(data[size_t(j)].cube,
                                                  data[size_t(j)].mask, rng,
                                                  patches_per_cube, patch);
      for (auto& p : set.patches) {
        preproc::random_flip(p, rng, aug.flip_prob);
        if (rng.bernoulli(aug.cutmix_prob))
          preproc::cutmix_degrade(p, rng, aug.cutmix_intensity);
        preproc::add_gaussian_noise(p, rng, aug.noise_sigma, aug.noise_mu);
        preproc::clip_normalize(p.data);
        patches.push_back(std::move(p));
      }
    }
    return patches;
  };

  std::vector<preproc::Patch> val_patches;
  for (int64_t j = n_train; j < int64_t(data.size()); ++j) {
    Rng rng(derive_seed(seed, 0x7A11 + uint64_t(j)));
    auto set = preproc::sample_training_patches(
        data[size_t(j)].cube, data[size_t(j)].mask, rng, patches_per_cube,
        patch);
    for (auto& p : set.patches) {
      preproc::clip_normalize(p.data);
      val_patches.push_back(std::move(p));
    }
  }

  unetlk::TrainOptions opts;
  opts.epochs = cfg.get_int("epochs", 60);
  opts.batch_size = cfg.get_int("batch_size", 2);
  opts.lr_start = cfg.get_f64("lr_start", 0.01);
  opts.lr_end = cfg.get_f64("lr_end", 0.0005);
  opts.seed = seed;

  const std::string last_path = ckpt_path + ".last";
  const std::string state_path = ckpt_path + ".trainstate";
  if (resume) {
    auto ckpt = nn::load_checkpoint(last_path);
    model.load_tensors(ckpt.tensors);
    std::ifstream sf(state_path);
    if (!sf) fail_data("missing training state for resume: " + state_path);
    std::string tag;
    int64_t last_epoch = -1;
    sf >> tag >> last_epoch;
    if (tag != "epoch") fail_data("corrupt training state: " + state_path);
    adam.load_state(sf);
    opts.start_epoch = last_epoch + 1;
    std::printf("train: resuming at epoch %lld\n",
                (long long)opts.start_epoch);
  }

  std::map<std::string, double> meta{
      {"base_width", double(model_cfg.base_width)},
      {"kernel_f", double(model_cfg.kernel.f)},
      {"kernel_r", double(model_cfg.kernel.r)},
      {"kernel_d", double(model_cfg.kernel.d)},
      {"rebin", rebin ? 1.0 : 0.0},
      {"patch_f", double(patch.f)},
      {"patch_r", double(patch.r)},
      {"patch_d", double(patch.d)},
      {"stride_f", double(stride.f)},
      {"stride_r", double(stride.r)},
      {"stride_d", double(stride.d)}};

  std::ofstream hist(history_path,
                     resume ? std::ios::app : std::ios::trunc);
  if (!hist) fail_data("cannot write history: " + history_path);
  if (!resume) {
    for (const auto& c : run_comments(cfg, "train")) hist << "# " << c << "\n";
    hist << "epoch,lr,train_loss,val_dice\n";
  }

  auto on_epoch = [&](const unetlk::EpochStats& stats, bool is_best) {
    hist << fmt("%lld,%.17g,%.17g,%.17g\n", (long long)stats.epoch, stats.lr,
                stats.train_loss, stats.val_dice);
    hist.flush();
    std::printf("epoch %lld: lr=%.5f loss=%.4f val_dice=%.4f%s\n",
                (long long)stats.epoch, stats.lr, stats.train_loss,
                stats.val_dice, is_best ? " *" : "");
    if (is_best) nn::save_checkpoint(ckpt_path, model.parameters(), meta);
    nn::save_checkpoint(last_path, model.parameters(), meta);
    std::ofstream sf(state_path, std::ios::trunc);
    sf << "epoch " << stats.epoch << "\n";
    adam.save_state(sf);
  };

  auto result = unetlk::train_model(model, adam, sampler, val_patches, opts,
                                    on_epoch);
  std::printf("train: best val_dice=%.4f at epoch %lld, checkpoint=%s\n",
              result.best_val_dice, (long long)result.best_epoch,
              ckpt_path.c_str());
}

// ---- infer ----------------------------------------------------------------

namespace {

const std::set<std::string> kInferKeys = {
    "checkpoint", "in", "out_dir", "min_voxels", "threshold", "patch",
    "stride", "seed", "jobs", "deterministic"};

std::vector<std::string> input_stems(const std::string& in,
                                     std::string* dir_out) {
  if (fs::is_directory(in)) {
    *dir_out = in;
    return list_cube_stems(in);
  }
  if (!fs::exists(in)) fail_data("input not found: " + in);
  fs::path p(in);
  *dir_out = p.parent_path().string();
  std::string name = p.filename().string();
  if (!has_suffix(name, ".hicube")) fail_usage("input must be a .hicube file");
  return {name.substr(0, name.size() - 7)};
}

}  // namespace

void cmd_infer(const Config& cfg) {
  cfg.check_allowed(kInferKeys);
  const std::string ckpt_path = cfg.get_str("checkpoint");
  const std::string out_dir = cfg.get_str("out_dir");
  const int64_t min_voxels = cfg.get_int("min_voxels", 300);
  const double threshold = cfg.get_f64("threshold", 0.5);
  fs::create_directories(out_dir);

  auto ckpt = nn::load_checkpoint(ckpt_path);
  auto meta_int = [&](const std::string& key, int64_t def) {
    auto it = ckpt.meta.find(key);
    return it == ckpt.meta.end() ? def : int64_t(std::lround(it->second));
  };
  unetlk::UnetLKConfig model_cfg;
  model_cfg.base_width = meta_int("base_width", 8);
  unetlk::UnetLK model(model_cfg, 0);
  model.load_tensors(ckpt.tensors);
  const bool rebin = meta_int("rebin", 1) != 0;
  const Vox3 patch = cfg.get_vox3(
      "patch", {meta_int("patch_f", 128), meta_int("patch_r", 16),
                meta_int("patch_d", 16)});
  const Vox3 stride = cfg.get_vox3(
      "stride", {meta_int("stride_f", patch.f / 2),
                 meta_int("stride_r", patch.r / 2),
                 meta_int("stride_d", patch.d / 2)});

  std::string in_dir;
  const auto stems = input_stems(cfg.get_str("in"), &in_dir);
  auto model_fn = unetlk::make_patch_model(model);

  for (const auto& stem : stems) {
    SpectralCube raw = io::read_cube(join(in_dir, stem + ".hicube"));
    SpectralCube grid = rebin ? preproc::rebin_freq(raw) : raw;
    SpectralCube normalized = preproc::clip_normalize(grid);

    auto prob = detect::sliding_window_infer(normalized, patch, stride,
                                             model_fn);
    SpectralCube prob_cube(prob.shape);
    prob_cube.data = prob.values;
    prob_cube.freq_res = grid.freq_res;
    prob_cube.spatial_res = grid.spatial_res;
    prob_cube.origin = grid.origin;

    LabelVolume binary = detect::binarize(prob, threshold);
    auto comps = detect::connected_components(binary, 26, &grid);
    const size_t before = comps.records.size();
    detect::size_filter(comps, min_voxels);

    LabelVolume pred_mask(comps.labels.shape);
    for (size_t i = 0; i < comps.labels.data.size(); ++i)
      pred_mask.data[i] = comps.labels.data[i] > 0 ? 1 : 0;

    const std::string prob_path = join(out_dir, stem + ".prob.hicube");
    const std::string mask_path = join(out_dir, stem + ".pred.hicube");
    io::write_cube(prob_cube, prob_path);
    io::write_mask(pred_mask, mask_path);
    write_meta_sidecar(prob_path, cfg);
    write_meta_sidecar(mask_path, cfg);
    auto comments = run_comments(cfg, "infer");
    comments.push_back(fmt("checkpoint=%s", ckpt_path.c_str()));
    comments.push_back(fmt("rebin=%d threshold=%.3g min_voxels=%lld",
                           rebin ? 1 : 0, threshold, (long long)min_voxels));
    io::write_catalog(comps.records, join(out_dir, stem + ".pred.csv"),
                      comments);
    std::printf("infer %s: %zu -> %zu components after %lld-voxel filter\n",
                stem.c_str(), before, comps.records.size(),
                (long long)min_voxels);
  }
}

// ---- baseline ---------------------------------------------------------

namespace {

const std::set<std::string> kBaselineKeys = {
    "in", "out_dir", "threshold_sigma", "kernels_xy", "kernels_z",
    "min_pixels", "max_xy_extent", "union_before_linking", "seed", "jobs",
    "deterministic"};

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::istringstream is(text);
  std::string item;
  while (std::getline(is, item, ','))
    out.push_back(int(std::stol(item)));
  return out;
}

std::string int_list_to_string(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

void cmd_baseline(const Config& cfg) {
  cfg.check_allowed(kBaselineKeys);
  const std::string out_dir = cfg.get_str("out_dir");
  fs::create_directories(out_dir);

  detect::BaselineConfig bl;
  bl.threshold_sigma = cfg.get_f64("threshold_sigma", 5.0);
  bl.kernels_xy = parse_int_list(cfg.get_str("kernels_xy", "0,3,6"));
  bl.kernels_z = parse_int_list(cfg.get_str("kernels_z", "0,3,7,15"));
  bl.min_pixels = cfg.get_int("min_pixels", 5);
  bl.max_xy_extent = cfg.get_int("max_xy_extent", 50);
  bl.union_before_linking = cfg.get_bool("union_before_linking", true);

  std::string in_dir;
  const auto stems = input_stems(cfg.get_str("in"), &in_dir);
  std::mutex print_mutex;
  run_parallel(int64_t(stems.size()), effective_jobs(cfg), [&](int64_t i) {
    const std::string& stem = stems[size_t(i)];
    SpectralCube cube = io::read_cube(join(in_dir, stem + ".hicube"));
    auto comps = detect::baseline_smooth_clip(cube, bl);

    LabelVolume mask(comps.labels.shape);
    for (size_t k = 0; k < comps.labels.data.size(); ++k)
      mask.data[k] = comps.labels.data[k] > 0 ? 1 : 0;
    const std::string mask_path = join(out_dir, stem + ".base.hicube");
    io::write_mask(mask, mask_path);
    write_meta_sidecar(mask_path, cfg);

    auto comments = run_comments(cfg, "baseline");
    comments.push_back(
        fmt("threshold_sigma=%.3g", bl.threshold_sigma));
    comments.push_back("kernels_xy=" + int_list_to_string(bl.kernels_xy));
    comments.push_back("kernels_z=" + int_list_to_string(bl.kernels_z));
    comments.push_back(fmt("min_pixels=%lld max_xy_extent=%lld",
                           (long long)bl.min_pixels,
                           (long long)bl.max_xy_extent));
    io::write_catalog(comps.records, join(out_dir, stem + ".base.csv"),
                      comments);
    std::scoped_lock lock(print_mutex);
    std::printf("baseline %s: %zu detections\n", stem.c_str(),
                comps.records.size());
  });
}

// ---- eval -----------------------------------------------------------------

namespace {

const std::set<std::string> kEvalKeys = {
    "pred_dir", "gt_dir", "pred_mask", "pred_catalog", "gt_mask",
    "gt_catalog", "out", "pred_suffix", "rebin_gt", "iou_threshold", "force",
    "method", "seed", "jobs", "deterministic"};

struct EvalPair {
  std::string stem;
  std::string pred_mask, pred_catalog, gt_mask, gt_catalog;
};

LabelVolume align_gt(const LabelVolume& gt, const Vox3 pred_shape,
                     const std::string& mode) {
  if (gt.shape == pred_shape && mode != "1") return gt;
  const bool rebin_would_match =
      gt.shape.f >= preproc::kRebinKernel &&
      Vox3{preproc::rebin_length(gt.shape.f), gt.shape.r, gt.shape.d} ==
          pred_shape;
  if (mode == "0" && gt.shape != pred_shape)
    fail_data("grid mismatch and rebin_gt=0");
  if ((mode == "auto" && rebin_would_match) || mode == "1") {
    LabelVolume out = preproc::rebin_mask(gt);
    if (out.shape != pred_shape)
      fail_data("ground truth does not match prediction grid after rebin");
    return out;
  }
  fail_data("prediction/ground-truth grid mismatch: " + to_string(pred_shape) +
            " vs " + to_string(gt.shape));
}

void check_hashes(const EvalPair& pair, bool force) {
  if (force) return;
  auto check_side = [](const std::string& catalog, const std::string& mask,
                       const char* side) {
    auto h1 = read_hash_of(catalog);
    auto h2 = read_hash_of(mask);
    if (h1 && h2 && *h1 != *h2)
      fail_data(std::string(side) +
                " catalog and mask come from different runs (config hash "
                "mismatch); pass force=1 to evaluate anyway");
  };
  check_side(pair.pred_catalog, pair.pred_mask, "prediction");
  check_side(pair.gt_catalog, pair.gt_mask, "ground-truth");
}

}  // namespace

void cmd_eval(const Config& cfg) {
  cfg.check_allowed(kEvalKeys);
  const double iou_threshold = cfg.get_f64("iou_threshold", 0.2);
  const std::string rebin_gt = cfg.get_str("rebin_gt", "auto");
  const bool force = cfg.get_bool("force", false);
  const std::string method = cfg.get_str("method", "unetlk");

  std::vector<EvalPair> pairs;
  std::string out_prefix;
  if (cfg.has("pred_dir")) {
    const std::string pred_dir = cfg.get_str("pred_dir");
    const std::string gt_dir = cfg.get_str("gt_dir");
    std::string suffix = cfg.get_str("pred_suffix", "auto");
    for (const auto& stem : list_cube_stems(gt_dir)) {
      EvalPair p;
      p.stem = stem;
      p.gt_mask = join(gt_dir, stem + ".mask.hicube");
      p.gt_catalog = join(gt_dir, stem + ".catalog.csv");
      std::string sfx = suffix;
      if (sfx == "auto")
        sfx = fs::exists(join(pred_dir, stem + ".pred.hicube")) ? "pred"
                                                               : "base";
      p.pred_mask = join(pred_dir, stem + "." + sfx + ".hicube");
      p.pred_catalog = join(pred_dir, stem + "." + sfx + ".csv");
      if (!fs::exists(p.pred_mask))
        fail_data("missing prediction mask: " + p.pred_mask);
      pairs.push_back(p);
    }
    if (pairs.empty()) fail_data("no ground-truth cubes in " + gt_dir);
    out_prefix = cfg.get_str("out", join(pred_dir, "eval"));
  } else {
    EvalPair p;
    p.stem = "cube";
    p.pred_mask = cfg.get_str("pred_mask");
    p.pred_catalog = cfg.get_str("pred_catalog", "");
    p.gt_mask = cfg.get_str("gt_mask");
    p.gt_catalog = cfg.get_str("gt_catalog", "");
    pairs.push_back(p);
    out_prefix = cfg.get_str("out", p.pred_mask + ".eval");
  }

  int64_t tp = 0, fp = 0, fn = 0;
  double iou_sum = 0.0, dice_sum = 0.0;
  std::vector<std::pair<std::string, eval::PerSourceRow>> rows;
  for (const auto& pair : pairs) {
    if (!pair.pred_catalog.empty() && !pair.gt_catalog.empty() &&
        fs::exists(pair.pred_catalog) && fs::exists(pair.gt_catalog))
      check_hashes(pair, force);
    LabelVolume pred = io::read_mask(pair.pred_mask);
    LabelVolume gt =
        align_gt(io::read_mask(pair.gt_mask), pred.shape, rebin_gt);

    iou_sum += eval::voxel_iou(pred, gt);
    dice_sum += eval::voxel_dice(pred, gt);
    auto pred_comps = detect::connected_components(pred, 26);
    auto gt_comps = detect::connected_components(gt, 26);
    auto match = eval::match_detections(pred_comps, gt_comps, iou_threshold);
    tp += match.tp;
    fp += match.fp;
    fn += match.fn;
    auto rep = eval::compute_report(match, 0.0, 0.0);
    for (const auto& row : rep.per_source) rows.emplace_back(pair.stem, row);
  }

  const double n = double(pairs.size());
  auto report = eval::report_from_counts(tp, fp, fn, iou_sum / n,
                                         dice_sum / n);

  // summary CSV + per-source CSV + text table
  const auto comments = run_comments(cfg, "eval");
  {
    std::ofstream f(out_prefix + ".summary.csv", std::ios::trunc);
    if (!f) fail_data("cannot write " + out_prefix + ".summary.csv");
    for (const auto& c : comments) f << "# " << c << "\n";
    f << "method,iou,dice,recall,precision,tp,fp,fn\n";
    f << fmt("%s,%.6f,%.6f,%.6f,%.6f,%lld,%lld,%lld\n", method.c_str(),
             report.iou_mean, report.dice_mean, report.recall,
             report.precision, (long long)report.tp, (long long)report.fp,
             (long long)report.fn);
  }
  {
    std::ofstream f(out_prefix + ".per_source.csv", std::ios::trunc);
    if (!f) fail_data("cannot write " + out_prefix + ".per_source.csv");
    for (const auto& c : comments) f << "# " << c << "\n";
    f << "cube,kind,gt_id,pred_id,iou\n";
    for (const auto& [stem, row] : rows)
      f << fmt("%s,%s,%lld,%lld,%.6f\n", stem.c_str(), row.kind.c_str(),
               (long long)row.gt_id, (long long)row.pred_id, row.iou);
  }
  const std::string table = eval::format_table({{method, report}});
  {
    std::ofstream f(out_prefix + ".table.txt", std::ios::trunc);
    if (!f) fail_data("cannot write " + out_prefix + ".table.txt");
    for (const auto& c : comments) f << "# " << c << "\n";
    f << table;
  }
  std::fputs(table.c_str(), stdout);
}

// ---- render -----------------------------------------------------------

namespace {

const std::set<std::string> kRenderKeys = {
    "cube", "gt_mask", "pred_mask", "axis", "slices", "out_dir", "prefix",
    "seed", "jobs", "deterministic"};

}  // namespace

void cmd_render(const Config& cfg) {
  cfg.check_allowed(kRenderKeys);
  const std::string cube_path = cfg.get_str("cube");
  const std::string out_dir = cfg.get_str("out_dir");
  fs::create_directories(out_dir);

  SpectralCube cube = io::read_cube(cube_path);
  std::optional<LabelVolume> gt, pred;
  if (cfg.has("gt_mask")) gt = io::read_mask(cfg.get_str("gt_mask"));
  if (cfg.has("pred_mask")) pred = io::read_mask(cfg.get_str("pred_mask"));

  const auto axis = render::parse_axis(cfg.get_str("axis", "dec"));
  std::string prefix = cfg.get_str("prefix", "");
  if (prefix.empty()) {
    prefix = fs::path(cube_path).filename().string();
    if (has_suffix(prefix, ".hicube"))
      prefix = prefix.substr(0, prefix.size() - 7);
  }

  std::vector<int64_t> indices;
  const std::string slices = cfg.get_str("slices", "auto");
  if (slices == "auto") {
    // Slice through the largest ground-truth component, else mid-axis.
    int64_t at = cube.shape[int(axis)] / 2;
    if (gt) {
      auto comps = detect::connected_components(*gt, 26);
      const SourceRecord* largest = nullptr;
      for (const auto& rec : comps.records)
        if (!largest || rec.n_voxels > largest->n_voxels) largest = &rec;
      if (largest)
        at = (largest->bbox_min[int(axis)] + largest->bbox_max[int(axis)]) / 2;
    }
    indices.push_back(at);
  } else {
    std::istringstream is(slices);
    std::string item;
    while (std::getline(is, item, ','))
      indices.push_back(std::stoll(item));
  }

  const std::vector<render::PngText> texts{
      {"config_hash", cfg.hash_hex()},
      {"seed", std::to_string(cfg.get_int("seed", 0))}};
  const char axis_letter[] = {'f', 'r', 'd'};
  for (int64_t index : indices) {
    auto img = render::render_slice(cube, gt ? &*gt : nullptr,
                                    pred ? &*pred : nullptr, axis, index);
    const std::string path =
        join(out_dir, fmt("%s.%c%04lld.png", prefix.c_str(),
                          axis_letter[int(axis)], (long long)index));
    render::write_slice_png(img, path, texts);
    std::printf("render: %s (%lldx%lld, gt contour px %lld, pred contour px "
                "%lld)\n",
                path.c_str(), (long long)img.width, (long long)img.height,
                (long long)img.gt_contour_pixels,
                (long long)img.pred_contour_pixels);
  }
}

void run_command(const std::string& command, const Config& config) {
  if (command == "synth") return cmd_synth(config);
  if (command == "train") return cmd_train(config);
  if (command == "infer") return cmd_infer(config);
  if (command == "baseline") return cmd_baseline(config);
  if (command == "eval") return cmd_eval(config);
  if (command == "render") return cmd_render(config);
  fail_usage("unknown command: " + command);
}

}  // namespace hifind::pipeline
