#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hifind/cube.hpp"
#include "hifind/rng.hpp"

namespace hifind::synth {

enum class RfiKind { narrowband_persistent, broadband_burst };

// One concrete interference event. Narrowband stripes cover the frequency
// channels [lo.f, hi.f] across all spatial rows; broadband bursts cover the
// spatial block [lo.r, hi.r] x [lo.d, hi.d] across the full band. RFI is
// never added to the ground-truth mask.
struct RfiSpec {
  RfiKind kind = RfiKind::narrowband_persistent;
  double strength = 8.0;  // multiple of the cube noise sigma
  Vox3 lo, hi;            // inclusive voxel ranges per axis
};

enum class FreqProfile { gaussian, double_horn };

// Parameters of one injected source: a Gaussian envelope in R.A./Dec.
// multiplied by a frequency profile (single Gaussian or double horn),
// scaled so the peak contribution equals `amplitude`.
struct SourceParams {
  Vox3 center;
  double extent_freq = 100.0;  // nominal mask span in voxels
  double extent_ra = 8.0;
  double extent_dec = 8.0;
  double amplitude = 20.0;  // peak value in intensity units
  FreqProfile profile = FreqProfile::gaussian;
};

struct SynthSpec {
  Vox3 cube_shape{1024, 32, 32};
  std::pair<double, double> noise_sigma{2.8, 3.8};
  int64_t n_sources = 0;
  // Survey-like extent distributions; desk-scale runs narrow these to fit
  // smaller cubes.
  std::pair<int64_t, int64_t> source_extent_freq{60, 400};
  std::pair<int64_t, int64_t> source_extent_spatial{4, 14};
  std::pair<double, double> source_amplitude_snr{6.0, 12.0};  // peak SNR
  std::vector<RfiSpec> rfi;
  double ripple_amplitude = 0.0;
  uint64_t seed = 0;

  void validate() const;
};

struct SynthResult {
  SpectralCube cube;
  LabelVolume mask;
  std::vector<SourceRecord> catalog;
  double noise_sigma = 0.0;        // drawn sigma
  std::vector<double> source_snr;  // requested peak SNR per source
};

// Pure function of the spec (including seed): same spec, same bits.
// The ground-truth mask marks voxels whose noiseless source contribution
// exceeds 0.5 * noise sigma; the catalog is the connected-component view
// of that mask.
SynthResult synth_cube(const SynthSpec& spec);

// Adds one source profile in place; mask voxels are set where the
// contribution exceeds mask_threshold. Errors if the footprint leaves the
// cube.
void inject_source(SpectralCube& cube, LabelVolume& mask,
                   const SourceParams& params, double mask_threshold);

// Footprint half-extents used by inject_source, for placement margins.
Vox3 source_footprint_half(const SourceParams& params);

void inject_rfi(SpectralCube& cube, const RfiSpec& rfi, double sigma);

// Draws concrete RFI placements within the cube shape from an independent
// stream, so enabling/disabling RFI leaves sources and noise unchanged.
std::vector<RfiSpec> make_random_rfi(Vox3 shape, int64_t n_narrowband,
                                     std::pair<int64_t, int64_t> nb_channels,
                                     double nb_strength, int64_t n_broadband,
                                     std::pair<int64_t, int64_t> bb_width,
                                     double bb_strength, Rng& rng);

}  // namespace hifind::synth
