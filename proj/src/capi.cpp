#include "hifind.h"

#include <cstring>
#include <string>

#include "hifind/cube.hpp"
#include "hifind/cube_io.hpp"
#include "hifind/pipeline.hpp"

using hifind::Error;
using hifind::ErrorKind;

struct hifind_cube {
  hifind::SpectralCube cube;
};
struct hifind_mask {
  hifind::LabelVolume mask;
};
struct hifind_catalog {
  std::vector<hifind::SourceRecord> records;
};

namespace {

thread_local std::string g_last_error;

int set_error(ErrorKind kind, const char* what) {
  g_last_error = what;
  return int(kind);
}

// Runs `fn`, translating exceptions into status codes.
template <class Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return HIFIND_OK;
  } catch (const Error& e) {
    return set_error(e.kind(), e.what());
  } catch (const std::exception& e) {
    return set_error(ErrorKind::internal, e.what());
  } catch (...) {
    return set_error(ErrorKind::internal, "unknown error");
  }
}

int require(bool ok, const char* msg) {
  return ok ? HIFIND_OK : set_error(ErrorKind::usage, msg);
}

}  // namespace

extern "C" {

const char* hifind_version(void) { return "0.1.0"; }

const char* hifind_last_error(void) { return g_last_error.c_str(); }

/* ---- cubes ---- */

int hifind_cube_read(const char* path, hifind_cube** out) {
  if (int rc = require(path && out, "null argument")) return rc;
  return guarded([&]() {
    auto* h = new hifind_cube{hifind::io::read_cube(path)};
    *out = h;
  });
}

int hifind_cube_write(const hifind_cube* cube, const char* path) {
  if (int rc = require(cube && path, "null argument")) return rc;
  return guarded([&]() { hifind::io::write_cube(cube->cube, path); });
}

int hifind_cube_create(const uint64_t shape[3], const float* data,
                       double freq_res, double spatial_res,
                       const double origin[3], hifind_cube** out) {
  if (int rc = require(shape && data && out, "null argument")) return rc;
  return guarded([&]() {
    hifind::SpectralCube c(
        {int64_t(shape[0]), int64_t(shape[1]), int64_t(shape[2])});
    std::memcpy(c.data.data(), data, c.data.size() * sizeof(float));
    c.freq_res = freq_res;
    c.spatial_res = spatial_res;
    if (origin) c.origin = {origin[0], origin[1], origin[2]};
    c.validate();
    *out = new hifind_cube{std::move(c)};
  });
}

void hifind_cube_free(hifind_cube* cube) { delete cube; }

void hifind_cube_shape(const hifind_cube* cube, uint64_t shape[3]) {
  shape[0] = uint64_t(cube->cube.shape.f);
  shape[1] = uint64_t(cube->cube.shape.r);
  shape[2] = uint64_t(cube->cube.shape.d);
}

const float* hifind_cube_data(const hifind_cube* cube) {
  return cube->cube.data.data();
}

void hifind_cube_resolution(const hifind_cube* cube, double* freq_res,
                            double* spatial_res) {
  if (freq_res) *freq_res = cube->cube.freq_res;
  if (spatial_res) *spatial_res = cube->cube.spatial_res;
}

/* ---- masks ---- */

int hifind_mask_read(const char* path, hifind_mask** out) {
  if (int rc = require(path && out, "null argument")) return rc;
  return guarded([&]() { *out = new hifind_mask{hifind::io::read_mask(path)}; });
}

int hifind_mask_write(const hifind_mask* mask, const char* path) {
  if (int rc = require(mask && path, "null argument")) return rc;
  return guarded([&]() { hifind::io::write_mask(mask->mask, path); });
}

int hifind_mask_create(const uint64_t shape[3], const uint8_t* data,
                       hifind_mask** out) {
  if (int rc = require(shape && data && out, "null argument")) return rc;
  return guarded([&]() {
    hifind::LabelVolume m(
        {int64_t(shape[0]), int64_t(shape[1]), int64_t(shape[2])});
    for (size_t i = 0; i < m.data.size(); ++i) m.data[i] = data[i];
    *out = new hifind_mask{std::move(m)};
  });
}

void hifind_mask_free(hifind_mask* mask) { delete mask; }

void hifind_mask_shape(const hifind_mask* mask, uint64_t shape[3]) {
  shape[0] = uint64_t(mask->mask.shape.f);
  shape[1] = uint64_t(mask->mask.shape.r);
  shape[2] = uint64_t(mask->mask.shape.d);
}

const int32_t* hifind_mask_data(const hifind_mask* mask) {
  return mask->mask.data.data();
}

/* ---- catalogs ---- */

int hifind_catalog_read(const char* path, hifind_catalog** out) {
  if (int rc = require(path && out, "null argument")) return rc;
  return guarded([&]() {
    *out = new hifind_catalog{hifind::io::read_catalog(path).records};
  });
}

void hifind_catalog_free(hifind_catalog* catalog) { delete catalog; }

size_t hifind_catalog_size(const hifind_catalog* catalog) {
  return catalog->records.size();
}

int hifind_catalog_record(const hifind_catalog* catalog, size_t index,
                          hifind_source_record* out) {
  if (int rc = require(catalog && out, "null argument")) return rc;
  if (index >= catalog->records.size())
    return set_error(ErrorKind::usage, "catalog index out of range");
  const auto& r = catalog->records[index];
  *out = {r.id,         r.bbox_min.f, r.bbox_max.f, r.bbox_min.r,
          r.bbox_max.r, r.bbox_min.d, r.bbox_max.d, r.n_voxels,
          r.peak,       r.flux_sum};
  return HIFIND_OK;
}

/* ---- pipeline ---- */

int hifind_run(const char* command, const char* config_text) {
  if (int rc = require(command && config_text, "null argument")) return rc;
  return guarded([&]() {
    hifind::pipeline::run_command(command,
                                  hifind::Config::parse(config_text));
  });
}

}  // extern "C"
