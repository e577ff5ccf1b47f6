/* hifind — HI source-finding toolkit, public C API.
 *
 * The shared library wraps the C++ core behind opaque handles and integer
 * status codes. All functions return HIFIND_OK (0) on success; on failure
 * they return a nonzero status and hifind_last_error() describes the
 * problem (thread-local, valid until the next failing call on the same
 * thread).
 */
#ifndef HIFIND_H
#define HIFIND_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hifind_status {
  HIFIND_OK = 0,
  HIFIND_ERR_USAGE = 1,    /* bad arguments or config */
  HIFIND_ERR_DATA = 2,     /* bad or inconsistent data/files */
  HIFIND_ERR_INTERNAL = 3, /* everything else */
} hifind_status;

const char* hifind_version(void);
const char* hifind_last_error(void);

/* ---- spectral cubes (HICUBE float32 container) ---- */

typedef struct hifind_cube hifind_cube;

int hifind_cube_read(const char* path, hifind_cube** out);
int hifind_cube_write(const hifind_cube* cube, const char* path);
/* data is copied; layout is C order over (freq, ra, dec), Dec. fastest. */
int hifind_cube_create(const uint64_t shape[3], const float* data,
                       double freq_res, double spatial_res,
                       const double origin[3], hifind_cube** out);
void hifind_cube_free(hifind_cube* cube);
void hifind_cube_shape(const hifind_cube* cube, uint64_t shape[3]);
const float* hifind_cube_data(const hifind_cube* cube);
void hifind_cube_resolution(const hifind_cube* cube, double* freq_res,
                            double* spatial_res);

/* ---- label masks (HICUBE uint8 container) ---- */

typedef struct hifind_mask hifind_mask;

int hifind_mask_read(const char* path, hifind_mask** out);
int hifind_mask_write(const hifind_mask* mask, const char* path);
int hifind_mask_create(const uint64_t shape[3], const uint8_t* data,
                       hifind_mask** out);
void hifind_mask_free(hifind_mask* mask);
void hifind_mask_shape(const hifind_mask* mask, uint64_t shape[3]);
/* Values are 0/1 for binary masks. */
const int32_t* hifind_mask_data(const hifind_mask* mask);

/* ---- source catalogs (CSV) ---- */

typedef struct hifind_catalog hifind_catalog;

typedef struct hifind_source_record {
  int64_t id;
  int64_t freq_min, freq_max;
  int64_t ra_min, ra_max;
  int64_t dec_min, dec_max;
  int64_t n_voxels;
  float peak;
  double flux_sum;
} hifind_source_record;

int hifind_catalog_read(const char* path, hifind_catalog** out);
void hifind_catalog_free(hifind_catalog* catalog);
size_t hifind_catalog_size(const hifind_catalog* catalog);
int hifind_catalog_record(const hifind_catalog* catalog, size_t index,
                          hifind_source_record* out);

/* ---- pipeline commands ----
 *
 * `command` is one of: synth | train | infer | baseline | eval | render.
 * `config_text` is the flat key=value configuration (lines, '#' comments);
 * see the README for the per-command keys. Progress goes to stdout.
 */
int hifind_run(const char* command, const char* config_text);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* HIFIND_H */
