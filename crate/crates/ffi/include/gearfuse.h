#ifndef GEARFUSE_H
#define GEARFUSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GfStatus {
  GfStatus_Ok = 0,
  GfStatus_NullPointer = 1,
  GfStatus_InvalidArgument = 2,
  GfStatus_Shape = 3,
  GfStatus_Io = 4,
  GfStatus_Format = 5,
  GfStatus_Panic = 6,
} GfStatus;

/**
 * Row-major real grid (frequency along rows).
 */
typedef struct GfGrid GfGrid;

/**
 * Trained classifier plus the configuration it was built from.
 */
typedef struct GfModel GfModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *gf_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *gf_last_error(void);

/**
 * Adaptive Gabor STFT magnitude with a 16-section window schedule.
 *
 * # Safety
 * `signal` must point to `len` doubles, `schedule` to 16 integers and `out`
 * to writable storage for one handle.
 */
enum GfStatus gf_astft(const double *signal,
                       uintptr_t len,
                       const uint32_t *schedule,
                       uintptr_t hop,
                       struct GfGrid **out);

/**
 * Wigner-Ville distribution magnitude (`len x len`).
 *
 * # Safety
 * `signal` must point to `len` doubles and `out` to storage for one handle.
 */
enum GfStatus gf_wvd(const double *signal, uintptr_t len, struct GfGrid **out);

/**
 * DTCWT scalogram resampled to `rows x cols`.
 *
 * # Safety
 * `signal` must point to `len` doubles and `out` to storage for one handle.
 */
enum GfStatus gf_dtcwt_scalogram(const double *signal,
                                 uintptr_t len,
                                 uintptr_t levels,
                                 uintptr_t rows,
                                 uintptr_t cols,
                                 struct GfGrid **out);

/**
 * Forward then inverse DTCWT; writes `len` reconstructed samples.
 *
 * # Safety
 * `signal` and `out` must each point to `len` doubles.
 */
enum GfStatus gf_dtcwt_roundtrip(const double *signal,
                                 uintptr_t len,
                                 uintptr_t levels,
                                 double *out);

/**
 * One seeded PSO search with default swarm constants; writes the best
 * 16-section schedule and its fitness.
 *
 * # Safety
 * `signal` must point to `len` doubles, `out_schedule` to 16 writable
 * integers and `out_fitness` to one writable double.
 */
enum GfStatus gf_pso_optimize(const double *signal,
                              uintptr_t len,
                              uint64_t seed,
                              uint32_t *out_schedule,
                              double *out_fitness);

/**
 * # Safety
 * `grid` must be a live handle or NULL.
 */
uintptr_t gf_grid_rows(const struct GfGrid *grid);

/**
 * # Safety
 * `grid` must be a live handle or NULL.
 */
uintptr_t gf_grid_cols(const struct GfGrid *grid);

/**
 * Borrowed pointer to `rows * cols` values; valid until the grid is freed.
 *
 * # Safety
 * `grid` must be a live handle or NULL.
 */
const double *gf_grid_data(const struct GfGrid *grid);

/**
 * # Safety
 * `grid` must come from this library and not be freed twice. NULL is a no-op.
 */
void gf_grid_free(struct GfGrid *grid);

/**
 * Loads a checkpoint. `config_path` is the run configuration the model was
 * trained with (the `config.txt` echoed next to it); it fixes the
 * architecture. `class_count` must match the training data.
 *
 * # Safety
 * Paths must be NUL-terminated UTF-8; `out` must be writable.
 */
enum GfStatus gf_model_load(const char *config_path,
                            const char *model_path,
                            uintptr_t class_count,
                            struct GfModel **out);

/**
 * Values per packed sample expected by [`gf_model_predict`].
 *
 * # Safety
 * `model` must be a live handle or NULL.
 */
uintptr_t gf_model_input_len(const struct GfModel *model);

/**
 * # Safety
 * `model` must be a live handle or NULL.
 */
uintptr_t gf_model_class_count(const struct GfModel *model);

/**
 * Inference on `n` packed samples (`n * input_len` values, layout of the
 * model's variant); writes `n * class_count` logits row-major.
 *
 * # Safety
 * `inputs` must hold `n * input_len` doubles and `out_logits`
 * `n * class_count` writable doubles.
 */
enum GfStatus gf_model_predict(struct GfModel *model,
                               const double *inputs,
                               uintptr_t n,
                               double *out_logits);

/**
 * # Safety
 * `model` must come from this library and not be freed twice. NULL is a no-op.
 */
void gf_model_free(struct GfModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEARFUSE_H */
