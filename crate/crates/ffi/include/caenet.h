#ifndef CAENET_H
#define CAENET_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum {
  CAENET_STATUS_OK = 0,
  CAENET_STATUS_NULL_POINTER = 1,
  CAENET_STATUS_INVALID_ARGUMENT = 2,
  CAENET_STATUS_SHAPE = 3,
  CAENET_STATUS_CONFIG = 4,
  CAENET_STATUS_DATA = 5,
  CAENET_STATUS_FORMAT = 6,
  CAENET_STATUS_VERSION = 7,
  CAENET_STATUS_IO = 8,
  CAENET_STATUS_WRONG_MODEL_KIND = 9,
  CAENET_STATUS_NUMERIC = 10,
  CAENET_STATUS_PANIC = 11,
} CaenetStatus;

/**
 * Convolutional autoencoder handle.
 */
typedef struct CaenetCae CaenetCae;

/**
 * Classifier handle.
 */
typedef struct CaenetCnn CaenetCnn;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *caenet_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *caenet_version(void);

/**
 * `lr0 · decay^epoch`.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `double`.
 */
CaenetStatus caenet_lr_at_epoch(double lr0, double decay, int64_t epoch, double *out);

/**
 * Builds a freshly initialized autoencoder.
 *
 * # Safety
 * `out` must be null or point to writable memory for one pointer.
 */
CaenetStatus caenet_cae_build(uint32_t input_channels,
                              uint32_t height,
                              uint32_t width,
                              uint32_t conv1_channels,
                              uint32_t conv2_channels,
                              bool tied_decoder,
                              double corruption_fraction,
                              uint64_t seed,
                              CaenetCae **out);

/**
 * Loads an autoencoder checkpoint.
 *
 * # Safety
 * `path` must be null or a NUL-terminated string; `out` must be null or
 * writable.
 */
CaenetStatus caenet_cae_load(const char *path, CaenetCae **out);

/**
 * Writes the autoencoder to `path`.
 *
 * # Safety
 * `model` must be null or a live handle; `path` null or NUL-terminated.
 */
CaenetStatus caenet_cae_save(const CaenetCae *model, const char *path);

/**
 * Number of values in one input image (`C · H · W`).
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t caenet_cae_input_len(const CaenetCae *model);

/**
 * Reconstructs one image. `input` and `output` both hold
 * [`caenet_cae_input_len`] values.
 *
 * # Safety
 * `input` must be readable for `input_len` doubles and `output` writable
 * for `output_len` doubles.
 */
CaenetStatus caenet_cae_reconstruct(const CaenetCae *model,
                                    const double *input,
                                    size_t input_len,
                                    double *output,
                                    size_t output_len);

/**
 * Releases an autoencoder handle. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void caenet_cae_free(CaenetCae *model);

/**
 * Builds a classifier on a copy of the autoencoder's encoder with a fresh
 * head of `n_fc` hidden layers.
 *
 * # Safety
 * `fc_sizes` must be readable for `n_fc` values (may be null when
 * `n_fc == 0`); `out` must be writable.
 */
CaenetStatus caenet_cnn_from_cae(const CaenetCae *cae,
                                 const uint32_t *fc_sizes,
                                 size_t n_fc,
                                 uint32_t n_classes,
                                 bool freeze_encoder,
                                 uint64_t seed,
                                 CaenetCnn **out);

/**
 * Loads a classifier checkpoint.
 *
 * # Safety
 * As for [`caenet_cae_load`].
 */
CaenetStatus caenet_cnn_load(const char *path, CaenetCnn **out);

/**
 * Writes the classifier to `path`.
 *
 * # Safety
 * As for [`caenet_cae_save`].
 */
CaenetStatus caenet_cnn_save(const CaenetCnn *model, const char *path);

/**
 * Number of values in one input image.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t caenet_cnn_input_len(const CaenetCnn *model);

/**
 * Number of output classes; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t caenet_cnn_num_classes(const CaenetCnn *model);

/**
 * Class probabilities for one image; `probs` holds
 * [`caenet_cnn_num_classes`] values.
 *
 * # Safety
 * `input` readable for `input_len` doubles; `probs` writable for
 * `probs_len` doubles.
 */
CaenetStatus caenet_cnn_probabilities(const CaenetCnn *model,
                                      const double *input,
                                      size_t input_len,
                                      double *probs,
                                      size_t probs_len);

/**
 * Most probable class for one image; ties go to the lowest index.
 *
 * # Safety
 * `input` readable for `input_len` doubles; `label` writable.
 */
CaenetStatus caenet_cnn_predict(const CaenetCnn *model,
                                const double *input,
                                size_t input_len,
                                uint32_t *label);

/**
 * Releases a classifier handle. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void caenet_cnn_free(CaenetCnn *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAENET_H */
