#ifndef DCME_H
#define DCME_H

/* Generated by cbindgen from the dcme-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes for every fallible call.
typedef enum {
  DcmeStatus_Ok = 0,
  DcmeStatus_NullArgument = 1,
  DcmeStatus_InvalidUtf8 = 2,
  DcmeStatus_ValidationError = 3,
  DcmeStatus_IoError = 4,
  DcmeStatus_IndexOutOfRange = 5,
  DcmeStatus_BufferTooSmall = 6,
} DcmeStatus;

// Opaque class grid handle.
typedef struct DcmeClassGrid DcmeClassGrid;

// Opaque decoded detection list.
typedef struct DcmeDetectionList DcmeDetectionList;

// Opaque instance label map handle.
typedef struct DcmeLabelMap DcmeLabelMap;

// Opaque displacement field handle.
typedef struct DcmeVectorField DcmeVectorField;

// Decode tuning parameters (see `dcme_decode_params_default`).
typedef struct {
  uint32_t min_votes;
  double merge_radius;
  double assign_tolerance;
  double fg_threshold;
} DcmeDecodeParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent error on this thread, or NULL when the last
// call succeeded. The pointer stays valid until the next failing call on
// the same thread.
const char *dcme_last_error_message(void);

// Static description of a status code.
const char *dcme_status_name(DcmeStatus status);

// Read a label map file (the `ILM v1` text format).
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer; the
// returned handle must be released with `dcme_label_map_free`.
DcmeStatus dcme_label_map_read(const char *path, DcmeLabelMap **out);

// # Safety
// `map` must come from this library; `path` must be NUL-terminated.
DcmeStatus dcme_label_map_write(const char *path, const DcmeLabelMap *map);

// # Safety
// `map` must be a handle from this library, not yet freed; NULL is a no-op.
void dcme_label_map_free(DcmeLabelMap *map);

// Row count, or 0 when the handle is NULL.
//
// # Safety
// `map` must be a live handle from this library or NULL.
uint32_t dcme_label_map_rows(const DcmeLabelMap *map);

// Column count, or 0 when the handle is NULL.
//
// # Safety
// `map` must be a live handle from this library or NULL.
uint32_t dcme_label_map_cols(const DcmeLabelMap *map);

// Encode a label map into its center-of-mass displacement field.
//
// # Safety
// `map` must be a live handle; `out` receives a new handle to free with
// `dcme_vector_field_free`.
DcmeStatus dcme_encode(const DcmeLabelMap *map, DcmeVectorField **out);

// # Safety
// `path` must be NUL-terminated; the handle in `out` must be freed with
// `dcme_vector_field_free`.
DcmeStatus dcme_vector_field_read(const char *path, DcmeVectorField **out);

// # Safety
// `field` must be a live handle; `path` must be NUL-terminated.
DcmeStatus dcme_vector_field_write(const char *path, const DcmeVectorField *field);

// # Safety
// `field` must be a handle from this library, not yet freed; NULL is a no-op.
void dcme_vector_field_free(DcmeVectorField *field);

// Build the class grid annotation of `map` at grid size 2^`grid_n`, with
// the class priority derived from the map itself.
//
// # Safety
// `map` must be a live handle; the handle in `out` must be freed with
// `dcme_class_grid_free`.
DcmeStatus dcme_class_grid_build(const DcmeLabelMap *map, uint32_t grid_n, DcmeClassGrid **out);

// # Safety
// `path` must be NUL-terminated; the handle in `out` must be freed with
// `dcme_class_grid_free`.
DcmeStatus dcme_class_grid_read(const char *path, DcmeClassGrid **out);

// # Safety
// `grid` must be a live handle; `path` must be NUL-terminated.
DcmeStatus dcme_class_grid_write(const char *path, const DcmeClassGrid *grid);

// # Safety
// `grid` must be a handle from this library, not yet freed; NULL is a no-op.
void dcme_class_grid_free(DcmeClassGrid *grid);

// Fill `out` with the default decode parameters.
//
// # Safety
// `out` must point to writable memory for one `DcmeDecodeParams`.
DcmeStatus dcme_decode_params_default(DcmeDecodeParams *out);

// Decode a field into class-agnostic detections.
//
// # Safety
// `field` must be a live handle; `params` may be NULL for defaults; the
// handle in `out` must be freed with `dcme_detection_list_free`.
DcmeStatus dcme_decode(const DcmeVectorField *field,
                       const DcmeDecodeParams *params,
                       DcmeDetectionList **out);

// Assign classes to decoded detections by center-of-mass lookup in `grid`.
//
// # Safety
// Both handles must be live and from this library.
DcmeStatus dcme_detection_list_classify(DcmeDetectionList *list, const DcmeClassGrid *grid);

// Number of detections, or 0 for NULL.
//
// # Safety
// `list` must be a live handle from this library or NULL.
uintptr_t dcme_detection_list_len(const DcmeDetectionList *list);

// # Safety
// `list` must be a handle from this library, not yet freed; NULL is a no-op.
void dcme_detection_list_free(DcmeDetectionList *list);

// Class id, confidence, center and mask size of detection `index`.
//
// # Safety
// `list` must be live; each non-NULL out pointer must be writable.
DcmeStatus dcme_detection_info(const DcmeDetectionList *list,
                               uintptr_t index,
                               uint32_t *class_out,
                               double *score_out,
                               double *center_x_out,
                               double *center_y_out,
                               uintptr_t *mask_len_out);

// Copy a detection mask into `buffer` as interleaved (x, y) pairs.
// `capacity` counts u32 values, so it must be at least twice the mask size.
//
// # Safety
// `buffer` must be writable for `capacity` u32 values.
DcmeStatus dcme_detection_mask(const DcmeDetectionList *list,
                               uintptr_t index,
                               uint32_t *buffer,
                               uintptr_t capacity);

// Score detections against ground truth at the standard threshold sweep
// (0.50..0.95) and return the report table as a newly allocated string.
//
// # Safety
// Handles must be live; the string written to `report_out` must be freed
// with `dcme_string_free`.
DcmeStatus dcme_evaluate(const DcmeDetectionList *list, const DcmeLabelMap *gt, char **report_out);

// Half-resolution ground-truth round trip report (representation loss).
//
// # Safety
// `gt` must be live; the string written to `report_out` must be freed with
// `dcme_string_free`.
DcmeStatus dcme_halfres_roundtrip_eval(const DcmeLabelMap *gt, char **report_out);

// Release a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed already.
void dcme_string_free(char *s);

// Clipped-logistic error transform with amplitude `a`; NaN when `a <= 0`.
double dcme_clip_error(double x, double a);

// Derivative of the clipped-logistic transform; NaN when `a <= 0`.
double dcme_clip_error_grad(double x, double a);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DCME_H */
