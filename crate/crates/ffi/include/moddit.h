#ifndef MODDIT_H
#define MODDIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MdStatus {
  MD_STATUS_OK = 0,
  MD_STATUS_NULL_POINTER = 1,
  MD_STATUS_INVALID_ARGUMENT = 2,
  MD_STATUS_DIMENSION_MISMATCH = 3,
  MD_STATUS_NUMERICAL_FAILURE = 4,
  MD_STATUS_IO = 5,
  MD_STATUS_PANIC = 6,
} MdStatus;

typedef enum MdDirection {
  MD_DIRECTION_ASCENDING = 0,
  MD_DIRECTION_DESCENDING = 1,
} MdDirection;

/*
 Block-level pass/skip mask.
 */
typedef struct MdBlockMask MdBlockMask;

/*
 Fitted pattern intensities, flattened as `c`, then `d`, then `e`.
 */
typedef struct MdIntensities MdIntensities;

/*
 Token count, block size and number of frame squares.
 */
typedef struct MdLayout MdLayout;

/*
 Block sparsity map, `n × n`.
 */
typedef struct MdSparsityMap MdSparsityMap;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *md_version(void);

/*
 Message for the last failed call on this thread, or NULL after a success.
 Valid until the next `md_*` call on the same thread.
 */
const char *md_last_error(void);

/*
 # Safety
 `out` must be a valid pointer to writable storage for one handle.
 */
enum MdStatus md_layout_new(size_t tokens, size_t block, size_t frames, struct MdLayout **out);

/*
 # Safety
 `layout` must be NULL or a handle from [`md_layout_new`] not yet freed.
 */
void md_layout_free(struct MdLayout *layout);

/*
 Blocks per side, or 0 for a NULL handle.

 # Safety
 `layout` must be NULL or a live handle.
 */
size_t md_layout_grid(const struct MdLayout *layout);

/*
 Length of an intensity vector for this layout, or 0 for a NULL handle.

 # Safety
 `layout` must be NULL or a live handle.
 */
size_t md_layout_pattern_count(const struct MdLayout *layout);

/*
 Block sparsity map of a row-major `tokens × tokens` attention matrix.

 # Safety
 `attention` must point to `len` readable doubles; `layout` must be live.
 */
enum MdStatus md_sparsify(const struct MdLayout *layout,
                          const double *attention,
                          size_t len,
                          double eta,
                          struct MdSparsityMap **out);

/*
 Wraps a row-major `side × side` map with entries in `[0, 1]`.

 # Safety
 `values` must point to `side * side` readable doubles.
 */
enum MdStatus md_sparsity_map_new(const double *values, size_t side, struct MdSparsityMap **out);

/*
 # Safety
 `map` must be NULL or a live handle.
 */
void md_sparsity_map_free(struct MdSparsityMap *map);

/*
 # Safety
 `map` must be NULL or a live handle.
 */
size_t md_sparsity_map_side(const struct MdSparsityMap *map);

/*
 Copies the map row-major into `buf`, which must hold exactly `side²` values.

 # Safety
 `buf` must point to `len` writable doubles.
 */
enum MdStatus md_sparsity_map_copy(const struct MdSparsityMap *map, double *buf, size_t len);

/*
 Fits pattern intensities. `nae_out` may be NULL.

 # Safety
 Handles must be live; `out` must be writable; `nae_out` NULL or writable.
 */
enum MdStatus md_decompose(const struct MdSparsityMap *map,
                           const struct MdLayout *layout,
                           double lambda,
                           struct MdIntensities **out,
                           double *nae_out);

/*
 Intensities from a flat `c, d, e` buffer of `md_layout_pattern_count` values.

 # Safety
 `values` must point to `len` readable doubles.
 */
enum MdStatus md_intensities_new(const struct MdLayout *layout,
                                 const double *values,
                                 size_t len,
                                 struct MdIntensities **out);

/*
 # Safety
 `x` must be NULL or a live handle.
 */
void md_intensities_free(struct MdIntensities *x);

/*
 # Safety
 `x` must be NULL or a live handle.
 */
size_t md_intensities_len(const struct MdIntensities *x);

/*
 # Safety
 `buf` must point to `len` writable doubles.
 */
enum MdStatus md_intensities_copy(const struct MdIntensities *x, double *buf, size_t len);

/*
 Top-K block mask from `current`. Frame squares are kept when both
 `previous` and `current` exceed `tau_e`; a NULL `previous` uses `current`
 twice. `cover_rows` opens the diagonal block of any empty block row.

 # Safety
 Handles must be live or, for `previous`, NULL; `out` must be writable.
 */
enum MdStatus md_mask_build(const struct MdLayout *layout,
                            const struct MdIntensities *current,
                            const struct MdIntensities *previous,
                            size_t top_k,
                            double tau_e,
                            enum MdDirection direction,
                            bool cover_rows,
                            struct MdBlockMask **out);

/*
 # Safety
 `mask` must be NULL or a live handle.
 */
void md_block_mask_free(struct MdBlockMask *mask);

/*
 # Safety
 `mask` must be NULL or a live handle.
 */
size_t md_block_mask_side(const struct MdBlockMask *mask);

/*
 Fraction of skipped blocks, or NaN for a NULL handle.

 # Safety
 `mask` must be NULL or a live handle.
 */
double md_block_mask_sparsity_ratio(const struct MdBlockMask *mask);

/*
 Writes 1 for pass and 0 for skip, row-major, into `side²` bytes.

 # Safety
 `buf` must point to `len` writable bytes.
 */
enum MdStatus md_block_mask_copy(const struct MdBlockMask *mask, uint8_t *buf, size_t len);

/*
 Runs the simulator on a config file and writes its CSV reports to `out_dir`.

 # Safety
 Both arguments must be NUL-terminated strings.
 */
enum MdStatus md_simulate(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODDIT_H */
