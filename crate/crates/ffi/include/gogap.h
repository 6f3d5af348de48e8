#ifndef GOGAP_H
#define GOGAP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>
#include <stddef.h>

typedef enum GogapStatus {
  GOGAP_STATUS_OK = 0,
  GOGAP_STATUS_NULL_POINTER = 1,
  GOGAP_STATUS_INVALID_ARGUMENT = 2,
  GOGAP_STATUS_ILLEGAL_MOVE = 3,
  GOGAP_STATUS_PARSE_ERROR = 4,
  GOGAP_STATUS_STATS_ERROR = 5,
  GOGAP_STATUS_OUT_OF_RANGE = 6,
  GOGAP_STATUS_PANIC = 99,
} GogapStatus;

typedef enum GogapColor {
  GOGAP_COLOR_EMPTY = 0,
  GOGAP_COLOR_BLACK = 1,
  GOGAP_COLOR_WHITE = 2,
} GogapColor;

typedef enum GogapTail {
  GOGAP_TAIL_LESS = 0,
  GOGAP_TAIL_GREATER = 1,
  GOGAP_TAIL_TWO_SIDED = 2,
} GogapTail;

typedef struct GogapBoard GogapBoard;

typedef struct GogapRecord GogapRecord;

// A move; `col` and `row` are -1 for a pass.
typedef struct GogapMove {
  enum GogapColor color;
  int col;
  int row;
} GogapMove;

// Result of a two-sample test. Absent values are NaN.
typedef struct GogapTestResult {
  double statistic;
  double p;
  double df1;
  double df2;
  double effect_size;
  size_t n1;
  size_t n2;
  // Nonzero when the test could not be carried out (e.g. zero variance).
  int degenerate;
} GogapTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *gogap_last_error(void);

// Library version as a static NUL-terminated string.
const char *gogap_version(void);

// # Safety
// `s` must come from a gogap function documented to return an owned
// string, and must not be freed twice.
void gogap_string_free(char *s);

// Empty board with black to move.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum GogapStatus gogap_board_new(int size, double komi, struct GogapBoard **out);

// # Safety
// `board` must be NULL or a handle from this library not yet freed.
void gogap_board_free(struct GogapBoard *board);

// # Safety
// `board` must be a live handle; `out` writable.
enum GogapStatus gogap_board_clone(const struct GogapBoard *board, struct GogapBoard **out);

// Plays `mv` in place. On failure the board is unchanged.
//
// # Safety
// `board` must be a live handle.
enum GogapStatus gogap_board_play(struct GogapBoard *board, struct GogapMove mv);

// 1 when `mv` is legal, 0 otherwise (including a NULL board).
//
// # Safety
// `board` must be NULL or a live handle.
int gogap_board_is_legal(const struct GogapBoard *board, struct GogapMove mv);

// # Safety
// `board` must be a live handle; `out` writable.
enum GogapStatus gogap_board_get(const struct GogapBoard *board,
                                 int col,
                                 int row,
                                 enum GogapColor *out);

// # Safety
// `board` must be NULL or a live handle.
enum GogapColor gogap_board_to_move(const struct GogapBoard *board);

// Zobrist key of the position (stones, side to move, ko point); 0 for NULL.
//
// # Safety
// `board` must be NULL or a live handle.
uint64_t gogap_board_key(const struct GogapBoard *board);

// Stones captured by `color`.
//
// # Safety
// `board` must be NULL or a live handle.
uint32_t gogap_board_prisoners(const struct GogapBoard *board, enum GogapColor color);

// # Safety
// `board` must be NULL or a live handle.
int gogap_board_size(const struct GogapBoard *board);

// Parses SGF text (mainline only).
//
// # Safety
// `text` must be a NUL-terminated UTF-8 string; `out` writable.
enum GogapStatus gogap_record_parse(const char *text, struct GogapRecord **out);

// # Safety
// `record` must be NULL or a handle from this library not yet freed.
void gogap_record_free(struct GogapRecord *record);

// # Safety
// `record` must be NULL or a live handle.
int gogap_record_size(const struct GogapRecord *record);

// # Safety
// `record` must be NULL or a live handle.
size_t gogap_record_move_count(const struct GogapRecord *record);

// # Safety
// `record` must be a live handle; `out` writable.
enum GogapStatus gogap_record_move(const struct GogapRecord *record,
                                   size_t index,
                                   struct GogapMove *out);

// Canonical SGF text. The caller frees it with [`gogap_string_free`].
//
// # Safety
// `record` must be a live handle; `out` writable.
enum GogapStatus gogap_record_to_sgf(const struct GogapRecord *record, char **out);

// Board after the first `ply` moves of the record.
//
// # Safety
// `record` must be a live handle; `out` writable.
enum GogapStatus gogap_record_position(const struct GogapRecord *record,
                                       size_t ply,
                                       struct GogapBoard **out);

// Welch's unequal-variance t test; `df1` holds the Welch-Satterthwaite
// degrees of freedom and `effect_size` Cohen's d.
//
// # Safety
// `x` and `y` must point to `nx` and `ny` readable doubles; `out` writable.
enum GogapStatus gogap_welch_t(const double *x,
                               size_t nx,
                               const double *y,
                               size_t ny,
                               enum GogapTail tail,
                               struct GogapTestResult *out);

// Wilcoxon rank-sum test; `statistic` is the rank sum of `x`.
//
// # Safety
// As for [`gogap_welch_t`].
enum GogapStatus gogap_wilcoxon_rank_sum(const double *x,
                                         size_t nx,
                                         const double *y,
                                         size_t ny,
                                         enum GogapTail tail,
                                         struct GogapTestResult *out);

// Two-sample Kolmogorov-Smirnov test.
//
// # Safety
// As for [`gogap_welch_t`].
enum GogapStatus gogap_ks_two_sample(const double *x,
                                     size_t nx,
                                     const double *y,
                                     size_t ny,
                                     enum GogapTail tail,
                                     struct GogapTestResult *out);

// Levene's test; `median` nonzero selects the Brown-Forsythe center.
//
// # Safety
// As for [`gogap_welch_t`].
enum GogapStatus gogap_levene(const double *x,
                              size_t nx,
                              const double *y,
                              size_t ny,
                              int median,
                              enum GogapTail tail,
                              struct GogapTestResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GOGAP_H */
