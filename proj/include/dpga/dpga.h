/* C interface to the DPGA federated-learning simulator.
 *
 * All objects are opaque handles owned by the caller and released with the
 * matching *_destroy function. Every fallible call returns a dpga_status;
 * on failure the thread-local accessors below describe the error until the
 * next failing call on the same thread.
 *
 * Functions that fill a caller buffer take (buf, cap, needed): the required
 * size, including any terminating NUL, is always stored in *needed when
 * needed is non-NULL, and DPGA_ERR_ARGUMENT is returned when cap is too small.
 */
#ifndef DPGA_DPGA_H
#define DPGA_DPGA_H

#include <stddef.h>
#include <stdint.h>

#if defined(DPGA_BUILDING_LIBRARY)
#define DPGA_API __attribute__((visibility("default")))
#else
#define DPGA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dpga_status {
  DPGA_OK = 0,
  DPGA_ERR_CONFIG = 1,   /* bad configuration value, key or file syntax */
  DPGA_ERR_CONTRACT = 2, /* precondition broken at run time */
  DPGA_ERR_PROTOCOL = 3, /* client/server sequencing fault */
  DPGA_ERR_DECODE = 4,   /* malformed wire message */
  DPGA_ERR_FORMAT = 5,   /* malformed metrics CSV */
  DPGA_ERR_IO = 6,       /* file could not be read or written */
  DPGA_ERR_ARGUMENT = 7, /* NULL handle, index out of range, short buffer */
  DPGA_ERR_INTERNAL = 8
} dpga_status;

typedef struct dpga_config dpga_config;
typedef struct dpga_result dpga_result;
typedef struct dpga_message dpga_message;

DPGA_API const char* dpga_version(void);
DPGA_API const char* dpga_status_name(dpga_status status);

/* Last error on this thread. */
DPGA_API const char* dpga_last_error(void);
/* Configuration key involved, or "" when unknown. */
DPGA_API const char* dpga_last_error_key(void);
/* Source line of a configuration error (0 when not from a file). */
DPGA_API size_t dpga_last_error_line(void);
/* Byte offset of a decode error or 1-based row of a CSV format error. */
DPGA_API size_t dpga_last_error_position(void);

/* ---- configuration ---------------------------------------------------- */

DPGA_API dpga_status dpga_config_create(dpga_config** out);
DPGA_API void dpga_config_destroy(dpga_config* config);
DPGA_API dpga_status dpga_config_load(dpga_config* config, const char* path);
DPGA_API dpga_status dpga_config_parse(dpga_config* config, const char* text);
/* Override one section.key; later calls win. */
DPGA_API dpga_status dpga_config_set(dpga_config* config, const char* key,
                                     const char* value);
DPGA_API dpga_status dpga_config_get(const dpga_config* config, const char* key,
                                     char* buf, size_t cap, size_t* needed);
DPGA_API dpga_status dpga_config_is_explicit(const dpga_config* config,
                                             const char* key, int* out);
/* Full type and range check without running anything. */
DPGA_API dpga_status dpga_config_validate(const dpga_config* config);
/* One "key = value" line per known key; defaulted keys end in "(default)". */
DPGA_API dpga_status dpga_config_describe(const dpga_config* config, char* buf,
                                          size_t cap, size_t* needed);

/* ---- running ---------------------------------------------------------- */

typedef struct dpga_record {
  uint64_t round;
  double sim_time;
  uint64_t up_bytes;   /* cumulative */
  uint64_t down_bytes; /* cumulative */
  double p;
  double train_loss;
  double eval_acc;
  double eval_acc_clients;
} dpga_record;

typedef struct dpga_run_info {
  size_t dimension;
  size_t clients;
  unsigned delay;
  int parallel;
  uint64_t aggregates;
  uint64_t corrections;
  uint64_t nonzero_correction_terms;
  double max_abs_correction;
  uint64_t stalls;
  size_t pending_left;
} dpga_run_info;

DPGA_API dpga_status dpga_run(const dpga_config* config, dpga_result** out);
DPGA_API void dpga_result_destroy(dpga_result* result);
DPGA_API size_t dpga_result_rows(const dpga_result* result);
DPGA_API dpga_status dpga_result_row(const dpga_result* result, size_t index,
                                     dpga_record* out);
DPGA_API dpga_status dpga_result_info(const dpga_result* result, dpga_run_info* out);
/* Final weights of one client (info.dimension values). */
DPGA_API dpga_status dpga_result_weights(const dpga_result* result, size_t client,
                                         double* buf, size_t cap, size_t* needed);
DPGA_API dpga_status dpga_result_write_csv(const dpga_result* result, const char* path);
/* The same metrics CSV as text. */
DPGA_API dpga_status dpga_result_csv(const dpga_result* result, char* buf, size_t cap,
                                     size_t* needed);

/* Summary CSV with one row per (label, result) pair. */
DPGA_API dpga_status dpga_write_summary(const char* path, const char* const* labels,
                                        const dpga_result* const* results, size_t count);

/* Dataset/partition dump (index,label,client) for the configured split. */
DPGA_API dpga_status dpga_write_partition(const dpga_config* config, const char* path);

/* ---- self-checks and plotting ----------------------------------------- */

#define DPGA_CHECK_INJECT_GRADIENT_FAULT 1u

typedef void (*dpga_check_callback)(const char* suite, int passed, double max_error,
                                    double tolerance, const char* detail, void* user);

/* Runs every suite, reporting each through callback (which may be NULL).
 * *all_passed is 1 iff every suite passed. */
DPGA_API dpga_status dpga_check(unsigned flags, dpga_check_callback callback,
                                void* user, int* all_passed);

/* Renders eval_acc of each metrics CSV against axis "round", "sim_time" or
 * "up_bytes" into an SVG file. labels may be NULL to use the paths. */
DPGA_API dpga_status dpga_plot(const char* const* csv_paths, const char* const* labels,
                               size_t count, const char* axis, const char* out_path);

/* ---- wire messages ---------------------------------------------------- */

/* Top-K selection of a dense accumulated gradient at share ratio p. */
DPGA_API dpga_status dpga_message_from_dense(const double* z, size_t d, double p,
                                             uint64_t round, dpga_message** out);
DPGA_API dpga_status dpga_message_decode(const uint8_t* bytes, size_t size,
                                         dpga_message** out);
DPGA_API dpga_status dpga_message_encode(const dpga_message* message, uint8_t* buf,
                                         size_t cap, size_t* needed);
DPGA_API void dpga_message_destroy(dpga_message* message);
DPGA_API uint64_t dpga_message_round(const dpga_message* message);
DPGA_API double dpga_message_rate(const dpga_message* message);
DPGA_API size_t dpga_message_size(const dpga_message* message);
DPGA_API dpga_status dpga_message_entry(const dpga_message* message, size_t k,
                                        uint32_t* index, double* value);
/* Encoded length of a message with the given number of entries. */
DPGA_API size_t dpga_message_bytes(size_t entries);

#ifdef __cplusplus
}
#endif

#endif /* DPGA_DPGA_H */
