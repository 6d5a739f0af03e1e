#ifndef QSURROGATE_H
#define QSURROGATE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum QsStatus {
  QS_STATUS_OK = 0,
  QS_STATUS_NULL_POINTER = 1,
  QS_STATUS_INVALID_INPUT = 2,
  QS_STATUS_DIMENSION = 3,
  QS_STATUS_GUARD = 4,
  QS_STATUS_NUMERICAL = 5,
  QS_STATUS_CONFIG = 6,
  QS_STATUS_IO = 7,
  QS_STATUS_PARSE = 8,
  QS_STATUS_PANIC = 9,
} QsStatus;

// Opaque parametric circuit.
typedef struct QsCircuit QsCircuit;

// Opaque fitted ridge surrogate.
typedef struct QsModel QsModel;

// Opaque weighted Pauli-sum observable.
typedef struct QsObservable QsObservable;

// Pauli error rates of the noise model.
typedef struct QsNoise {
  double p_x;
  double p_y;
  double p_z;
  // Clifford-gate error rate.
  double p_c;
  // Readout flip probability.
  double p_e;
} QsNoise;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *qs_version(void);

// Message of the last failed call on this thread, or NULL. The pointer
// stays valid until the next call into the library on the same thread.
const char *qs_last_error_message(void);

// Parses a circuit from its JSON form.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum QsStatus qs_circuit_from_json(const char *json, struct QsCircuit **out);

// Builds the layered TFIM ansatz on `n` qubits.
//
// # Safety
// `out` must be a writable pointer.
enum QsStatus qs_circuit_vqe_ansatz(size_t n, size_t layers, struct QsCircuit **out);

// Number of parameter slots, or 0 for NULL.
//
// # Safety
// `c` must be NULL or a live circuit handle.
size_t qs_circuit_num_slots(const struct QsCircuit *c);

// Number of qubits, or 0 for NULL.
//
// # Safety
// `c` must be NULL or a live circuit handle.
size_t qs_circuit_num_qubits(const struct QsCircuit *c);

// Releases a circuit; NULL is ignored.
//
// # Safety
// `c` must be NULL or a handle not yet freed.
void qs_circuit_free(struct QsCircuit *c);

// Parses an observable from a JSON list of `{coeff, pauli_string}`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum QsStatus qs_observable_from_json(const char *json, struct QsObservable **out);

// Releases an observable; NULL is ignored.
//
// # Safety
// `o` must be NULL or a handle not yet freed.
void qs_observable_free(struct QsObservable *o);

// Estimates `Tr(O ρ(x))` under `noise`: exactly when `shots` is 0,
// otherwise from `shots` readouts per measurement group.
//
// # Safety
// Handles must be live, `x` must point to `len` doubles and `out` must be
// writable.
enum QsStatus qs_expectation(const struct QsCircuit *circuit,
                             const double *x,
                             size_t len,
                             const struct QsObservable *observable,
                             struct QsNoise noise,
                             size_t shots,
                             uint64_t seed,
                             double *out);

// Truncated trigonometric kernel between two `d`-dimensional points.
//
// # Safety
// `x` and `xp` must each point to `d` doubles and `out` must be writable.
enum QsStatus qs_kernel(const double *x,
                        const double *xp,
                        size_t d,
                        size_t truncation,
                        double *out);

// Loads a fitted ridge surrogate from its JSON record.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum QsStatus qs_model_from_json(const char *json, struct QsModel **out);

// Input dimension of a model, or 0 for NULL.
//
// # Safety
// `m` must be NULL or a live model handle.
size_t qs_model_input_dim(const struct QsModel *m);

// Evaluates a model at `x`.
//
// # Safety
// `m` must be live, `x` must point to `len` doubles and `out` must be writable.
enum QsStatus qs_model_predict(const struct QsModel *m, const double *x, size_t len, double *out);

// Releases a model; NULL is ignored.
//
// # Safety
// `m` must be NULL or a handle not yet freed.
void qs_model_free(struct QsModel *m);

// Runs the experiment described by the config file at `config_path`.
// `out_dir` may be NULL to use the configured directory.
//
// # Safety
// `config_path` must be a NUL-terminated string; `out_dir` must be NULL or
// a NUL-terminated string.
enum QsStatus qs_run_config(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSURROGATE_H */
