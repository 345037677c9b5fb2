/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef SYMLOSS_H
#define SYMLOSS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  SYMLOSS_STATUS_OK = 0,
  SYMLOSS_STATUS_NULL_POINTER = 1,
  SYMLOSS_STATUS_INVALID_ARGUMENT = 2,
  SYMLOSS_STATUS_PARSE_ERROR = 3,
  SYMLOSS_STATUS_UNSUPPORTED = 4,
  SYMLOSS_STATUS_NUMERIC_ERROR = 5,
  SYMLOSS_STATUS_IO_ERROR = 6,
  SYMLOSS_STATUS_PANIC = 7,
  SYMLOSS_STATUS_INTERNAL = 8,
} SymlossStatus;

// Opaque loss handle.
typedef struct SymlossLoss SymlossLoss;

// Opaque MLP scorer handle.
typedef struct SymlossMlp SymlossMlp;

// Calibration facts for one loss.
typedef struct {
  bool symmetric;
  bool calibrated;
  double inf_pos;
  double inf_nonpos;
  // Slope `C` of the linear calibration transform `ψ(θ) = Cθ`.
  double psi_slope;
} SymlossCalibration;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after a success.
// Valid until the next call into the library from the same thread.
const char *symloss_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *symloss_version(void);

// Frees a string returned by the library. Null is a no-op.
void symloss_string_free(char *s);

// Builds a loss from a descriptor such as `"sigmoid"` or
// `"barrier(b=200,r=50)"`.
SymlossStatus symloss_loss_new(const char *descriptor, SymlossLoss **out_loss);

void symloss_loss_free(SymlossLoss *loss);

// Canonical descriptor of the loss; free with `symloss_string_free`.
SymlossStatus symloss_loss_descriptor(const SymlossLoss *loss, char **out_text);

// `ℓ(z)` for each of the `n` margins.
SymlossStatus symloss_loss_eval(const SymlossLoss *loss,
                                const double *z,
                                size_t n,
                                double *out_values);

// `ℓ'(z)` (a fixed subgradient at kinks) for each of the `n` margins.
// Fails with `UNSUPPORTED` for the zero-one loss.
SymlossStatus symloss_loss_grad(const SymlossLoss *loss,
                                const double *z,
                                size_t n,
                                double *out_values);

// `ℓ(z) + ℓ(-z)`; constant in `z` exactly for symmetric losses.
SymlossStatus symloss_loss_symmetry_defect(const SymlossLoss *loss, double z, double *out_value);

SymlossStatus symloss_check_calibration(const SymlossLoss *loss, SymlossCalibration *out_report);

// Zero-one excess risk bound implied by `surrogate_excess`, for calibrated
// symmetric losses.
SymlossStatus symloss_excess_risk_bound(const SymlossLoss *loss,
                                        double surrogate_excess,
                                        double *out_bound);

// BER objective `½[mean ℓ(g_cp) + mean ℓ(-g_cn)]` on precomputed scores.
SymlossStatus symloss_ber_objective(const SymlossLoss *loss,
                                    const double *scores_cp,
                                    size_t n_cp,
                                    const double *scores_cn,
                                    size_t n_cn,
                                    double *out_value);

// AUC objective: mean of `ℓ(g_cp[i] - g_cn[j])` over all pairs.
SymlossStatus symloss_auc_objective(const SymlossLoss *loss,
                                    const double *scores_cp,
                                    size_t n_cp,
                                    const double *scores_cn,
                                    size_t n_cn,
                                    double *out_value);

// Balanced accuracy of `sign(score)` against labels in {-1, +1}; a zero
// score counts as wrong.
SymlossStatus symloss_eval_bac(const double *scores,
                               const int8_t *labels,
                               size_t n,
                               double *out_value);

// Mann–Whitney AUC of the scores against labels in {-1, +1}; ties count ½.
SymlossStatus symloss_eval_auc(const double *scores,
                               const int8_t *labels,
                               size_t n,
                               double *out_value);

// Fresh one-hidden-layer ReLU MLP (`hidden = 0` gives a linear scorer).
SymlossStatus symloss_mlp_new(size_t input_dim, size_t hidden, uint64_t seed, SymlossMlp **out_mlp);

// Loads a model from a JSON checkpoint.
SymlossStatus symloss_mlp_from_json(const char *json, SymlossMlp **out_mlp);

// JSON checkpoint of the model; free with `symloss_string_free`.
SymlossStatus symloss_mlp_to_json(const SymlossMlp *mlp, char **out_json);

SymlossStatus symloss_mlp_input_dim(const SymlossMlp *mlp, size_t *out_dim);

// Scores `n_rows` row-major patterns of width `n_cols` into `out_scores`.
SymlossStatus symloss_mlp_forward(const SymlossMlp *mlp,
                                  const double *x,
                                  size_t n_rows,
                                  size_t n_cols,
                                  double *out_scores);

void symloss_mlp_free(SymlossMlp *mlp);

// Runs an experiment grid given as JSON (the same format the `symloss
// experiment` command reads) on up to `jobs` threads (0 = all cores) and
// returns a JSON array with one `{dataset, loss, pi, pi_prime, objective,
// seed, bac, auc}` object per run. Free the result with
// `symloss_string_free`.
SymlossStatus symloss_run_grid_json(const char *config_json, size_t jobs, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SYMLOSS_H */
