#ifndef PINCHFLOW_H
#define PINCHFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PfStatus {
  PF_STATUS_OK = 0,
  PF_STATUS_NULL_POINTER = 1,
  PF_STATUS_INVALID_ARGUMENT = 2,
  /**
   * `|H|` below tolerance or an umbilic point where a ratio is undefined.
   */
  PF_STATUS_DEGENERATE = 3,
  PF_STATUS_INVALID_MESH = 4,
  /**
   * NaN, step collapse or failed curvature recovery during a flow.
   */
  PF_STATUS_NUMERICAL = 5,
  /**
   * The simulation has reached its stop condition.
   */
  PF_STATUS_STOPPED = 6,
  PF_STATUS_PANIC = 7,
} PfStatus;

/**
 * Opaque flow state.
 */
typedef struct PfSimulation PfSimulation;

typedef struct PfSpecialFrame {
  double h;
  double a;
  double b;
  double c;
} PfSpecialFrame;

typedef struct PfCurvatureScalars {
  double norm_a2;
  double norm_acirc2;
  double gauss_k;
  double normal_kperp;
  double norm_rm_perp2;
  double r1;
  double r2;
  double r3;
  double simons_z;
} PfCurvatureScalars;

typedef struct PfGradientSlacks {
  double norm_grad_a2;
  double norm_grad_h2;
  double slack_8a;
  double slack_8b;
  double slack_8c;
} PfGradientSlacks;

typedef struct PfCertificate {
  double k;
  double gamma;
  double max_value;
  double argmax_a;
  double argmax_b;
  double argmax_c;
  size_t sample_count;
  bool non_positive;
} PfCertificate;

typedef struct PfFlowParams {
  double k;
  /**
   * Used only when `has_gamma` is set; otherwise `γ = 1 − 4k/3`.
   */
  double gamma;
  bool has_gamma;
  double eps;
  double sigma;
  double p;
  double cfl;
  double stop_factor;
  size_t max_steps;
  size_t output_every;
} PfFlowParams;

typedef struct PfTraceRow {
  size_t step;
  double t;
  double dt;
  double min_h;
  double max_a2;
  double max_q;
  double max_fsigma;
  double area;
  double int_fsigma_p;
  double pos_bound_slack;
  double z_ratio_min;
  double poincare_slack;
  double rescaled_max_acirc2;
} PfTraceRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`) and returns the full message length in bytes.
 */
size_t pf_last_error_message(char *buf, size_t len);

/**
 * Closed-form scalars of a special-frame state.
 */
enum PfStatus pf_special_frame_scalars(struct PfSpecialFrame state, struct PfCurvatureScalars *out);

/**
 * Reduces a shape tensor given as `(h11, h12, h22)` per normal direction.
 */
enum PfStatus pf_shape_to_special_frame(const double (*first)[3],
                                        const double (*second)[3],
                                        struct PfSpecialFrame *out);

/**
 * Simons nonlinearity by direct tensor sums.
 */
enum PfStatus pf_simons_z_tensor(const double (*first)[3], const double (*second)[3], double *out);

/**
 * `Q = |A|² + 2γ|K⊥| − k|H|² + ε`.
 */
enum PfStatus pf_pinch_q(struct PfSpecialFrame state,
                         double k,
                         double gamma,
                         double eps,
                         double *out);

/**
 * Gradient inequality slacks for the Codazzi-reduced state `(u₀..u₃, v₀..v₃)`.
 */
enum PfStatus pf_gradient_slacks(const double (*x)[8], struct PfGradientSlacks *out);

/**
 * Reaction expression of `Q` on the cone `Q = 0`.
 */
enum PfStatus pf_reaction_at_zero_q(double a,
                                    double b,
                                    double c,
                                    double eps,
                                    double k,
                                    double gamma,
                                    double *out);

/**
 * Samples the reaction expression at `k` with `γ = 1 − 4k/3`.
 */
enum PfStatus pf_certify(double k,
                         size_t grid,
                         size_t random_samples,
                         uint64_t seed,
                         struct PfCertificate *out);

/**
 * Fills `out` with the library defaults.
 */
enum PfStatus pf_flow_params_default(struct PfFlowParams *out);

/**
 * Creates a simulation from `n_vertices` points (4 doubles each) and `n_triangles`
 * index triples. On success `*out` owns a handle for [`pf_simulation_free`].
 */
enum PfStatus pf_simulation_new(const double *vertices,
                                size_t n_vertices,
                                const uint32_t *triangles,
                                size_t n_triangles,
                                const struct PfFlowParams *params,
                                struct PfSimulation **out);

/**
 * Advances one accepted step; `PF_STATUS_STOPPED` once a stop condition was reached.
 */
enum PfStatus pf_simulation_step(struct PfSimulation *sim, double *dt);

/**
 * Latest monitor row.
 */
enum PfStatus pf_simulation_monitors(struct PfSimulation *sim, struct PfTraceRow *out);

enum PfStatus pf_simulation_vertex_count(struct PfSimulation *sim, size_t *out);

enum PfStatus pf_simulation_time(struct PfSimulation *sim, double *out);

/**
 * Copies current positions into `out`, which must hold `4·len` doubles with `len`
 * equal to the vertex count.
 */
enum PfStatus pf_simulation_copy_vertices(struct PfSimulation *sim, double *out, size_t len);

/**
 * Releases a handle; null is ignored.
 */
void pf_simulation_free(struct PfSimulation *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PINCHFLOW_H */
