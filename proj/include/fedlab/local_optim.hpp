#pragma once

#include <cstdint>
#include <vector>

#include "fedlab/cover.hpp"

namespace fedlab {

using ParamVector = std::vector<double>;

double l2_norm(const ParamVector& v);
double linf_norm(const ParamVector& v);

// Client-side optimizer kinds.
//   sgd      — plain gradient step.
//   agdu     — AdaGrad whose second-moment accumulation fires only every
//              z-th step (delay); the preconditioner is held in between.
//   admu     — Adam with the same delayed second moment; the first moment
//              and its debias update every step.
//   sm3_i    — cover-compressed AdaGrad, additive group accumulators.
//   sm3_ii   — cover-compressed AdaGrad, tighter rebuild-from-minima rule.
//   sm3_adam — admu first moment combined with the sm3_ii second moment.
enum class LocalKind { sgd, agdu, admu, sm3_i, sm3_ii, sm3_adam };

struct LocalOptConfig {
  LocalKind kind = LocalKind::sgd;
  double eta = 1e-2;          // client learning rate, > 0
  double epsilon = 1e-8;      // denominator smoothing, > 0
  double epsilon_clip = 0.0;  // small-update clip threshold, >= 0 (0 = off)
  std::int64_t delay = 1;     // preconditioner update period z, >= 1
  double beta1 = 0.0;         // first-moment EMA (admu / sm3_adam), in [0, 1)
  double beta2 = 0.0;         // second-moment EMA; 0 selects the cumulative
                              // rule for sm3 kinds, in [0, 1)
  double v0 = 0.0;            // second-moment floor at reset, >= 0
  const Cover* cover = nullptr;  // required by the sm3 kinds
};

// Mutable per-client optimizer state.  reset() restores the configured
// initial values; the engine calls it at the start of every local session
// (zero-initialization) and may then overwrite v with a transmitted
// preconditioner.
struct LocalOptState {
  std::int64_t k = 0;      // completed step count (the next step is k+1)
  ParamVector m;           // first-moment EMA (admu / sm3_adam)
  ParamVector v;           // dense second moment (all kinds except sgd)
  ParamVector vhat;        // debiased second moment held across delays
  std::vector<double> mu;  // per-group accumulators (sm3 kinds)

  void reset(std::size_t dim, const LocalOptConfig& cfg);

 private:
  std::vector<double> mu_scratch_;
  ParamVector update_;
  friend void local_step(ParamVector&, const ParamVector&, LocalOptState&,
                         const LocalOptConfig&, double);
};

// If 0 < ||u||_2 < eps_clip, zeroes u exactly; otherwise leaves it untouched
// (a zero vector is already zero and stays).  eps_clip <= 0 disables.
void apply_epsilon_clip(ParamVector& u, double eps_clip);

// Advances one local step: consumes gradient g at iterate x, mutates x and
// state.  lr_scale multiplies the configured learning rate for this step
// only (warm-up / round schedules are owned by the engine, not the
// optimizer).  Throws std::invalid_argument on malformed configuration
// (dimension mismatch, missing cover for sm3 kinds, non-positive eta...).
void local_step(ParamVector& x, const ParamVector& g, LocalOptState& state,
                const LocalOptConfig& cfg, double lr_scale = 1.0);

// Validates static configuration invariants; throws std::invalid_argument
// with a description on the first violation.
void validate_local_config(const LocalOptConfig& cfg);

bool is_sm3_kind(LocalKind kind);
// True when the kind keeps a dense per-coordinate second moment that a
// transmitted server preconditioner can be copied into.
bool has_dense_preconditioner(LocalKind kind);

const char* to_string(LocalKind kind);

}  // namespace fedlab
