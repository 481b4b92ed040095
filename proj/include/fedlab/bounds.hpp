#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedlab {

// Inputs shared by the analytic bound formulas.  All rates/floors are the
// configured run values; L is the smoothness constant of the objective
// (1 for the synthetic quadratic) and f_gap = f(x0) - f(x*).
struct BoundInputs {
  double eta = 0.0;       // server learning rate
  double eta_l = 0.0;     // client learning rate
  double tau = 1e-3;      // server denominator floor
  double eps = 1e-8;      // client denominator smoothing
  double eps_s = 0.0;     // small-update clip threshold (0 = disabled)
  double beta1_srv = 0.0; // server momentum
  std::int64_t K = 1;     // local steps per round
  std::int64_t z = 1;     // preconditioner update period
  std::int64_t d = 1;     // model dimension
  double G = 1.0;         // coordinatewise gradient clamp
  double v0 = 0.0;        // client second-moment floor
  double v0_srv = 0.0;    // server second-moment init
  std::int64_t T = 1;     // server rounds
  double L = 1.0;         // smoothness constant
  double f_gap = 0.0;     // initial optimality gap
};

// Per-round client-movement bound for the compressed/delayed AdaGrad family:
//   eta_l * ( sqrt(ceil(K/z)) * sqrt(log(1 + ceil(K/z) G^2 / eps^2))
//             + eta_l * (K - ceil(K/z)) * G / (sqrt(v0) + eps) )
// Evaluated exactly as printed (including the second eta_l factor inside the
// parenthesis).  eta_l = 0 gives 0.
double phi1_bound(const BoundInputs& in);

// Cumulative-form client-movement bound for the dense delayed-AdaGrad kind,
// scaled by the pseudo-gradient weight bound B:
//   eta_l * B * ( floor((K-1)/z) + 1 + K G / (sqrt(v0) + eps) )
double phi1_bound_cumulative(const BoundInputs& in, double weight_bound);

// Generic client-movement bound for a blended strategy with declared
// per-step scaling bounds: eta_l * Xi_plus * K(K+1) * A_max * G / (2 m_min).
double phi1_bound_generic(double eta_l, double xi_plus, std::int64_t K,
                          double a_max, double G, double m_min);

// Server step-size bound at round t:
//   min( eta * sqrt((1-b1)(1-b1^(2t))), (eta/tau) * phi1 ).
double phi2_bound(const BoundInputs& in, std::int64_t t, double phi1);

// Momentum-weighted quadratic-series constant:
//   c(b) = sum_{u=0}^{u0} b^u u^2 + 1/u0, with u0 the smallest positive
//   integer such that b^v v^4 < 1 for every v >= u0.  c(0) = 1.
double compute_c_beta(double beta1);

struct BoundReport {
  double phi1 = 0.0;       // scalar client-movement bound
  double phi1_norm = 0.0;  // sqrt(d) * phi1 (broadcast vector norm)
  double phi2 = 0.0;       // server step bound at t = T
  double phi2_norm = 0.0;
  double gamma1 = 0.0;
  double alpha1 = 0.0;
  double c_beta = 0.0;
  double l_tilde = 0.0;    // 2 sqrt(d) G / (eta_l eps_s); requires eps_s > 0
  double psi[6] = {0, 0, 0, 0, 0, 0};
  double rhs = 0.0;        // (psi1+..+psi5)/psi6 when applicable
  bool applicable = false;
  std::string reason;      // why the rhs is undefined, when !applicable
  double observed_min_grad_sq = 0.0;
  double margin = 0.0;     // rhs - observed (NaN when not applicable)
};

// Evaluates the convergence guarantee right-hand side.  Never throws for
// out-of-domain inputs: eps_s = 0, eta = 0, T = 0 etc. yield
// applicable = false with a reason string instead.
BoundReport theorem_rhs(const BoundInputs& in, double observed_min_grad_sq);

// Least-squares slope of log(series[t]) against log(t+1) over the second
// half of the series (t is the 0-based index).  The series must have at
// least 10 entries and positive values in the fitted window; otherwise
// throws std::invalid_argument.
double fit_rate(const std::vector<double>& series);

struct HeavyTailReport {
  double ensemble_mean_final = 0.0;  // mean |x_T - x*| over seeds
  double cap = 0.0;                  // 2 sqrt(3) / (1 - eps_hat)
  double max_excursion = 0.0;        // max |x_t - x*| over rounds and seeds
  double hill_tail_index = 0.0;      // Hill estimate on the |x_T| upper decile
};

// Final-iterate tail diagnostics across an ensemble of scalar trajectories
// (per seed: |x_t - x*| for t = 1..T).  Requires >= 30 seeds.
HeavyTailReport heavy_tail_report(
    const std::vector<std::vector<double>>& abs_trajectories, double eps_hat);

// Brute-force lemma checkers used by the verification suite.  Both return
// the largest violation (positive = violated) over the given instance.
double momentum_series_gap(double beta1, std::int64_t T);
double log_ratio_gap(double beta1, double tau, const std::vector<double>& deltas,
                     double phi1);

}  // namespace fedlab
