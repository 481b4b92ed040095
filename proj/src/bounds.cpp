#include "fedlab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fedlab {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double ceil_div(std::int64_t a, std::int64_t b) {
  return static_cast<double>((a + b - 1) / b);
}

}  // namespace

double phi1_bound(const BoundInputs& in) {
  if (in.eta_l == 0.0) return 0.0;
  if (in.K < 1 || in.z < 1) throw std::invalid_argument("phi1 needs K >= 1, z >= 1");
  if (!(in.eps > 0.0)) throw std::invalid_argument("phi1 needs eps > 0");
  const double updates = ceil_div(in.K, in.z);  // ceil(K/z)
  const double log_term =
      std::log(1.0 + updates * in.G * in.G / (in.eps * in.eps));
  const double held_steps = static_cast<double>(in.K) - updates;
  return in.eta_l * (std::sqrt(updates) * std::sqrt(log_term) +
                     in.eta_l * held_steps * in.G /
                         (std::sqrt(in.v0) + in.eps));
}

double phi1_bound_cumulative(const BoundInputs& in, double weight_bound) {
  if (in.eta_l == 0.0) return 0.0;
  if (in.K < 1 || in.z < 1) throw std::invalid_argument("phi1 needs K >= 1, z >= 1");
  if (!(in.eps > 0.0)) throw std::invalid_argument("phi1 needs eps > 0");
  const double updates = static_cast<double>((in.K - 1) / in.z + 1);
  return in.eta_l * weight_bound *
         (updates + static_cast<double>(in.K) * in.G /
                        (std::sqrt(in.v0) + in.eps));
}

double phi1_bound_generic(double eta_l, double xi_plus, std::int64_t K,
                          double a_max, double G, double m_min) {
  if (!(m_min > 0.0)) throw std::invalid_argument("generic phi1 needs m_min > 0");
  const double k = static_cast<double>(K);
  return eta_l * xi_plus * k * (k + 1.0) * a_max * G / (2.0 * m_min);
}

double phi2_bound(const BoundInputs& in, std::int64_t t, double phi1) {
  const double b = in.beta1_srv;
  const double first =
      in.eta * std::sqrt((1.0 - b) * (1.0 - std::pow(b, 2.0 * static_cast<double>(t))));
  const double second = in.eta / in.tau * phi1;
  return std::min(first, second);
}

double compute_c_beta(double beta1) {
  if (beta1 < 0.0 || beta1 >= 1.0) {
    throw std::invalid_argument("c(beta) requires beta in [0, 1)");
  }
  if (beta1 == 0.0) return 1.0;  // u0 = 1, empty weighted sum

  // u0 is one past the last integer v with beta^v v^4 >= 1, i.e. with
  // h(v) = v log(beta) + 4 log(v) >= 0.  h increases up to v* = -4/log(beta)
  // and decreases afterwards.
  const double log_b = std::log(beta1);
  auto h = [&](double v) { return v * log_b + 4.0 * std::log(v); };
  const double v_star = -4.0 / log_b;
  std::int64_t u0 = 1;
  const std::int64_t peak = std::max<std::int64_t>(1, static_cast<std::int64_t>(v_star));
  const double h_peak = std::max(h(static_cast<double>(peak)),
                                 h(static_cast<double>(peak + 1)));
  if (h_peak >= 0.0) {
    // Find an upper bracket past the downward crossing, then bisect.
    std::int64_t lo = peak + 1;       // may still satisfy h >= 0
    if (h(static_cast<double>(lo)) < 0.0) lo = peak;
    std::int64_t hi = std::max<std::int64_t>(lo * 2, lo + 4);
    while (h(static_cast<double>(hi)) >= 0.0) hi *= 2;
    while (hi - lo > 1) {
      const std::int64_t mid = lo + (hi - lo) / 2;
      if (h(static_cast<double>(mid)) >= 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    u0 = lo + 1;  // lo = last v with beta^v v^4 >= 1
  }

  // sum_{u=0}^{u0} beta^u u^2 in closed form: the full series
  // beta(1+beta)/(1-beta)^3 minus its tail from m = u0+1.
  const double x = beta1;
  const double one_minus = 1.0 - x;
  const double full = x * (1.0 + x) / (one_minus * one_minus * one_minus);
  const double m = static_cast<double>(u0) + 1.0;
  const double xm = std::pow(x, m);
  const double tail =
      xm * (m * m - (2.0 * m * m - 2.0 * m - 1.0) * x + (m - 1.0) * (m - 1.0) * x * x) /
      (one_minus * one_minus * one_minus);
  const double weighted_sum = full - tail;
  return weighted_sum + 1.0 / static_cast<double>(u0);
}

BoundReport theorem_rhs(const BoundInputs& in, double observed_min_grad_sq) {
  BoundReport rep;
  rep.observed_min_grad_sq = observed_min_grad_sq;
  rep.margin = kNaN;
  rep.rhs = kNaN;

  rep.phi1 = phi1_bound(in);
  const double sqrt_d = std::sqrt(static_cast<double>(in.d));
  rep.phi1_norm = sqrt_d * rep.phi1;
  rep.phi2 = phi2_bound(in, in.T, rep.phi1);
  rep.phi2_norm = sqrt_d * rep.phi2;
  rep.c_beta = compute_c_beta(in.beta1_srv);

  const double dKG2 = static_cast<double>(in.d) * static_cast<double>(in.K) *
                      in.G * in.G;
  rep.gamma1 = in.eta_l * static_cast<double>(in.K) /
               (std::sqrt(in.v0 + dKG2) + in.eps);
  rep.alpha1 = 1.0 / (2.0 * std::sqrt(in.v0 + dKG2) + 2.0 * in.eps);

  if (!(in.eps_s > 0.0)) {
    rep.l_tilde = kNaN;
    rep.applicable = false;
    rep.reason = "eps_clip is zero: the local smoothness surrogate is undefined";
    return rep;
  }
  rep.l_tilde = 2.0 * sqrt_d * in.G / (in.eta_l * in.eps_s);

  if (!(in.eta > 0.0) || !(in.eta_l > 0.0)) {
    rep.applicable = false;
    rep.reason = "learning rates must be positive for the guarantee";
    return rep;
  }
  if (in.T < 1) {
    rep.applicable = false;
    rep.reason = "needs at least one round";
    return rep;
  }
  if (in.beta1_srv >= 1.0) {
    rep.applicable = false;
    rep.reason = "server momentum must be below 1";
    return rep;
  }

  const double T = static_cast<double>(in.T);
  const double d = static_cast<double>(in.d);
  const double K = static_cast<double>(in.K);
  const double b1 = in.beta1_srv;
  const double phi1n_sq = rep.phi1_norm * rep.phi1_norm;
  const double phi2n_sq = rep.phi2_norm * rep.phi2_norm;
  const double sm_denom = std::sqrt(in.v0) + in.eps;

  rep.psi[0] = in.f_gap;
  rep.psi[1] = in.eta * in.eta * in.L * T * d * phi1n_sq / (in.tau * in.tau);
  rep.psi[2] = (1.0 - std::pow(b1, T)) * in.eta * in.eta_l * K * rep.l_tilde *
               T * phi1n_sq / (rep.alpha1 * in.tau * sm_denom * sm_denom);
  rep.psi[3] = (1.0 - b1) * in.eta * in.eta_l * K * in.L * T * rep.c_beta *
               phi2n_sq / (rep.alpha1 * in.tau * sm_denom * sm_denom);
  rep.psi[4] = in.eta * d * rep.phi1_norm * in.G *
               (1.0 - b1 + std::log(1.0 + T * phi1n_sq / (in.tau * in.tau))) /
               in.tau;
  rep.psi[5] = 3.0 * (1.0 - b1) * in.eta * rep.gamma1 * T /
               (4.0 * (std::sqrt(T * phi1n_sq + in.v0_srv) + in.tau));

  if (!(rep.psi[5] > 0.0)) {
    rep.applicable = false;
    rep.reason = "denominator term is not positive";
    return rep;
  }
  rep.rhs =
      (rep.psi[0] + rep.psi[1] + rep.psi[2] + rep.psi[3] + rep.psi[4]) / rep.psi[5];
  rep.applicable = true;
  if (std::isfinite(observed_min_grad_sq)) {
    rep.margin = rep.rhs - observed_min_grad_sq;
  }
  return rep;
}

double fit_rate(const std::vector<double>& series) {
  if (series.size() < 10) {
    throw std::invalid_argument("rate fit needs at least 10 points");
  }
  const std::size_t n = series.size();
  const std::size_t start = n / 2;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  std::size_t count = 0;
  for (std::size_t t = start; t < n; ++t) {
    if (!(series[t] > 0.0)) {
      throw std::invalid_argument(
          "rate fit needs positive values in the fitted window");
    }
    const double lx = std::log(static_cast<double>(t + 1));
    const double ly = std::log(series[t]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++count;
  }
  const double c = static_cast<double>(count);
  const double denom = c * sxx - sx * sx;
  if (!(std::fabs(denom) > 0.0)) {
    throw std::invalid_argument("rate fit window is degenerate");
  }
  return (c * sxy - sx * sy) / denom;
}

HeavyTailReport heavy_tail_report(
    const std::vector<std::vector<double>>& abs_trajectories, double eps_hat) {
  if (abs_trajectories.size() < 30) {
    throw std::invalid_argument("heavy-tail report needs at least 30 seeds");
  }
  if (!(eps_hat >= 0.0 && eps_hat < 1.0)) {
    throw std::invalid_argument("eps_hat must lie in [0, 1)");
  }
  HeavyTailReport rep;
  rep.cap = 2.0 * std::sqrt(3.0) / (1.0 - eps_hat);
  std::vector<double> finals;
  finals.reserve(abs_trajectories.size());
  double sum_final = 0.0;
  for (const auto& traj : abs_trajectories) {
    if (traj.empty()) {
      throw std::invalid_argument("heavy-tail trajectories must be non-empty");
    }
    for (double v : traj) rep.max_excursion = std::max(rep.max_excursion, v);
    finals.push_back(traj.back());
    sum_final += traj.back();
  }
  rep.ensemble_mean_final = sum_final / static_cast<double>(finals.size());

  // Hill tail-index estimate over the upper decile of final values.
  std::sort(finals.begin(), finals.end(), std::greater<double>());
  const std::size_t k = std::max<std::size_t>(2, finals.size() / 10);
  const double pivot = std::max(finals[k], 1e-300);
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    acc += std::log(std::max(finals[i], 1e-300) / pivot);
  }
  rep.hill_tail_index = acc > 0.0 ? static_cast<double>(k) / acc
                                  : std::numeric_limits<double>::infinity();
  return rep;
}

double momentum_series_gap(double beta1, std::int64_t T) {
  double lhs = 0.0;
  for (std::int64_t t = 1; t <= T; ++t) {
    for (std::int64_t r = 1; r <= t; ++r) {
      lhs += std::pow(beta1, static_cast<double>(t - r)) *
             static_cast<double>((t - r) * (t - r));
    }
  }
  const double rhs = compute_c_beta(beta1) * static_cast<double>(T);
  return lhs - rhs;
}

double log_ratio_gap(double beta1, double tau, const std::vector<double>& deltas,
                     double phi1) {
  const std::int64_t T = static_cast<std::int64_t>(deltas.size());
  double lhs = 0.0;
  std::vector<double> prefix_sq(deltas.size() + 1, 0.0);
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    prefix_sq[i + 1] = prefix_sq[i] + deltas[i] * deltas[i];
  }
  for (std::int64_t t = 1; t <= T; ++t) {
    const double ratio = deltas[t - 1] * deltas[t - 1] /
                         (prefix_sq[t] + tau * tau);
    for (std::int64_t r = 1; r <= t; ++r) {
      lhs += std::pow(beta1, static_cast<double>(t - r)) * ratio;
    }
  }
  lhs *= (1.0 - beta1);
  const double rhs =
      1.0 - beta1 +
      std::log(1.0 + static_cast<double>(T) * phi1 * phi1 / (tau * tau));
  return lhs - rhs;
}

}  // namespace fedlab
