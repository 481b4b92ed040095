#include "fedlab/local_optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedlab {

double l2_norm(const ParamVector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double linf_norm(const ParamVector& v) {
  double s = 0.0;
  for (double x : v) s = std::max(s, std::fabs(x));
  return s;
}

void LocalOptState::reset(std::size_t dim, const LocalOptConfig& cfg) {
  k = 0;
  m.assign(dim, 0.0);
  v.assign(dim, cfg.v0);
  vhat.assign(dim, 0.0);
  if (is_sm3_kind(cfg.kind)) {
    if (cfg.cover == nullptr) {
      throw std::invalid_argument("sm3 optimizer kinds require a cover");
    }
    mu.assign(cfg.cover->groups.size(), cfg.v0);
    mu_scratch_.assign(cfg.cover->groups.size(), 0.0);
  } else {
    mu.clear();
    mu_scratch_.clear();
  }
  update_.assign(dim, 0.0);
}

void apply_epsilon_clip(ParamVector& u, double eps_clip) {
  if (eps_clip <= 0.0) return;
  const double n = l2_norm(u);
  if (n > 0.0 && n < eps_clip) {
    for (double& x : u) x = 0.0;
  }
}

namespace {

bool is_update_step(std::int64_t k, std::int64_t z) { return (k - 1) % z == 0; }

// Debias exponent for the delayed second moment: grows once per delay block.
std::int64_t block_index(std::int64_t k, std::int64_t z) {
  return (k - 1) / z + 1;
}

double min_group_value(const Cover& cover, const std::vector<double>& mu,
                       std::size_t j) {
  const auto& owners = cover.covering[j];
  double best = mu[owners.front()];
  for (std::size_t i = 1; i < owners.size(); ++i) {
    best = std::min(best, mu[owners[i]]);
  }
  return best;
}

// Rebuilds the compressed second moment at an update step.
//   cumulative (beta2 == 0): v(j) <- min_b mu_prev(b) + g(j)^2
//   ema        (beta2  > 0): v(j) <- beta2 * min_b mu_prev(b) + (1-beta2) g(j)^2
// then mu(b) <- max_{j in b} v(j), rebuilt from zero.  The minima always read
// the previous step's mu, never the partially rebuilt one.
void sm3_ii_rebuild(const Cover& cover, const ParamVector& g, double beta2,
                    std::vector<double>& mu, std::vector<double>& mu_next,
                    ParamVector& v) {
  mu_next.assign(mu.size(), 0.0);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double prior = min_group_value(cover, mu, j);
    const double vj = beta2 > 0.0 ? beta2 * prior + (1.0 - beta2) * g[j] * g[j]
                                  : prior + g[j] * g[j];
    v[j] = vj;
    for (std::uint32_t b : cover.covering[j]) {
      mu_next[b] = std::max(mu_next[b], vj);
    }
  }
  mu.swap(mu_next);
}

void sm3_i_accumulate(const Cover& cover, const ParamVector& g,
                      std::vector<double>& mu, ParamVector& v) {
  for (std::size_t b = 0; b < cover.groups.size(); ++b) {
    double peak = 0.0;
    for (std::uint32_t j : cover.groups[b]) {
      peak = std::max(peak, g[j] * g[j]);
    }
    mu[b] += peak;
  }
  for (std::size_t j = 0; j < g.size(); ++j) {
    v[j] = min_group_value(cover, mu, j);
  }
}

}  // namespace

void validate_local_config(const LocalOptConfig& cfg) {
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("client eta must be positive");
  if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("client epsilon must be positive");
  if (cfg.epsilon_clip < 0.0) throw std::invalid_argument("epsilon_clip must be non-negative");
  if (cfg.delay < 1) throw std::invalid_argument("delay must be at least 1");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0) throw std::invalid_argument("beta1 must lie in [0, 1)");
  if (cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) throw std::invalid_argument("beta2 must lie in [0, 1)");
  if (cfg.v0 < 0.0) throw std::invalid_argument("v0 must be non-negative");
  if (is_sm3_kind(cfg.kind) && cfg.cover == nullptr) {
    throw std::invalid_argument("sm3 optimizer kinds require a cover");
  }
}

void local_step(ParamVector& x, const ParamVector& g, LocalOptState& state,
                const LocalOptConfig& cfg, double lr_scale) {
  const std::size_t d = x.size();
  if (g.size() != d) {
    throw std::invalid_argument("gradient dimension " + std::to_string(g.size()) +
                                " does not match iterate dimension " +
                                std::to_string(d));
  }
  if (state.v.size() != d && cfg.kind != LocalKind::sgd) {
    throw std::invalid_argument("optimizer state not reset for dimension " +
                                std::to_string(d));
  }
  if (is_sm3_kind(cfg.kind)) {
    if (cfg.cover == nullptr) throw std::invalid_argument("sm3 optimizer kinds require a cover");
    if (cfg.cover->dim != d) {
      throw std::invalid_argument("cover dimension " + std::to_string(cfg.cover->dim) +
                                  " does not match iterate dimension " + std::to_string(d));
    }
  }

  const std::int64_t k = state.k + 1;
  const bool update = is_update_step(k, cfg.delay);
  ParamVector& u = state.update_;
  if (u.size() != d) u.assign(d, 0.0);

  switch (cfg.kind) {
    case LocalKind::sgd:
      for (std::size_t j = 0; j < d; ++j) u[j] = g[j];
      break;

    case LocalKind::agdu: {
      if (update) {
        for (std::size_t j = 0; j < d; ++j) state.v[j] += g[j] * g[j];
      }
      for (std::size_t j = 0; j < d; ++j) {
        u[j] = g[j] / (std::sqrt(state.v[j]) + cfg.epsilon);
      }
      break;
    }

    case LocalKind::admu: {
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(k));
      for (std::size_t j = 0; j < d; ++j) {
        state.m[j] = cfg.beta1 * state.m[j] + (1.0 - cfg.beta1) * g[j];
      }
      if (update) {
        const double bc2 =
            1.0 - std::pow(cfg.beta2, static_cast<double>(block_index(k, cfg.delay)));
        for (std::size_t j = 0; j < d; ++j) {
          state.v[j] = cfg.beta2 * state.v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
          state.vhat[j] = state.v[j] / bc2;
        }
      }
      for (std::size_t j = 0; j < d; ++j) {
        u[j] = (state.m[j] / bc1) / (std::sqrt(state.vhat[j]) + cfg.epsilon);
      }
      break;
    }

    case LocalKind::sm3_i: {
      if (update) sm3_i_accumulate(*cfg.cover, g, state.mu, state.v);
      for (std::size_t j = 0; j < d; ++j) {
        u[j] = g[j] / (std::sqrt(state.v[j]) + cfg.epsilon);
      }
      break;
    }

    case LocalKind::sm3_ii: {
      if (update) {
        sm3_ii_rebuild(*cfg.cover, g, /*beta2=*/0.0, state.mu,
                       state.mu_scratch_, state.v);
      }
      for (std::size_t j = 0; j < d; ++j) {
        u[j] = g[j] / (std::sqrt(state.v[j]) + cfg.epsilon);
      }
      break;
    }

    case LocalKind::sm3_adam: {
      const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(k));
      for (std::size_t j = 0; j < d; ++j) {
        state.m[j] = cfg.beta1 * state.m[j] + (1.0 - cfg.beta1) * g[j];
      }
      if (update) {
        sm3_ii_rebuild(*cfg.cover, g, cfg.beta2, state.mu, state.mu_scratch_,
                       state.v);
        if (cfg.beta2 > 0.0) {
          const double bc2 =
              1.0 - std::pow(cfg.beta2, static_cast<double>(block_index(k, cfg.delay)));
          for (std::size_t j = 0; j < d; ++j) state.vhat[j] = state.v[j] / bc2;
        } else {
          state.vhat = state.v;
        }
      }
      for (std::size_t j = 0; j < d; ++j) {
        u[j] = (state.m[j] / bc1) / (std::sqrt(state.vhat[j]) + cfg.epsilon);
      }
      break;
    }
  }

  apply_epsilon_clip(u, cfg.epsilon_clip);
  const double step = cfg.eta * lr_scale;
  for (std::size_t j = 0; j < d; ++j) x[j] -= step * u[j];
  state.k = k;
}

bool is_sm3_kind(LocalKind kind) {
  return kind == LocalKind::sm3_i || kind == LocalKind::sm3_ii ||
         kind == LocalKind::sm3_adam;
}

bool has_dense_preconditioner(LocalKind kind) {
  return kind == LocalKind::agdu || kind == LocalKind::admu;
}

const char* to_string(LocalKind kind) {
  switch (kind) {
    case LocalKind::sgd: return "sgd";
    case LocalKind::agdu: return "agdu";
    case LocalKind::admu: return "admu";
    case LocalKind::sm3_i: return "sm3_i";
    case LocalKind::sm3_ii: return "sm3_ii";
    case LocalKind::sm3_adam: return "sm3_adam";
  }
  return "?";
}

}  // namespace fedlab
