#include "fedlab/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fedlab/bounds.hpp"

namespace fedlab {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Sampler channel: far outside any real client id.
constexpr std::uint64_t kSamplerChannel = ~std::uint64_t{0};
constexpr std::uint64_t kPrivacyChannel = ~std::uint64_t{0} - 1;

std::int64_t harmonic_t0(double eps, double margin) {
  // Smallest positive integer t0 with 1/((1+t0)(1-margin)) < eps.
  const double bound = 1.0 / (eps * (1.0 - margin));
  std::int64_t t0 = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::floor(bound)) - 2);
  while (1.0 / (static_cast<double>(1 + t0) * (1.0 - margin)) >= eps) ++t0;
  return t0;
}

bool all_finite(const ParamVector& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

std::vector<std::size_t> sample_clients(std::size_t n, double fraction,
                                        std::int64_t round, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("cannot sample from zero clients");
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw std::invalid_argument("participation fraction must lie in (0, 1]");
  }
  const std::size_t take = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n)));
  RngStream stream =
      derive_stream(seed, static_cast<std::uint64_t>(round), kSamplerChannel);
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(
                stream.uniform_below(static_cast<std::uint64_t>(n - i)));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(take);
  std::sort(ids.begin(), ids.end());
  return ids;
}

ClientDelta local_train(std::size_t client, const ParamVector& x_start,
                        const OptimizerStrategy& strategy,
                        const ParamVector* init_v, Problem& problem,
                        RngStream stream, const LocalTrainOptions& opts) {
  validate_local_config(strategy.local);
  if (strategy.epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (!(strategy.weight > 0.0) || !std::isfinite(strategy.weight)) {
    throw std::invalid_argument("client weight must be positive and finite");
  }

  ClientDelta out;
  out.client = client;
  out.phi1 = kNaN;
  out.phi1_margin = kNaN;

  const std::size_t per_epoch =
      problem.uses_dataset()
          ? problem.steps_per_epoch(client)
          : static_cast<std::size_t>(
                std::max<std::int64_t>(0, strategy.steps_per_epoch));
  const std::int64_t total_steps =
      strategy.epochs * static_cast<std::int64_t>(per_epoch);
  if (total_steps == 0) {
    // No local data: the client is dropped from the round.
    out.delta.assign(x_start.size(), 0.0);
    return out;
  }

  LocalOptConfig local = strategy.local;
  if (opts.lr_override >= 0.0) local.eta = opts.lr_override;

  ParamVector x = x_start;
  LocalOptState state;
  state.reset(x.size(), local);
  if (init_v != nullptr) {
    if (!has_dense_preconditioner(local.kind)) {
      throw std::invalid_argument(
          "preconditioner transmission requires a dense second moment");
    }
    if (init_v->size() != x.size()) {
      throw std::invalid_argument("transmitted preconditioner dimension mismatch");
    }
    state.v = *init_v;
  }

  ParamVector g;
  for (std::int64_t k = 1; k <= total_steps; ++k) {
    problem.stochastic_gradient(x, client, stream, g);
    if (!all_finite(g)) {
      throw DivergenceError("non-finite gradient at round " +
                            std::to_string(opts.round) + ", client " +
                            std::to_string(client) + ", local step " +
                            std::to_string(k));
    }
    if (opts.clamp) {
      for (double& gj : g) gj = std::clamp(gj, -opts.G, opts.G);
    }
    const double warm = opts.warmup_steps > 0
                            ? std::min(1.0, static_cast<double>(k) /
                                                static_cast<double>(opts.warmup_steps))
                            : 1.0;
    local_step(x, g, state, local, warm);
    if (!all_finite(x)) {
      throw DivergenceError("non-finite iterate at round " +
                            std::to_string(opts.round) + ", client " +
                            std::to_string(client) + ", local step " +
                            std::to_string(k));
    }
  }

  out.local_steps = total_steps;
  out.delta.resize(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    out.delta[j] = strategy.weight * (x[j] - x_start[j]);
  }
  return out;
}

ParamVector aggregate(const std::vector<ClientDelta>& deltas) {
  if (deltas.empty()) {
    throw RoundError("round produced no client updates");
  }
  std::vector<const ClientDelta*> ordered;
  ordered.reserve(deltas.size());
  for (const auto& cd : deltas) ordered.push_back(&cd);
  std::sort(ordered.begin(), ordered.end(),
            [](const ClientDelta* a, const ClientDelta* b) {
              return a->client < b->client;
            });
  ParamVector mean(ordered.front()->delta.size(), 0.0);
  for (const ClientDelta* cd : ordered) {
    if (cd->delta.size() != mean.size()) {
      throw std::invalid_argument("client delta dimension mismatch");
    }
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += cd->delta[j];
  }
  const double inv = 1.0 / static_cast<double>(ordered.size());
  for (double& mj : mean) mj *= inv;
  return mean;
}

ParamVector privatize(const std::vector<ClientDelta>& deltas,
                      const PrivacyConfig& privacy, RngStream& stream) {
  if (!(privacy.clip > 0.0)) {
    throw std::invalid_argument("privacy clip must be positive");
  }
  if (privacy.sigma < 0.0) {
    throw std::invalid_argument("privacy sigma must be non-negative");
  }
  std::vector<ClientDelta> clipped = deltas;
  for (auto& cd : clipped) {
    const double n = l2_norm(cd.delta);
    if (n > privacy.clip) {
      const double scale = privacy.clip / n;
      for (double& dj : cd.delta) dj *= scale;
    }
  }
  ParamVector mean = aggregate(clipped);
  const double stddev =
      privacy.sigma * privacy.clip / static_cast<double>(clipped.size());
  if (stddev > 0.0) {
    for (double& mj : mean) mj += stddev * stream.normal();
  }
  return mean;
}

Engine::Engine(EngineConfig cfg, Problem& problem, ParamVector x0)
    : cfg_(std::move(cfg)), problem_(problem) {
  if (cfg_.n_clients == 0) {
    throw std::invalid_argument("engine needs at least one client");
  }
  if (cfg_.n_clients != problem_.n_clients()) {
    throw std::invalid_argument("engine client count does not match problem");
  }
  if (x0.size() != problem_.dim()) {
    throw std::invalid_argument("initial point dimension does not match problem");
  }
  validate_server_config(cfg_.server);
  if (cfg_.bound_check.enabled && !(cfg_.bound_check.G > 0.0)) {
    throw std::invalid_argument("gradient clamp G must be positive");
  }

  // Mode normalization: adaptivity placement is the mode's meaning.
  auto normalize = [&](OptimizerStrategy& s) {
    if (cfg_.mode == TransmissionMode::server_only ||
        cfg_.mode == TransmissionMode::none) {
      s.local.kind = LocalKind::sgd;
    }
  };
  normalize(cfg_.strategy);
  for (auto& [id, s] : cfg_.per_client) {
    if (id >= cfg_.n_clients) {
      throw std::invalid_argument("strategy override for unknown client " +
                                  std::to_string(id));
    }
    normalize(s);
  }
  if (cfg_.mode == TransmissionMode::none) {
    cfg_.server.kind = ServerKind::avg;
  }

  auto check = [&](const OptimizerStrategy& s) {
    validate_local_config(s.local);
    if (cfg_.mode == TransmissionMode::transmit_preconditioner &&
        !has_dense_preconditioner(s.local.kind)) {
      throw std::invalid_argument(
          "transmit_preconditioner requires a client kind with a dense "
          "second moment (got " +
          std::string(to_string(s.local.kind)) + ")");
    }
    if (is_sm3_kind(s.local.kind) && s.local.cover != nullptr &&
        s.local.cover->dim != problem_.dim()) {
      throw std::invalid_argument("cover dimension does not match problem");
    }
  };
  check(cfg_.strategy);
  for (const auto& [id, s] : cfg_.per_client) check(s);

  init_server_state(server_, x0, cfg_.server);
  min_grad_sq_ = std::numeric_limits<double>::infinity();
  refresh_min_grad();
}

OptimizerStrategy Engine::resolve_strategy(std::size_t client,
                                           std::int64_t round) const {
  if (cfg_.assign) {
    OptimizerStrategy s = cfg_.assign(client, round);
    if (cfg_.mode == TransmissionMode::server_only ||
        cfg_.mode == TransmissionMode::none) {
      s.local.kind = LocalKind::sgd;
    }
    return s;
  }
  auto it = cfg_.per_client.find(client);
  return it != cfg_.per_client.end() ? it->second : cfg_.strategy;
}

double Engine::strategy_phi1(const OptimizerStrategy& strategy) const {
  if (!cfg_.bound_check.enabled) return kNaN;
  BoundInputs in;
  in.eta_l = strategy.local.eta;
  in.eps = strategy.local.epsilon;
  in.eps_s = strategy.local.epsilon_clip;
  in.K = strategy.epochs * std::max<std::int64_t>(1, strategy.steps_per_epoch);
  in.z = strategy.local.delay;
  in.G = cfg_.bound_check.G;
  in.v0 = strategy.local.v0;
  switch (strategy.local.kind) {
    case LocalKind::sm3_i:
    case LocalKind::sm3_ii:
    case LocalKind::sm3_adam:
      return phi1_bound(in);
    case LocalKind::agdu:
      return phi1_bound_cumulative(in, strategy.weight);
    default:
      if (strategy.scaling) {
        return phi1_bound_generic(strategy.local.eta, strategy.weight, in.K,
                                  strategy.scaling->a_high, cfg_.bound_check.G,
                                  strategy.scaling->m_low);
      }
      return kNaN;
  }
}

void Engine::refresh_min_grad() {
  problem_.full_gradient(server_.x, scratch_grad_);
  const double n = l2_norm(scratch_grad_);
  min_grad_sq_ = std::min(min_grad_sq_, n * n);
}

RoundRecord Engine::run_round() {
  const std::int64_t round = server_.t + 1;
  const std::vector<std::size_t> sampled =
      sample_clients(cfg_.n_clients, cfg_.fraction, round, cfg_.seed);

  // Round-level client lr (absolute) for the harmonic schedule.
  double lr_override = -1.0;
  if (cfg_.schedule == LrSchedule::harmonic) {
    const std::int64_t t0 = harmonic_t0(cfg_.strategy.local.epsilon,
                                        cfg_.schedule_margin);
    lr_override = 1.0 / (static_cast<double>(round + t0) *
                         (1.0 - cfg_.schedule_margin));
  }

  const ParamVector x_start = server_.x;
  std::vector<ClientDelta> contributions;
  contributions.reserve(sampled.size());
  double min_phi1_margin = kNaN;
  double round_phi1 = kNaN;
  std::uint64_t peak_state_floats = 0;

  for (std::size_t client : sampled) {
    const OptimizerStrategy strategy = resolve_strategy(client, round);
    LocalTrainOptions opts;
    opts.warmup_steps = cfg_.warmup_steps;
    opts.lr_override = lr_override;
    opts.clamp = cfg_.bound_check.enabled;
    opts.G = cfg_.bound_check.G;
    opts.round = round;

    const ParamVector* init_v = nullptr;
    if (cfg_.mode == TransmissionMode::transmit_preconditioner) {
      init_v = &server_.v;
    }
    RngStream stream = derive_stream(cfg_.seed, static_cast<std::uint64_t>(round),
                                     static_cast<std::uint64_t>(client));
    ClientDelta cd = local_train(client, x_start, strategy, init_v, problem_,
                                 stream, opts);

    const std::uint64_t q =
        strategy.local.cover != nullptr ? strategy.local.cover->groups.size() : 0;
    peak_state_floats = std::max(
        peak_state_floats,
        static_cast<std::uint64_t>(problem_.dim()) +
            optimizer_state_floats(strategy.local.kind, problem_.dim(), q));

    if (cd.local_steps == 0) continue;  // dropped: no local data

    if (cfg_.bound_check.enabled) {
      cd.phi1 = strategy_phi1(strategy);
      if (std::isfinite(cd.phi1)) {
        cd.phi1_margin = cd.phi1 - linf_norm(cd.delta);
        if (std::isnan(min_phi1_margin) || cd.phi1_margin < min_phi1_margin) {
          min_phi1_margin = cd.phi1_margin;
        }
        if (std::isnan(round_phi1) || cd.phi1 > round_phi1) round_phi1 = cd.phi1;
      }
    }
    contributions.push_back(std::move(cd));
  }

  if (contributions.empty()) {
    throw RoundError("round " + std::to_string(round) +
                     ": every sampled client was dropped");
  }

  ParamVector agg;
  if (cfg_.privacy) {
    RngStream noise = derive_stream(cfg_.seed, static_cast<std::uint64_t>(round),
                                    kPrivacyChannel);
    agg = privatize(contributions, *cfg_.privacy, noise);
  } else {
    agg = aggregate(contributions);
  }

  server_update(server_, agg, cfg_.server);
  if (!all_finite(server_.x)) {
    throw DivergenceError("non-finite server iterate after round " +
                          std::to_string(round));
  }

  RoundRecord rec;
  rec.round = round;
  rec.participants = contributions.size();
  rec.train_loss = problem_.train_loss(server_.x);
  rec.test_loss = problem_.test_loss(server_.x);
  problem_.full_gradient(server_.x, scratch_grad_);
  rec.grad_norm = l2_norm(scratch_grad_);
  min_grad_sq_ = std::min(min_grad_sq_, rec.grad_norm * rec.grad_norm);

  rec.phi1_margin = min_phi1_margin;
  rec.phi2_margin = kNaN;
  if (cfg_.bound_check.enabled && std::isfinite(round_phi1)) {
    BoundInputs in;
    in.eta = cfg_.server.eta;
    in.tau = cfg_.server.tau;
    in.beta1_srv = cfg_.server.beta1;
    double step_inf = 0.0;
    for (std::size_t j = 0; j < server_.x.size(); ++j) {
      step_inf = std::max(step_inf, std::fabs(server_.x[j] - x_start[j]));
    }
    rec.phi2_margin = phi2_bound(in, round, round_phi1) - step_inf;
  }

  // Cost accounting: blended rounds record the peak per-client footprint.
  const OptimizerStrategy& base = cfg_.strategy;
  const std::uint64_t base_q =
      base.local.cover != nullptr ? base.local.cover->groups.size() : 0;
  rec.costs =
      ledger_.record_round(cfg_.mode, problem_.dim(), sampled.size(),
                           base.local.kind, base_q, peak_state_floats);

  return rec;
}

std::vector<RoundRecord> Engine::run_experiment(std::int64_t rounds) {
  if (rounds < 0) throw std::invalid_argument("round count must be non-negative");
  std::vector<RoundRecord> records;
  records.reserve(static_cast<std::size_t>(rounds));
  for (std::int64_t t = 0; t < rounds; ++t) records.push_back(run_round());
  return records;
}

}  // namespace fedlab
