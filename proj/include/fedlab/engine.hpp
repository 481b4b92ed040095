#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "fedlab/cost_ledger.hpp"
#include "fedlab/problems.hpp"
#include "fedlab/server_optim.hpp"

namespace fedlab {

// Raised when a client step produces a non-finite gradient or iterate.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a round cannot produce an aggregate (no contributing clients).
struct RoundError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class LrSchedule { constant, harmonic };

// Everything one client needs for a local training session.
struct OptimizerStrategy {
  LocalOptConfig local;
  std::int64_t epochs = 1;           // passes over the local data (K multiplier)
  std::int64_t steps_per_epoch = 1;  // used when the problem has no dataset
  double weight = 1.0;               // multiplies the emitted delta

  // Optional declared scaling bounds for strategies outside the analyzed
  // families: 0 < m_low <= denominator <= m_high, 0 < a_low <= step scale
  // <= a_high.  Enables the generic movement bound.
  struct ScalingBounds {
    double m_low = 1.0, m_high = 1.0, a_low = 1.0, a_high = 1.0;
  };
  std::optional<ScalingBounds> scaling;
};

struct PrivacyConfig {
  double clip = 1.0;   // per-client l2 clip, > 0
  double sigma = 0.0;  // noise multiplier, >= 0
};

struct BoundCheckConfig {
  bool enabled = false;
  double G = 1.0;  // coordinatewise gradient clamp, > 0
};

struct EngineConfig {
  std::uint64_t seed = 0;
  std::size_t n_clients = 0;
  double fraction = 1.0;
  TransmissionMode mode = TransmissionMode::zero_init;
  ServerConfig server;
  OptimizerStrategy strategy;  // default for every client
  std::map<std::size_t, OptimizerStrategy> per_client;  // static overrides
  // Optional per-round assignment; when set it overrides the static maps.
  std::function<OptimizerStrategy(std::size_t client, std::int64_t round)> assign;
  std::optional<PrivacyConfig> privacy;
  std::int64_t warmup_steps = 0;  // linear client-lr ramp over first steps
  LrSchedule schedule = LrSchedule::constant;
  double schedule_margin = 0.05;  // the harmonic schedule's 1/(1-margin) factor
  BoundCheckConfig bound_check;
};

// ceil(fraction * n) distinct ids, uniform without replacement, ascending.
// Deterministic in (seed, round).  n = 0 raises std::invalid_argument.
std::vector<std::size_t> sample_clients(std::size_t n, double fraction,
                                        std::int64_t round, std::uint64_t seed);

struct ClientDelta {
  std::size_t client = 0;
  ParamVector delta;             // weight * (x_end - x_start)
  std::int64_t local_steps = 0;  // 0 means the client was dropped
  double phi1 = 0.0;             // movement bound for this strategy (NaN if none)
  double phi1_margin = 0.0;      // phi1 - ||delta||_inf (NaN if unchecked)
};

struct LocalTrainOptions {
  std::int64_t warmup_steps = 0;
  double lr_override = -1.0;  // absolute client lr; negative = use strategy
  bool clamp = false;         // clamp gradients coordinatewise to [-G, G]
  double G = 1.0;
  std::int64_t round = 0;  // diagnostics only
};

// Runs one client session from x_start and returns the weighted delta.
// State starts from reset(); init_v (when non-null) then seeds the dense
// second moment.  Throws DivergenceError on non-finite gradients/iterates.
ClientDelta local_train(std::size_t client, const ParamVector& x_start,
                        const OptimizerStrategy& strategy,
                        const ParamVector* init_v, Problem& problem,
                        RngStream stream, const LocalTrainOptions& opts);

// Mean of deltas in ascending client order.  Empty input raises RoundError.
ParamVector aggregate(const std::vector<ClientDelta>& deltas);

// Clips each delta to l2 <= clip, averages, then adds Gaussian noise with
// per-coordinate std sigma * clip / n_participants.
ParamVector privatize(const std::vector<ClientDelta>& deltas,
                      const PrivacyConfig& privacy, RngStream& stream);

struct RoundRecord {
  std::int64_t round = 0;
  double train_loss = 0.0;
  double test_loss = 0.0;
  double grad_norm = 0.0;  // l2 norm of the exact objective gradient
  RoundCosts costs;
  double phi1_margin = 0.0;  // min over clients (NaN when unchecked)
  double phi2_margin = 0.0;  // server-step bound margin (NaN when unchecked)
  std::size_t participants = 0;
};

class Engine {
 public:
  // Validates and normalizes the configuration (server_only and none force
  // plain-sgd clients; none forces plain averaging) and evaluates the
  // objective at x0.  The problem reference must outlive the engine.
  Engine(EngineConfig cfg, Problem& problem, ParamVector x0);

  RoundRecord run_round();
  std::vector<RoundRecord> run_experiment(std::int64_t rounds);

  const ServerState& server() const { return server_; }
  const CostLedger& ledger() const { return ledger_; }
  const EngineConfig& config() const { return cfg_; }
  double min_grad_sq() const { return min_grad_sq_; }
  // Strategy a client would run this round, after mode normalization.
  OptimizerStrategy resolve_strategy(std::size_t client, std::int64_t round) const;

 private:
  void refresh_min_grad();
  double strategy_phi1(const OptimizerStrategy& strategy) const;

  EngineConfig cfg_;
  Problem& problem_;
  ServerState server_;
  CostLedger ledger_;
  double min_grad_sq_ = 0.0;
  ParamVector scratch_grad_;
};

}  // namespace fedlab
