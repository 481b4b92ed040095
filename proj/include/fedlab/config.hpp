#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fedlab/bounds.hpp"
#include "fedlab/engine.hpp"

namespace fedlab {

// Thrown by the parser/validator; message holds one line per problem, each
// naming the offending `section.key`.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ProblemConfig {
  std::string kind = "quadratic";  // quadratic | logistic
  // quadratic:
  std::size_t dimension = 1;
  double x0 = 0.0;                          // initial value of every coordinate
  NoiseSpec noise = NoiseSpec::gaussian(1.0);  // default client gradient noise
  std::map<std::size_t, NoiseSpec> noise_overrides;  // client id -> spec
  // logistic (synthetic blobs unless csv paths are given):
  std::size_t classes = 10;
  std::size_t features = 20;
  std::size_t samples = 1000;
  std::size_t test_samples = 200;
  double l2 = 1e-4;
  double partition_alpha = 0.0;  // 0 = even contiguous split
  double center_scale = 3.0;
  std::string csv_path;       // train set from CSV instead of synthetic blobs
  std::string test_csv_path;  // optional held-out CSV
  std::size_t batch = 32;
};

// One client optimizer recipe as written in the config file; covers are
// referenced by policy name and materialized by build_run.
struct StrategyConfig {
  LocalKind kind = LocalKind::admu;
  double eta = 1e-2;
  double epsilon = 1e-1;
  double epsilon_clip = 0.0;
  std::int64_t delay = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double v0 = 0.0;
  std::int64_t epochs = 1;
  std::int64_t steps_per_epoch = 1;  // synthetic-stream problems only
  double weight = 1.0;
  std::string cover = "auto";  // auto | singleton | row_col
  bool has_scaling = false;
  OptimizerStrategy::ScalingBounds scaling{};
  std::vector<std::size_t> clients;  // named strategies only; supports ranges
};

struct ExperimentConfig {
  // [experiment]
  std::string name = "experiment";
  std::vector<std::uint64_t> seeds = {0};
  std::int64_t rounds = 1;
  std::string out = "metrics.csv";

  ProblemConfig problem;
  ServerConfig server;     // file defaults: adam, eta 1e-3, tau 1e-5
  StrategyConfig client;   // default strategy for every client
  // Named [strategy.X] sections in file order, each pinned to a client list.
  std::vector<std::pair<std::string, StrategyConfig>> strategies;

  // [engine]
  std::size_t clients = 1;
  double fraction = 1.0;
  TransmissionMode mode = TransmissionMode::zero_init;
  std::int64_t warmup_steps = 10;
  LrSchedule schedule = LrSchedule::constant;
  double schedule_margin = 0.05;

  // [privacy] — enabled by the section's presence
  bool has_privacy = false;
  PrivacyConfig privacy{};

  // [bounds]
  BoundCheckConfig bound_check{};
};

// Parses and fully validates the documented INI-style grammar
// ([section] headers, `key = value`, `#` comments, comma lists).  Throws
// ConfigError listing every offending key path on failure.
ExperimentConfig parse_config(const std::string& text);

// Reads the file and parses it.  Throws std::runtime_error on I/O failure.
ExperimentConfig load_config(const std::string& path);

// Inverse of parse_config up to formatting: parse(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

// Applies one "section.key" override with a raw value string (sweep cells).
// Throws ConfigError on an unknown path or malformed value.
void apply_override(ExperimentConfig& cfg, const std::string& key_path,
                    const std::string& value);

// A fully materialized single-seed run: the problem instance, the cover
// storage the strategies point into, and the wired engine configuration.
struct RunPlan {
  std::unique_ptr<Problem> problem;
  std::deque<Cover> covers;  // stable addresses for LocalOptConfig::cover
  EngineConfig engine;
  ParamVector x0;
  std::int64_t rounds = 0;
  BoundInputs bounds;  // prefilled with the run's rates/shape for reporting
};

// Instantiates the problem (datasets, partitions) and engine wiring for one
// seed.  Dataset synthesis and partitioning draw from streams derived from
// the seed, so different seeds are independent replicates while identical
// seeds reproduce bit-identically.
RunPlan build_run(const ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace fedlab
