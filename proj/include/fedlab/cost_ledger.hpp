#pragma once

#include <cstdint>
#include <vector>

#include "fedlab/local_optim.hpp"

namespace fedlab {

enum class TransmissionMode { zero_init, transmit_preconditioner, server_only, none };

const char* to_string(TransmissionMode mode);

// Idealized per-round accounting of communication and client memory, in
// float64 units.  Communication counts model payloads only; optimizer state
// contributes to client memory, not traffic, except when the server
// preconditioner is explicitly transmitted (one extra model-sized payload
// down).
struct RoundCosts {
  std::int64_t round = 0;
  std::uint64_t downlink_floats = 0;      // totals over sampled clients
  std::uint64_t uplink_floats = 0;
  std::uint64_t client_state_floats = 0;  // peak per client: model + optimizer state
  std::uint64_t cum_bits = 0;             // cumulative traffic, floats * 64
};

// Optimizer-state floats per client for a model of dimension d:
//   sgd 0, agdu d, admu 2d, sm3_i/sm3_ii q, sm3_adam q + d.
std::uint64_t optimizer_state_floats(LocalKind kind, std::uint64_t d,
                                     std::uint64_t q);

class CostLedger {
 public:
  // Records one round with n_clients sampled participants, all running the
  // given client kind (q = cover group count, ignored by dense kinds).
  // Blended rounds pass the largest per-client footprint through
  // peak_state_override; the stored value is the max of both accountings.
  RoundCosts record_round(TransmissionMode mode, std::uint64_t d,
                          std::uint64_t n_clients, LocalKind kind,
                          std::uint64_t q,
                          std::uint64_t peak_state_override = 0);

  const std::vector<RoundCosts>& rounds() const { return rounds_; }

  struct Summary {
    std::uint64_t total_downlink = 0;
    std::uint64_t total_uplink = 0;
    std::uint64_t cum_bits = 0;
    std::uint64_t baseline_bits = 0;  // plain-averaging traffic, same sampling
    double ratio_to_baseline = 0.0;   // cum_bits / baseline_bits
  };
  Summary summarize() const;

 private:
  std::vector<RoundCosts> rounds_;
  std::uint64_t cum_bits_ = 0;
  std::uint64_t baseline_bits_ = 0;
};

}  // namespace fedlab
