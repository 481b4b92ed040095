#include "fedlab/cost_ledger.hpp"

#include <algorithm>

namespace fedlab {

const char* to_string(TransmissionMode mode) {
  switch (mode) {
    case TransmissionMode::zero_init: return "zero_init";
    case TransmissionMode::transmit_preconditioner: return "transmit";
    case TransmissionMode::server_only: return "server_only";
    case TransmissionMode::none: return "none";
  }
  return "?";
}

std::uint64_t optimizer_state_floats(LocalKind kind, std::uint64_t d,
                                     std::uint64_t q) {
  switch (kind) {
    case LocalKind::sgd: return 0;
    case LocalKind::agdu: return d;
    case LocalKind::admu: return 2 * d;
    case LocalKind::sm3_i:
    case LocalKind::sm3_ii: return q;
    case LocalKind::sm3_adam: return q + d;
  }
  return 0;
}

RoundCosts CostLedger::record_round(TransmissionMode mode, std::uint64_t d,
                                    std::uint64_t n_clients, LocalKind kind,
                                    std::uint64_t q,
                                    std::uint64_t peak_state_override) {
  RoundCosts rc;
  rc.round = static_cast<std::int64_t>(rounds_.size()) + 1;
  const std::uint64_t down_per_client =
      mode == TransmissionMode::transmit_preconditioner ? 2 * d : d;
  rc.downlink_floats = down_per_client * n_clients;
  rc.uplink_floats = d * n_clients;
  rc.client_state_floats =
      std::max(d + optimizer_state_floats(kind, d, q), peak_state_override);
  cum_bits_ += (rc.downlink_floats + rc.uplink_floats) * 64;
  baseline_bits_ += 2 * d * n_clients * 64;
  rc.cum_bits = cum_bits_;
  rounds_.push_back(rc);
  return rc;
}

CostLedger::Summary CostLedger::summarize() const {
  Summary s;
  for (const auto& rc : rounds_) {
    s.total_downlink += rc.downlink_floats;
    s.total_uplink += rc.uplink_floats;
  }
  s.cum_bits = cum_bits_;
  s.baseline_bits = baseline_bits_;
  s.ratio_to_baseline =
      baseline_bits_ == 0
          ? 0.0
          : static_cast<double>(cum_bits_) / static_cast<double>(baseline_bits_);
  return s;
}

}  // namespace fedlab
