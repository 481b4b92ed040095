#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "fedlab/cost_ledger.hpp"

using namespace fedlab;

TEST_CASE("optimizer state sizes per kind") {
  const std::uint64_t d = 100, q = 7;
  CHECK(optimizer_state_floats(LocalKind::sgd, d, q) == 0);
  CHECK(optimizer_state_floats(LocalKind::agdu, d, q) == d);
  CHECK(optimizer_state_floats(LocalKind::admu, d, q) == 2 * d);
  CHECK(optimizer_state_floats(LocalKind::sm3_i, d, q) == q);
  CHECK(optimizer_state_floats(LocalKind::sm3_ii, d, q) == q);
  CHECK(optimizer_state_floats(LocalKind::sm3_adam, d, q) == q + d);
}

TEST_CASE("fresh-state rounds move one model down and one model up per client") {
  CostLedger ledger;
  const RoundCosts rc =
      ledger.record_round(TransmissionMode::zero_init, 10, 3, LocalKind::agdu, 0);
  CHECK(rc.round == 1);
  CHECK(rc.downlink_floats == 30);
  CHECK(rc.uplink_floats == 30);
  CHECK(rc.client_state_floats == 20);  // model + dense second moment
  CHECK(rc.cum_bits == 60 * 64);
}

TEST_CASE("transmitting the preconditioner doubles the downlink") {
  CostLedger ledger;
  const RoundCosts rc = ledger.record_round(
      TransmissionMode::transmit_preconditioner, 10, 3, LocalKind::agdu, 0);
  CHECK(rc.downlink_floats == 60);
  CHECK(rc.uplink_floats == 30);
  CHECK(rc.cum_bits == 90 * 64);
}

TEST_CASE("traffic ratios against the plain-averaging baseline are exact") {
  CostLedger fresh;
  for (int t = 0; t < 5; ++t) {
    fresh.record_round(TransmissionMode::zero_init, 64, 8, LocalKind::agdu, 0);
  }
  CHECK(fresh.summarize().ratio_to_baseline == 1.0);

  CostLedger transmit;
  for (int t = 0; t < 5; ++t) {
    transmit.record_round(TransmissionMode::transmit_preconditioner, 64, 8,
                          LocalKind::admu, 0);
  }
  CHECK(transmit.summarize().ratio_to_baseline == 1.5);

  CostLedger plain;
  for (int t = 0; t < 5; ++t) {
    plain.record_round(TransmissionMode::none, 64, 8, LocalKind::sgd, 0);
  }
  CHECK(plain.summarize().ratio_to_baseline == 1.0);

  CostLedger server_only;
  for (int t = 0; t < 5; ++t) {
    server_only.record_round(TransmissionMode::server_only, 64, 8, LocalKind::sgd, 0);
  }
  CHECK(server_only.summarize().ratio_to_baseline == 1.0);
}

TEST_CASE("compressed state for a large square layer stays tiny") {
  CostLedger ledger;
  const std::uint64_t d = 768 * 768;
  const std::uint64_t q = 768 + 768;
  const RoundCosts rc =
      ledger.record_round(TransmissionMode::zero_init, d, 1, LocalKind::sm3_ii, q);
  CHECK(rc.client_state_floats == d + q);  // 589824 + 1536
  CHECK(rc.client_state_floats == 591360);

  // The same layer with a dense smoothed-moment kind needs 3d floats.
  CostLedger dense;
  const RoundCosts rd =
      dense.record_round(TransmissionMode::zero_init, d, 1, LocalKind::admu, 0);
  CHECK(rd.client_state_floats == 3 * d);
}

TEST_CASE("blended rounds keep the largest per-client footprint") {
  CostLedger ledger;
  const RoundCosts rc = ledger.record_round(TransmissionMode::zero_init, 10, 2,
                                            LocalKind::sgd, 0,
                                            /*peak_state_override=*/45);
  CHECK(rc.client_state_floats == 45);  // override beats model-only 10

  const RoundCosts rc2 = ledger.record_round(TransmissionMode::zero_init, 10, 2,
                                             LocalKind::admu, 0,
                                             /*peak_state_override=*/5);
  CHECK(rc2.client_state_floats == 30);  // computed 3d beats the override
}

TEST_CASE("cumulative traffic is nondecreasing and sums match totals") {
  CostLedger ledger;
  std::uint64_t prev = 0;
  for (int t = 0; t < 4; ++t) {
    const RoundCosts rc = ledger.record_round(
        t % 2 == 0 ? TransmissionMode::zero_init
                   : TransmissionMode::transmit_preconditioner,
        16, 4, LocalKind::agdu, 0);
    CHECK(rc.cum_bits > prev);
    prev = rc.cum_bits;
    CHECK(rc.round == t + 1);
  }
  const CostLedger::Summary s = ledger.summarize();
  CHECK(s.total_downlink == (64 + 128) * 2);  // two fresh + two transmitting rounds
  CHECK(s.total_uplink == 64 * 4);
  CHECK(s.cum_bits == (s.total_downlink + s.total_uplink) * 64);
  CHECK(s.baseline_bits == 2 * 16 * 4 * 4 * 64);
  CHECK(ledger.rounds().size() == 4);
}

TEST_CASE("an empty ledger summarizes to zero") {
  const CostLedger::Summary s = CostLedger().summarize();
  CHECK(s.cum_bits == 0);
  CHECK(s.baseline_bits == 0);
  CHECK(s.ratio_to_baseline == 0.0);
}

TEST_CASE("transmission mode names") {
  CHECK(std::string(to_string(TransmissionMode::zero_init)) == "zero_init");
  CHECK(std::string(to_string(TransmissionMode::transmit_preconditioner)) ==
        "transmit");
  CHECK(std::string(to_string(TransmissionMode::server_only)) == "server_only");
  CHECK(std::string(to_string(TransmissionMode::none)) == "none");
}
