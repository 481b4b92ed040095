#pragma once

#include <string>
#include <vector>

namespace fedlab {

// One verification family: a self-contained scenario with a hard pass/fail
// outcome and a one-line diagnostic (worst margins, counts, fitted rates).
struct CheckResult {
  int id = 0;
  std::string label;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

// The ten acceptance families.  Each builds its own configurations, runs
// them in-process, and judges the stated tolerances.
CheckResult check_delay_degeneracy();    // 1: z=1 equals textbook AdaGrad/Adam
CheckResult check_compressed_exactness();// 2: singleton-cover rule is bit-exact
CheckResult check_dominance_chain();     // 3: accumulator ordering + range
CheckResult check_movement_bounds();     // 4: per-round client/server caps
CheckResult check_guarantee_margin();    // 5: guarantee rhs + series lemmas
CheckResult check_convergence_rate();    // 6: min-so-far gradient decay slope
CheckResult check_heavy_tails();         // 7: instability vs stabilized runs
CheckResult check_ledger_identities();   // 8: traffic ratios + state fractions
CheckResult check_zero_init_parity();    // 9: zero-init vs transmitted state
CheckResult check_reproducibility();     // 10: byte-identical replays

// Fast subset used by check 5 and the `verify` subcommand: brute-force
// numeric sweeps of the two series inequalities behind the guarantee.
CheckResult check_series_lemmas();

// All ten acceptance families, in order.
std::vector<CheckResult> run_all_checks();

// The quick suite behind `verify`: optimizer equivalences, cover/accumulator
// properties, series lemmas, ledger identities, reproducibility.
std::vector<CheckResult> run_fast_checks();

// "[PASS] 3 dominance chain — detail (1.2s)" style line.
std::string format_check_line(const CheckResult& r);

}  // namespace fedlab
