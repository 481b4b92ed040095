#pragma once

#include <string>
#include <vector>

#include "fedlab/bounds.hpp"
#include "fedlab/engine.hpp"

namespace fedlab {

// Shortest round-trippable decimal form: "%.17g", with non-finite values
// fixed to "nan" / "inf" / "-inf" so output never depends on the libc.
std::string g17(double v);

// Renders round records as CSV: fixed 10-column header, LF line endings,
// g17 reals, integral counters as plain integers.  Margins that were not
// checked print as "nan".
std::string metrics_to_string(const std::vector<RoundRecord>& records);

// Writes metrics_to_string to `path` (binary mode, so bytes are exact).
// Throws std::runtime_error on I/O failure.
void emit_metrics(const std::vector<RoundRecord>& records,
                  const std::string& path);

// Human-readable block for an analytic bound evaluation.
std::string bound_report_text(const BoundReport& report);

// A metrics CSV read back into memory: column names plus numeric cells.
struct MetricsTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  // Column index by name; throws std::runtime_error when absent.
  std::size_t col(const std::string& name) const;
};

// Parses a metrics CSV produced by emit_metrics (or anything matching the
// same shape).  Malformed rows raise std::runtime_error naming the 1-based
// line number.
MetricsTable parse_metrics(const std::string& text);
MetricsTable load_metrics(const std::string& path);

// Per-round mean and 95% normal-approximation confidence half-width over an
// ensemble of runs (tables matched by row index; all tables must have the
// same row count).  Requires at least one table.
struct EnsembleSummary {
  std::vector<double> round_id;
  std::vector<double> mean_train, ci_train;
  std::vector<double> mean_test, ci_test;
  std::vector<double> mean_grad, ci_grad;
};

EnsembleSummary summarize_ensemble(const std::vector<MetricsTable>& tables);
std::string ensemble_to_csv(const EnsembleSummary& summary);

}  // namespace fedlab
