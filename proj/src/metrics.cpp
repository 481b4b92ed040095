#include "fedlab/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace fedlab {

std::string g17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

static const char kHeader[] =
    "round,train_loss,test_loss,grad_norm,downlink_floats,uplink_floats,"
    "client_state_floats,cum_bits,phi1_margin,phi2_margin";

std::string metrics_to_string(const std::vector<RoundRecord>& records) {
  std::ostringstream o;
  o << kHeader << "\n";
  for (const RoundRecord& r : records) {
    o << r.round << ',' << g17(r.train_loss) << ',' << g17(r.test_loss) << ','
      << g17(r.grad_norm) << ',' << r.costs.downlink_floats << ','
      << r.costs.uplink_floats << ',' << r.costs.client_state_floats << ','
      << r.costs.cum_bits << ',' << g17(r.phi1_margin) << ','
      << g17(r.phi2_margin) << "\n";
  }
  return o.str();
}

void emit_metrics(const std::vector<RoundRecord>& records,
                  const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << metrics_to_string(records);
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string bound_report_text(const BoundReport& r) {
  std::ostringstream o;
  o << "phi1 = " << g17(r.phi1) << "\n";
  o << "phi1_vector_norm = " << g17(r.phi1_norm) << "\n";
  o << "phi2_final = " << g17(r.phi2) << "\n";
  o << "gamma1 = " << g17(r.gamma1) << "\n";
  o << "alpha1 = " << g17(r.alpha1) << "\n";
  o << "c_beta = " << g17(r.c_beta) << "\n";
  o << "smoothness_proxy = " << g17(r.l_tilde) << "\n";
  for (int i = 0; i < 6; ++i)
    o << "psi" << (i + 1) << " = " << g17(r.psi[i]) << "\n";
  if (r.applicable) {
    o << "guarantee_rhs = " << g17(r.rhs) << "\n";
    o << "observed_min_grad_sq = " << g17(r.observed_min_grad_sq) << "\n";
    o << "margin = " << g17(r.margin) << "\n";
  } else {
    o << "guarantee_rhs = not applicable (" << r.reason << ")\n";
    o << "observed_min_grad_sq = " << g17(r.observed_min_grad_sq) << "\n";
  }
  return o.str();
}

std::size_t MetricsTable::col(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return i;
  throw std::runtime_error("metrics table has no column '" + name + "'");
}

MetricsTable parse_metrics(const std::string& text) {
  MetricsTable table;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    if (lineno == 1) {
      table.columns = cells;
      continue;
    }
    if (cells.size() != table.columns.size())
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected " +
                               std::to_string(table.columns.size()) +
                               " cells, got " + std::to_string(cells.size()));
    std::vector<double> parsed;
    parsed.reserve(cells.size());
    for (const std::string& c : cells) {
      if (c == "nan") {
        parsed.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      try {
        std::size_t pos = 0;
        double v = std::stod(c, &pos);
        if (pos != c.size()) throw std::invalid_argument(c);
        parsed.push_back(v);
      } catch (...) {
        throw std::runtime_error("line " + std::to_string(lineno) +
                                 ": bad numeric cell '" + c + "'");
      }
    }
    table.rows.push_back(std::move(parsed));
  }
  if (table.columns.empty())
    throw std::runtime_error("metrics text has no header row");
  return table;
}

MetricsTable load_metrics(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open metrics file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_metrics(buf.str());
}

EnsembleSummary summarize_ensemble(const std::vector<MetricsTable>& tables) {
  if (tables.empty())
    throw std::invalid_argument("ensemble summary needs at least one table");
  const std::size_t rows = tables[0].rows.size();
  for (const MetricsTable& t : tables)
    if (t.rows.size() != rows)
      throw std::invalid_argument(
          "ensemble tables disagree on round count; aggregate matching runs "
          "only");
  const std::size_t c_round = tables[0].col("round");
  const std::size_t c_train = tables[0].col("train_loss");
  const std::size_t c_test = tables[0].col("test_loss");
  const std::size_t c_grad = tables[0].col("grad_norm");

  EnsembleSummary s;
  const double n = static_cast<double>(tables.size());
  for (std::size_t r = 0; r < rows; ++r) {
    auto stats = [&](std::size_t col, double& mean_out, double& ci_out) {
      double mean = 0.0;
      for (const MetricsTable& t : tables) mean += t.rows[r][col];
      mean /= n;
      double var = 0.0;
      for (const MetricsTable& t : tables) {
        const double d = t.rows[r][col] - mean;
        var += d * d;
      }
      var = tables.size() > 1 ? var / (n - 1.0) : 0.0;
      mean_out = mean;
      ci_out = 1.96 * std::sqrt(var / n);
    };
    s.round_id.push_back(tables[0].rows[r][c_round]);
    double m = 0, ci = 0;
    stats(c_train, m, ci);
    s.mean_train.push_back(m);
    s.ci_train.push_back(ci);
    stats(c_test, m, ci);
    s.mean_test.push_back(m);
    s.ci_test.push_back(ci);
    stats(c_grad, m, ci);
    s.mean_grad.push_back(m);
    s.ci_grad.push_back(ci);
  }
  return s;
}

std::string ensemble_to_csv(const EnsembleSummary& s) {
  std::ostringstream o;
  o << "round,mean_train_loss,ci95_train_loss,mean_test_loss,ci95_test_loss,"
       "mean_grad_norm,ci95_grad_norm\n";
  for (std::size_t r = 0; r < s.round_id.size(); ++r) {
    o << g17(s.round_id[r]) << ',' << g17(s.mean_train[r]) << ','
      << g17(s.ci_train[r]) << ',' << g17(s.mean_test[r]) << ','
      << g17(s.ci_test[r]) << ',' << g17(s.mean_grad[r]) << ','
      << g17(s.ci_grad[r]) << "\n";
  }
  return o.str();
}

}  // namespace fedlab
