#include "fedlab/problems.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace fedlab {

void quadratic_gradient(const QuadraticSpec& spec, const ParamVector& x,
                        std::size_t client, RngStream& stream,
                        ParamVector& out) {
  if (client >= spec.client_noise.size()) {
    throw std::invalid_argument("client id " + std::to_string(client) +
                                " out of range");
  }
  out.resize(x.size());
  const NoiseSpec& noise = spec.client_noise[client];
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j] = x[j] + sample_noise(noise, stream);
  }
}

namespace {

// Writes the softmax probabilities for one row into probs (size classes).
void softmax_row(const Dataset& data, std::size_t row, const ParamVector& w,
                 std::vector<double>& logits) {
  const std::size_t p = data.features;
  const std::size_t c = data.classes;
  logits.assign(c, 0.0);
  const double* xr = data.x.data() + row * p;
  for (std::size_t k = 0; k < c; ++k) {
    const double* wk = w.data() + k * p;
    double z = 0.0;
    for (std::size_t f = 0; f < p; ++f) z += wk[f] * xr[f];
    logits[k] = z;
  }
  const double zmax = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    logits[k] = std::exp(logits[k] - zmax);
    denom += logits[k];
  }
  for (std::size_t k = 0; k < c; ++k) logits[k] /= denom;
}

void check_logistic_args(const Dataset& data, const std::vector<std::size_t>& rows,
                         const ParamVector& w) {
  if (rows.empty()) {
    throw std::invalid_argument("logistic batch must contain at least one row");
  }
  if (w.size() != data.features * data.classes) {
    throw std::invalid_argument("parameter dimension " + std::to_string(w.size()) +
                                " does not match features*classes");
  }
  for (std::size_t r : rows) {
    if (r >= data.rows()) {
      throw std::invalid_argument("row index " + std::to_string(r) +
                                  " out of range");
    }
  }
}

}  // namespace

void logistic_gradient(const Dataset& data, const std::vector<std::size_t>& rows,
                       double l2, const ParamVector& w, ParamVector& out) {
  check_logistic_args(data, rows, w);
  const std::size_t p = data.features;
  const std::size_t c = data.classes;
  out.assign(c * p, 0.0);
  std::vector<double> probs;
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  for (std::size_t r : rows) {
    softmax_row(data, r, w, probs);
    const double* xr = data.x.data() + r * p;
    for (std::size_t k = 0; k < c; ++k) {
      const double coef = (probs[k] - (data.y[r] == static_cast<int>(k) ? 1.0 : 0.0)) * inv_n;
      double* ok = out.data() + k * p;
      for (std::size_t f = 0; f < p; ++f) ok[f] += coef * xr[f];
    }
  }
  for (std::size_t j = 0; j < out.size(); ++j) out[j] += l2 * w[j];
}

double logistic_loss(const Dataset& data, const std::vector<std::size_t>& rows,
                     double l2, const ParamVector& w) {
  check_logistic_args(data, rows, w);
  std::vector<double> probs;
  double loss = 0.0;
  for (std::size_t r : rows) {
    softmax_row(data, r, w, probs);
    loss -= std::log(std::max(probs[data.y[r]], 1e-300));
  }
  loss /= static_cast<double>(rows.size());
  double reg = 0.0;
  for (double wj : w) reg += wj * wj;
  return loss + 0.5 * l2 * reg;
}

namespace {
std::vector<std::size_t> all_rows(const Dataset& data) {
  std::vector<std::size_t> rows(data.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}
}  // namespace

void logistic_gradient_full(const Dataset& data, double l2, const ParamVector& w,
                            ParamVector& out) {
  logistic_gradient(data, all_rows(data), l2, w, out);
}

double logistic_loss_full(const Dataset& data, double l2, const ParamVector& w) {
  return logistic_loss(data, all_rows(data), l2, w);
}

std::vector<std::vector<std::size_t>> dirichlet_partition(
    const std::vector<int>& labels, std::size_t n_clients, double alpha,
    RngStream stream) {
  if (n_clients == 0) throw std::invalid_argument("partition needs at least one client");
  if (!(alpha > 0.0)) throw std::invalid_argument("dirichlet alpha must be positive");
  int max_label = -1;
  for (int y : labels) {
    if (y < 0) throw std::invalid_argument("labels must be non-negative");
    max_label = std::max(max_label, y);
  }
  std::vector<std::vector<std::size_t>> out(n_clients);
  if (labels.empty()) return out;

  // Per class, ascending: draw shares, round by largest remainder, then hand
  // out that class's sample indices contiguously in client order.
  for (int cls = 0; cls <= max_label; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    if (members.empty()) continue;

    RngStream cls_stream = stream.fork(static_cast<std::uint64_t>(cls));
    std::vector<double> shares(n_clients);
    double total = 0.0;
    for (std::size_t i = 0; i < n_clients; ++i) {
      shares[i] = cls_stream.gamma(alpha);
      total += shares[i];
    }
    // Guard against a degenerate all-tiny draw at extreme alpha.
    if (!(total > 0.0) || !std::isfinite(total)) {
      shares.assign(n_clients, 1.0);
      total = static_cast<double>(n_clients);
    }

    const double n = static_cast<double>(members.size());
    std::vector<std::size_t> counts(n_clients);
    std::vector<std::pair<double, std::size_t>> remainders(n_clients);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < n_clients; ++i) {
      const double ideal = n * shares[i] / total;
      counts[i] = static_cast<std::size_t>(std::floor(ideal));
      remainders[i] = {ideal - std::floor(ideal), i};
      assigned += counts[i];
    }
    // Largest remainder first; ties go to the lowest client id.
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; assigned < members.size(); ++i) {
      ++counts[remainders[i % n_clients].second];
      ++assigned;
    }

    std::size_t cursor = 0;
    for (std::size_t i = 0; i < n_clients; ++i) {
      for (std::size_t c = 0; c < counts[i]; ++c) {
        out[i].push_back(members[cursor++]);
      }
    }
  }
  return out;
}

Dataset load_csv_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      columns = static_cast<std::size_t>(
                    std::count(line.begin(), line.end(), ',')) + 1;
      if (columns < 2) {
        throw std::runtime_error("line 1: header needs at least one feature and a label");
      }
      data.features = columns - 1;
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": cannot parse value '" + cell + "'");
      }
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
      if (used != cell.size()) {
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": trailing junk in value '" + cell + "'");
      }
      values.push_back(v);
    }
    if (values.size() != columns) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": expected " +
                               std::to_string(columns) + " columns, found " +
                               std::to_string(values.size()));
    }
    const double label = values.back();
    if (label != std::floor(label) || label < 0.0) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": label must be a non-negative integer");
    }
    for (std::size_t f = 0; f + 1 < values.size(); ++f) data.x.push_back(values[f]);
    data.y.push_back(static_cast<int>(label));
    max_label = std::max(max_label, static_cast<int>(label));
  }
  if (data.y.empty()) throw std::runtime_error("dataset has no data rows");
  data.classes = static_cast<std::size_t>(max_label) + 1;
  return data;
}

Dataset make_blob_dataset(std::size_t rows, std::size_t features,
                          std::size_t classes, double center_scale,
                          RngStream stream) {
  if (rows == 0 || features == 0 || classes == 0) {
    throw std::invalid_argument("blob dataset needs positive rows/features/classes");
  }
  Dataset data;
  data.features = features;
  data.classes = classes;
  RngStream center_stream = stream.fork(1);
  std::vector<double> centers(classes * features);
  for (std::size_t k = 0; k < classes; ++k) {
    double norm_sq = 0.0;
    for (std::size_t f = 0; f < features; ++f) {
      centers[k * features + f] = center_stream.normal();
      norm_sq += centers[k * features + f] * centers[k * features + f];
    }
    const double scale = center_scale / std::max(std::sqrt(norm_sq), 1e-12);
    for (std::size_t f = 0; f < features; ++f) centers[k * features + f] *= scale;
  }
  RngStream row_stream = stream.fork(2);
  data.x.resize(rows * features);
  data.y.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t k = static_cast<std::size_t>(
        row_stream.uniform_below(static_cast<std::uint64_t>(classes)));
    data.y[r] = static_cast<int>(k);
    for (std::size_t f = 0; f < features; ++f) {
      data.x[r * features + f] = centers[k * features + f] + row_stream.normal();
    }
  }
  return data;
}

QuadraticProblem::QuadraticProblem(QuadraticSpec spec) : spec_(std::move(spec)) {
  if (spec_.dim == 0) throw std::invalid_argument("quadratic dimension must be positive");
  if (spec_.client_noise.empty()) {
    throw std::invalid_argument("quadratic problem needs at least one client");
  }
}

void QuadraticProblem::stochastic_gradient(const ParamVector& x, std::size_t client,
                                           RngStream& stream, ParamVector& out) {
  quadratic_gradient(spec_, x, client, stream, out);
}

void QuadraticProblem::full_gradient(const ParamVector& x, ParamVector& out) const {
  out = x;
}

double QuadraticProblem::train_loss(const ParamVector& x) const {
  double s = 0.0;
  for (double xi : x) s += xi * xi;
  return 0.5 * s;
}

LogisticProblem::LogisticProblem(Dataset train, Dataset test,
                                 std::vector<std::vector<std::size_t>> client_rows,
                                 double l2, std::size_t batch)
    : train_(std::move(train)),
      test_(std::move(test)),
      client_rows_(std::move(client_rows)),
      l2_(l2),
      batch_(batch) {
  if (batch_ == 0) throw std::invalid_argument("batch size must be positive");
  if (l2_ < 0.0) throw std::invalid_argument("l2 must be non-negative");
  for (const auto& rows : client_rows_) {
    for (std::size_t r : rows) {
      if (r >= train_.rows()) {
        throw std::invalid_argument("client row index out of range");
      }
    }
  }
  for (int y : train_.y) {
    if (y < 0 || static_cast<std::size_t>(y) >= train_.classes) {
      throw std::invalid_argument("train label out of range");
    }
  }
}

void LogisticProblem::stochastic_gradient(const ParamVector& x, std::size_t client,
                                          RngStream& stream, ParamVector& out) {
  const auto& rows = client_rows_.at(client);
  if (rows.empty()) {
    throw std::invalid_argument("client " + std::to_string(client) +
                                " has no local data");
  }
  const std::size_t b = std::min(batch_, rows.size());
  std::vector<std::size_t> batch_rows(b);
  for (std::size_t i = 0; i < b; ++i) {
    batch_rows[i] =
        rows[stream.uniform_below(static_cast<std::uint64_t>(rows.size()))];
  }
  logistic_gradient(train_, batch_rows, l2_, x, out);
}

void LogisticProblem::full_gradient(const ParamVector& x, ParamVector& out) const {
  logistic_gradient_full(train_, l2_, x, out);
}

double LogisticProblem::train_loss(const ParamVector& x) const {
  return logistic_loss_full(train_, l2_, x);
}

double LogisticProblem::test_loss(const ParamVector& x) const {
  if (test_.rows() == 0) return train_loss(x);
  return logistic_loss_full(test_, l2_, x);
}

}  // namespace fedlab
