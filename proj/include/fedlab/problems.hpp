#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "fedlab/local_optim.hpp"
#include "fedlab/rng.hpp"

namespace fedlab {

// ---------------------------------------------------------------------------
// Synthetic quadratic: f_i(x) = ||x||^2 / 2 with additive gradient noise.
// The stochastic gradient is x + xi, xi drawn per coordinate from the
// client's noise distribution.

struct QuadraticSpec {
  std::size_t dim = 1;
  std::vector<NoiseSpec> client_noise;  // one entry per client
};

// Draws one stochastic gradient in-place (out resized to x.size()).
void quadratic_gradient(const QuadraticSpec& spec, const ParamVector& x,
                        std::size_t client, RngStream& stream,
                        ParamVector& out);

// ---------------------------------------------------------------------------
// Multinomial logistic regression with L2 regularization.  The flat parameter
// layout is row-major [class][feature], dimension = classes * features.

struct Dataset {
  std::size_t features = 0;
  std::size_t classes = 0;
  std::vector<double> x;   // row-major, rows * features
  std::vector<int> y;      // labels in [0, classes)
  std::size_t rows() const { return features == 0 ? 0 : x.size() / features; }
};

// Mean softmax cross-entropy gradient over the given rows, plus l2 * w.
// Throws std::invalid_argument on an empty row set.
void logistic_gradient(const Dataset& data, const std::vector<std::size_t>& rows,
                       double l2, const ParamVector& w, ParamVector& out);

// Mean softmax cross-entropy loss over the given rows plus (l2/2)*||w||^2.
double logistic_loss(const Dataset& data, const std::vector<std::size_t>& rows,
                     double l2, const ParamVector& w);

// All-rows helpers.
void logistic_gradient_full(const Dataset& data, double l2, const ParamVector& w,
                            ParamVector& out);
double logistic_loss_full(const Dataset& data, double l2, const ParamVector& w);

// ---------------------------------------------------------------------------
// Label-skew partitioner: for every class, client shares are drawn from a
// symmetric Dirichlet(alpha) and converted to integer counts by largest-
// remainder rounding; each sample index is assigned to exactly one client.
std::vector<std::vector<std::size_t>> dirichlet_partition(
    const std::vector<int>& labels, std::size_t n_clients, double alpha,
    RngStream stream);

// Loads "f0,f1,...,label" CSV with one header row.  Malformed rows raise
// std::runtime_error naming the 1-based line number.
Dataset load_csv_dataset(const std::string& path);

// Synthetic Gaussian-blob classification set: class centers drawn once on a
// sphere, rows = center[y] + unit noise.  Deterministic in the stream.
Dataset make_blob_dataset(std::size_t rows, std::size_t features,
                          std::size_t classes, double center_scale,
                          RngStream stream);

// ---------------------------------------------------------------------------
// Problem interface consumed by the engine.

class Problem {
 public:
  virtual ~Problem() = default;
  virtual std::size_t dim() const = 0;
  virtual std::size_t n_clients() const = 0;
  // True when clients hold finite datasets (epoch length follows the data);
  // false for synthetic gradient streams (epoch length follows the config).
  virtual bool uses_dataset() const = 0;
  // Number of local samples (0 for synthetic streams without a dataset).
  virtual std::size_t client_samples(std::size_t client) const = 0;
  // Local steps forming one epoch: ceil(samples / batch) for dataset
  // problems, 0 for synthetic streams (the strategy config decides).
  virtual std::size_t steps_per_epoch(std::size_t client) const = 0;
  // One stochastic gradient for `client` at x.  For dataset problems the
  // batch rows are drawn from `stream` with replacement.
  virtual void stochastic_gradient(const ParamVector& x, std::size_t client,
                                   RngStream& stream, ParamVector& out) = 0;
  // Exact global objective gradient (analytic or full-batch).
  virtual void full_gradient(const ParamVector& x, ParamVector& out) const = 0;
  virtual double train_loss(const ParamVector& x) const = 0;
  virtual double test_loss(const ParamVector& x) const = 0;
};

class QuadraticProblem final : public Problem {
 public:
  explicit QuadraticProblem(QuadraticSpec spec);
  std::size_t dim() const override { return spec_.dim; }
  std::size_t n_clients() const override { return spec_.client_noise.size(); }
  bool uses_dataset() const override { return false; }
  std::size_t client_samples(std::size_t) const override { return 0; }
  std::size_t steps_per_epoch(std::size_t) const override { return 0; }
  void stochastic_gradient(const ParamVector& x, std::size_t client,
                           RngStream& stream, ParamVector& out) override;
  void full_gradient(const ParamVector& x, ParamVector& out) const override;
  double train_loss(const ParamVector& x) const override;
  double test_loss(const ParamVector& x) const override { return train_loss(x); }

 private:
  QuadraticSpec spec_;
};

class LogisticProblem final : public Problem {
 public:
  LogisticProblem(Dataset train, Dataset test,
                  std::vector<std::vector<std::size_t>> client_rows, double l2,
                  std::size_t batch);
  std::size_t dim() const override { return train_.features * train_.classes; }
  std::size_t n_clients() const override { return client_rows_.size(); }
  bool uses_dataset() const override { return true; }
  std::size_t client_samples(std::size_t client) const override {
    return client_rows_[client].size();
  }
  std::size_t steps_per_epoch(std::size_t client) const override {
    const std::size_t n = client_rows_[client].size();
    return n == 0 ? 0 : (n + batch_ - 1) / batch_;
  }
  void stochastic_gradient(const ParamVector& x, std::size_t client,
                           RngStream& stream, ParamVector& out) override;
  void full_gradient(const ParamVector& x, ParamVector& out) const override;
  double train_loss(const ParamVector& x) const override;
  double test_loss(const ParamVector& x) const override;
  std::size_t batch() const { return batch_; }

 private:
  Dataset train_;
  Dataset test_;
  std::vector<std::vector<std::size_t>> client_rows_;
  double l2_ = 0.0;
  std::size_t batch_ = 1;
};

}  // namespace fedlab
