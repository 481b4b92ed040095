#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedlab/problems.hpp"
#include "fedlab/rng.hpp"

using namespace fedlab;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  out.close();
  return path;
}

}  // namespace

TEST_CASE("noiseless quadratic gradient equals the iterate") {
  QuadraticSpec spec;
  spec.dim = 2;
  spec.client_noise = {NoiseSpec::gaussian(0.0)};
  QuadraticProblem p(std::move(spec));
  CHECK(p.dim() == 2);
  CHECK(p.n_clients() == 1);
  CHECK_FALSE(p.uses_dataset());

  RngStream stream = derive_stream(1, 1, 0);
  ParamVector g;
  const ParamVector x = {2.0, -3.0};
  p.stochastic_gradient(x, 0, stream, g);
  CHECK(g == x);

  ParamVector full;
  p.full_gradient(x, full);
  CHECK(full == x);
  CHECK(p.train_loss(x) == 6.5);  // (4 + 9) / 2
  CHECK(p.test_loss(x) == 6.5);
}

TEST_CASE("quadratic gradient noise replays per stream") {
  QuadraticSpec spec;
  spec.dim = 3;
  spec.client_noise = {NoiseSpec::gaussian(1.0), NoiseSpec::studentT(3.0)};
  QuadraticProblem p(std::move(spec));

  ParamVector g1, g2, g3;
  const ParamVector x = {0.0, 0.0, 0.0};
  RngStream s1 = derive_stream(5, 2, 0);
  RngStream s2 = derive_stream(5, 2, 0);
  RngStream s3 = derive_stream(5, 3, 0);
  p.stochastic_gradient(x, 0, s1, g1);
  p.stochastic_gradient(x, 0, s2, g2);
  p.stochastic_gradient(x, 0, s3, g3);
  CHECK(g1 == g2);
  CHECK(g1 != g3);

  CHECK_THROWS_AS(p.stochastic_gradient(x, 5, s1, g1), std::invalid_argument);
}

TEST_CASE("softmax gradient matches central finite differences") {
  RngStream data_stream = derive_stream(5, 0, 0);
  const Dataset data = make_blob_dataset(30, 3, 3, 2.0, data_stream);
  const double l2 = 0.01;
  const std::size_t dim = data.features * data.classes;

  RngStream wstream(17);
  for (int instance = 0; instance < 20; ++instance) {
    ParamVector w(dim);
    for (auto& wj : w) wj = 0.5 * wstream.normal();
    ParamVector g;
    logistic_gradient_full(data, l2, w, g);
    const double h = 1e-6;
    for (std::size_t j = 0; j < dim; ++j) {
      ParamVector wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      const double fd =
          (logistic_loss_full(data, l2, wp) - logistic_loss_full(data, l2, wm)) /
          (2.0 * h);
      CHECK(g[j] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("with all-zero features only the regularizer moves the gradient") {
  Dataset data;
  data.features = 2;
  data.classes = 2;
  data.x = {0.0, 0.0, 0.0, 0.0};  // two rows
  data.y = {0, 1};
  const ParamVector w = {1.0, 2.0, 3.0, 4.0};
  ParamVector g;
  logistic_gradient_full(data, 0.5, w, g);
  CHECK(g == ParamVector{0.5, 1.0, 1.5, 2.0});
}

TEST_CASE("an empty batch is rejected") {
  Dataset data;
  data.features = 1;
  data.classes = 2;
  data.x = {1.0};
  data.y = {0};
  ParamVector g;
  CHECK_THROWS_AS(logistic_gradient(data, {}, 0.0, {0.0, 0.0}, g),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)logistic_loss(data, {}, 0.0, {0.0, 0.0}),
                  std::invalid_argument);
}

TEST_CASE("label-skew partitioning conserves every sample exactly once") {
  std::vector<int> labels(1000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);

  for (double alpha : {0.1, 1.0, 100.0}) {
    auto parts = dirichlet_partition(labels, 7, alpha, derive_stream(9, 0, 1));
    REQUIRE(parts.size() == 7);
    std::vector<std::size_t> seen;
    for (const auto& rows : parts) seen.insert(seen.end(), rows.begin(), rows.end());
    std::sort(seen.begin(), seen.end());
    std::vector<std::size_t> want(labels.size());
    std::iota(want.begin(), want.end(), std::size_t{0});
    CHECK(seen == want);
  }
}

TEST_CASE("label-skew partitioning replays per stream") {
  std::vector<int> labels(200);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 4);
  auto a = dirichlet_partition(labels, 5, 0.3, derive_stream(11, 0, 1));
  auto b = dirichlet_partition(labels, 5, 0.3, derive_stream(11, 0, 1));
  CHECK(a == b);
  auto c = dirichlet_partition(labels, 5, 0.3, derive_stream(12, 0, 1));
  CHECK(a != c);
}

TEST_CASE("huge concentration spreads classes evenly") {
  std::vector<int> labels(1000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
  auto parts = dirichlet_partition(labels, 2, 1e6, derive_stream(13, 0, 1));
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].size() > 450);
  CHECK(parts[0].size() < 550);
  CHECK(parts[0].size() + parts[1].size() == 1000);
}

TEST_CASE("tiny concentration collapses each class onto few clients") {
  std::vector<int> labels(1000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
  auto parts = dirichlet_partition(labels, 10, 0.001, derive_stream(14, 0, 1));

  // For each class, find the largest share any single client holds of it.
  int concentrated_classes = 0;
  for (int cls = 0; cls < 10; ++cls) {
    std::size_t class_total = 0, best = 0;
    for (const auto& rows : parts) {
      std::size_t mine = 0;
      for (std::size_t r : rows) {
        if (labels[r] == cls) ++mine;
      }
      class_total += mine;
      best = std::max(best, mine);
    }
    REQUIRE(class_total == 100);
    if (static_cast<double>(best) / static_cast<double>(class_total) > 0.9) {
      ++concentrated_classes;
    }
  }
  CHECK(concentrated_classes >= 8);
}

TEST_CASE("partitioning rejects invalid arguments") {
  std::vector<int> labels = {0, 1};
  CHECK_THROWS_AS((void)dirichlet_partition(labels, 0, 1.0, RngStream(1)),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)dirichlet_partition(labels, 2, 0.0, RngStream(1)),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)dirichlet_partition({0, -1}, 2, 1.0, RngStream(1)),
                  std::invalid_argument);
}

TEST_CASE("csv datasets load features, labels, and inferred class count") {
  const std::string path =
      write_temp("unit_problems_ok.csv", "f0,f1,label\n0.5,1.5,0\n-1,2,2\n");
  const Dataset d = load_csv_dataset(path);
  CHECK(d.features == 2);
  CHECK(d.rows() == 2);
  CHECK(d.classes == 3);  // max label + 1
  CHECK(d.x == std::vector<double>{0.5, 1.5, -1.0, 2.0});
  CHECK(d.y == std::vector<int>{0, 2});
  std::remove(path.c_str());
}

TEST_CASE("csv loader errors name the offending line") {
  const std::string bad_value =
      write_temp("unit_problems_bad.csv", "f0,f1,label\n0.5,oops,1\n");
  CHECK_THROWS_WITH_AS((void)load_csv_dataset(bad_value),
                       doctest::Contains("line 2"), std::runtime_error);
  std::remove(bad_value.c_str());

  const std::string bad_cols =
      write_temp("unit_problems_cols.csv", "f0,f1,label\n0.5,1\n");
  CHECK_THROWS_WITH_AS((void)load_csv_dataset(bad_cols),
                       doctest::Contains("line 2"), std::runtime_error);
  std::remove(bad_cols.c_str());

  const std::string bad_label =
      write_temp("unit_problems_label.csv", "f0,label\n0.5,1.5\n");
  CHECK_THROWS_WITH_AS((void)load_csv_dataset(bad_label),
                       doctest::Contains("label"), std::runtime_error);
  std::remove(bad_label.c_str());

  CHECK_THROWS_WITH_AS((void)load_csv_dataset("no_such_file_anywhere.csv"),
                       doctest::Contains("cannot open"), std::runtime_error);

  const std::string empty = write_temp("unit_problems_empty.csv", "f0,label\n");
  CHECK_THROWS_WITH_AS((void)load_csv_dataset(empty),
                       doctest::Contains("no data rows"), std::runtime_error);
  std::remove(empty.c_str());
}

TEST_CASE("synthetic blob datasets are deterministic in the stream") {
  const Dataset a = make_blob_dataset(50, 4, 3, 2.5, derive_stream(21, 0, 0));
  const Dataset b = make_blob_dataset(50, 4, 3, 2.5, derive_stream(21, 0, 0));
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  const Dataset c = make_blob_dataset(50, 4, 3, 2.5, derive_stream(22, 0, 0));
  CHECK(a.x != c.x);

  CHECK(a.rows() == 50);
  CHECK(a.features == 4);
  CHECK(a.classes == 3);
  for (int y : a.y) {
    CHECK(y >= 0);
    CHECK(y < 3);
  }
  CHECK_THROWS_AS((void)make_blob_dataset(0, 4, 3, 2.5, RngStream(1)),
                  std::invalid_argument);
}

TEST_CASE("dataset-backed problem reports sizes and epoch lengths") {
  Dataset train = make_blob_dataset(10, 2, 2, 2.0, derive_stream(30, 0, 0));
  Dataset test = make_blob_dataset(4, 2, 2, 2.0, derive_stream(30, 0, 0));
  std::vector<std::vector<std::size_t>> rows = {{0, 1, 2}, {3, 4, 5, 6, 7, 8, 9}};
  LogisticProblem p(std::move(train), std::move(test), std::move(rows), 0.01, 2);

  CHECK(p.dim() == 4);  // 2 features x 2 classes
  CHECK(p.n_clients() == 2);
  CHECK(p.uses_dataset());
  CHECK(p.client_samples(0) == 3);
  CHECK(p.client_samples(1) == 7);
  CHECK(p.steps_per_epoch(0) == 2);  // ceil(3/2)
  CHECK(p.steps_per_epoch(1) == 4);  // ceil(7/2)
  CHECK(p.batch() == 2);

  // Batches draw with replacement from the client's own rows, replaying
  // per stream.
  ParamVector g1, g2;
  const ParamVector w(4, 0.0);
  RngStream s1 = derive_stream(31, 1, 0);
  RngStream s2 = derive_stream(31, 1, 0);
  p.stochastic_gradient(w, 0, s1, g1);
  p.stochastic_gradient(w, 0, s2, g2);
  CHECK(g1 == g2);

  // The exact full gradient at zero has no regularizer contribution.
  ParamVector full;
  p.full_gradient(w, full);
  CHECK(full.size() == 4);
  CHECK(p.train_loss(w) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("an empty held-out set falls back to the training objective") {
  Dataset train = make_blob_dataset(6, 2, 2, 2.0, derive_stream(33, 0, 0));
  Dataset test;  // no rows
  test.features = 2;
  test.classes = 2;
  std::vector<std::vector<std::size_t>> rows = {{0, 1, 2, 3, 4, 5}};
  LogisticProblem p(std::move(train), std::move(test), std::move(rows), 0.0, 3);
  const ParamVector w(4, 0.1);
  CHECK(p.test_loss(w) == p.train_loss(w));
}
