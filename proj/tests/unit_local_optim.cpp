#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fedlab/cover.hpp"
#include "fedlab/local_optim.hpp"
#include "fedlab/rng.hpp"

using namespace fedlab;

namespace {

LocalOptConfig scalar_agdu(std::int64_t delay) {
  LocalOptConfig cfg;
  cfg.kind = LocalKind::agdu;
  cfg.eta = 1.0;
  cfg.epsilon = 1.0;
  cfg.delay = delay;
  cfg.v0 = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("norm helpers") {
  CHECK(l2_norm({3.0, 4.0}) == 5.0);
  CHECK(l2_norm({}) == 0.0);
  CHECK(linf_norm({-3.0, 2.0}) == 3.0);
  CHECK(linf_norm({}) == 0.0);
}

TEST_CASE("plain gradient step") {
  LocalOptConfig cfg;
  cfg.kind = LocalKind::sgd;
  cfg.eta = 0.5;
  ParamVector x = {1.0};
  LocalOptState st;
  st.reset(1, cfg);
  local_step(x, {2.0}, st, cfg);
  CHECK(x[0] == 0.0);
  CHECK(st.k == 1);
}

TEST_CASE("learning-rate scale multiplies the configured rate for one step") {
  LocalOptConfig cfg;
  cfg.kind = LocalKind::sgd;
  cfg.eta = 0.5;
  ParamVector x = {1.0};
  LocalOptState st;
  st.reset(1, cfg);
  local_step(x, {2.0}, st, cfg, /*lr_scale=*/0.5);
  CHECK(x[0] == 0.5);
}

TEST_CASE("cumulative adaptive step on a scalar") {
  // v accumulates the squared gradient; the update divides by sqrt(v)+eps.
  const LocalOptConfig cfg = scalar_agdu(/*delay=*/1);
  ParamVector x = {0.0};
  LocalOptState st;
  st.reset(1, cfg);
  local_step(x, {3.0}, st, cfg);
  CHECK(st.v[0] == 9.0);
  CHECK(x[0] == -0.75);  // -3 / (sqrt(9) + 1)
}

TEST_CASE("delayed accumulation holds the preconditioner between refreshes") {
  // delay 2: the second moment refreshes on steps 1, 3, 5, ... and is held
  // in between, so step 2 divides by the step-1 preconditioner.
  const LocalOptConfig cfg = scalar_agdu(/*delay=*/2);
  ParamVector x = {0.0};
  LocalOptState st;
  st.reset(1, cfg);

  local_step(x, {3.0}, st, cfg);  // refresh step: v = 9
  CHECK(st.v[0] == 9.0);
  CHECK(x[0] == -0.75);

  local_step(x, {5.0}, st, cfg);  // held step: v stays 9
  CHECK(st.v[0] == 9.0);
  CHECK(x[0] == -2.0);  // -0.75 - 5 / (sqrt(9) + 1)

  local_step(x, {1.0}, st, cfg);  // refresh again: v = 9 + 1
  CHECK(st.v[0] == 10.0);
  CHECK(x[0] == doctest::Approx(-2.0 - 1.0 / (std::sqrt(10.0) + 1.0))
                    .epsilon(1e-15));
}

TEST_CASE("a zero gradient moves nothing") {
  const LocalOptConfig cfg = scalar_agdu(/*delay=*/1);
  ParamVector x = {1.5};
  LocalOptState st;
  st.reset(1, cfg);
  local_step(x, {0.0}, st, cfg);
  CHECK(x[0] == 1.5);
  CHECK(st.v[0] == 0.0);
  CHECK(st.k == 1);
}

TEST_CASE("first-moment smoothing with debias on a scalar") {
  LocalOptConfig cfg;
  cfg.kind = LocalKind::admu;
  cfg.eta = 1.0;
  cfg.epsilon = 1.0;
  cfg.delay = 1;
  cfg.beta1 = 0.5;
  cfg.beta2 = 0.5;
  cfg.v0 = 0.0;
  ParamVector x = {0.0};
  LocalOptState st;
  st.reset(1, cfg);
  local_step(x, {1.0}, st, cfg);
  // m = 0.5, debiased to 1; v = 0.5, debiased to 1 -> step 1/(sqrt(1)+1).
  CHECK(x[0] == -0.5);
  CHECK(st.m[0] == 0.5);
  CHECK(st.v[0] == 0.5);
  CHECK(st.vhat[0] == 1.0);
}

TEST_CASE("without delay the smoothed rule matches the textbook recursion") {
  LocalOptConfig cfg;
  cfg.kind = LocalKind::admu;
  cfg.eta = 0.1;
  cfg.epsilon = 1e-8;
  cfg.delay = 1;
  cfg.beta1 = 0.9;
  cfg.beta2 = 0.999;
  cfg.v0 = 0.0;

  const std::size_t d = 3;
  ParamVector x(d, 1.0);
  LocalOptState st;
  st.reset(d, cfg);

  // Reference implementation with bias-corrected first and second moments.
  ParamVector rx(d, 1.0), rm(d, 0.0), rv(d, 0.0);
  RngStream noise(2024);
  for (int k = 1; k <= 100; ++k) {
    ParamVector g(d);
    for (auto& gj : g) gj = noise.normal();
    local_step(x, g, st, cfg);
    for (std::size_t j = 0; j < d; ++j) {
      rm[j] = cfg.beta1 * rm[j] + (1.0 - cfg.beta1) * g[j];
      rv[j] = cfg.beta2 * rv[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double mhat = rm[j] / (1.0 - std::pow(cfg.beta1, k));
      const double vhat = rv[j] / (1.0 - std::pow(cfg.beta2, k));
      rx[j] -= cfg.eta * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
    for (std::size_t j = 0; j < d; ++j) {
      CHECK(x[j] == doctest::Approx(rx[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("compressed accumulators on a single shared group") {
  Cover cover;
  cover.dim = 2;
  cover.groups = {{0, 1}};
  cover.covering = {{0}, {0}};

  LocalOptConfig cfg;
  cfg.kind = LocalKind::sm3_ii;
  cfg.eta = 1.0;
  cfg.epsilon = 1.0;
  cfg.delay = 1;
  cfg.v0 = 0.0;
  cfg.cover = &cover;

  ParamVector x = {0.0, 0.0};
  LocalOptState st;
  st.reset(2, cfg);

  // Rebuild-from-minima rule: v(j) = min over covering groups + g(j)^2,
  // then the group keeps the max of its members.
  local_step(x, {1.0, 2.0}, st, cfg);
  CHECK(st.v[0] == 1.0);
  CHECK(st.v[1] == 4.0);
  REQUIRE(st.mu.size() == 1);
  CHECK(st.mu[0] == 4.0);

  local_step(x, {2.0, 1.0}, st, cfg);
  CHECK(st.v[0] == 8.0);  // 4 + 4: dominates the exact sum 1 + 4 = 5
  CHECK(st.v[1] == 5.0);  // 4 + 1: equals the exact sum 4 + 1 = 5
  CHECK(st.mu[0] == 8.0);
}

TEST_CASE("additive group accumulators on a single shared group") {
  Cover cover;
  cover.dim = 2;
  cover.groups = {{0, 1}};
  cover.covering = {{0}, {0}};

  LocalOptConfig cfg;
  cfg.kind = LocalKind::sm3_i;
  cfg.eta = 1.0;
  cfg.epsilon = 1.0;
  cfg.delay = 1;
  cfg.v0 = 0.0;
  cfg.cover = &cover;

  ParamVector x = {0.0, 0.0};
  LocalOptState st;
  st.reset(2, cfg);

  // Additive rule: the group adds its peak squared entry, coordinates read
  // the minimum over their groups.
  local_step(x, {1.0, 2.0}, st, cfg);
  REQUIRE(st.mu.size() == 1);
  CHECK(st.mu[0] == 4.0);
  CHECK(st.v[0] == 4.0);
  CHECK(st.v[1] == 4.0);

  local_step(x, {2.0, 1.0}, st, cfg);
  CHECK(st.mu[0] == 8.0);
  CHECK(st.v[0] == 8.0);
  CHECK(st.v[1] == 8.0);
}

TEST_CASE("additive accumulators dominate the rebuild rule which dominates exact sums") {
  Cover cover;
  cover.dim = 4;
  cover.groups = {{0, 1, 2}, {2, 3}};
  cover.covering = {{0}, {0}, {0, 1}, {1}};

  LocalOptConfig base;
  base.eta = 1.0;
  base.epsilon = 1.0;
  base.delay = 1;
  base.v0 = 0.0;
  base.cover = &cover;

  LocalOptConfig cfg_i = base;
  cfg_i.kind = LocalKind::sm3_i;
  LocalOptConfig cfg_ii = base;
  cfg_ii.kind = LocalKind::sm3_ii;

  ParamVector xi(4, 0.0), xii(4, 0.0);
  LocalOptState si, sii;
  si.reset(4, cfg_i);
  sii.reset(4, cfg_ii);
  ParamVector exact(4, 0.0);

  RngStream noise(99);
  for (int k = 0; k < 50; ++k) {
    ParamVector g(4);
    for (auto& gj : g) gj = noise.normal();
    local_step(xi, g, si, cfg_i);
    local_step(xii, g, sii, cfg_ii);
    for (std::size_t j = 0; j < 4; ++j) exact[j] += g[j] * g[j];
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(si.v[j] >= sii.v[j]);
      CHECK(sii.v[j] >= exact[j] - 1e-12);
    }
  }
}

TEST_CASE("singleton cover reduces the rebuild rule to the dense cumulative rule") {
  const Cover cover = build_cover({3}, CoverPolicy::singleton);

  LocalOptConfig dense;
  dense.kind = LocalKind::agdu;
  dense.eta = 0.3;
  dense.epsilon = 0.01;
  dense.delay = 1;
  dense.v0 = 0.5;

  LocalOptConfig compressed = dense;
  compressed.kind = LocalKind::sm3_ii;
  compressed.cover = &cover;

  ParamVector xd(3, 2.0), xc(3, 2.0);
  LocalOptState sd, sc;
  sd.reset(3, dense);
  sc.reset(3, compressed);

  RngStream noise(7);
  for (int k = 0; k < 40; ++k) {
    ParamVector g(3);
    for (auto& gj : g) gj = noise.normal();
    local_step(xd, g, sd, dense);
    local_step(xc, g, sc, compressed);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(xd[j] == xc[j]);        // bit-exact iterates
      CHECK(sd.v[j] == sc.v[j]);    // bit-exact second moments
    }
  }
}

TEST_CASE("small-update clip zeroes tiny vectors and nothing else") {
  ParamVector zero = {0.0, 0.0};
  apply_epsilon_clip(zero, 1e-12);
  CHECK(zero == ParamVector{0.0, 0.0});

  ParamVector tiny = {1e-13, 0.0};
  apply_epsilon_clip(tiny, 1e-12);
  CHECK(tiny[0] == 0.0);
  CHECK(tiny[1] == 0.0);

  ParamVector normal = {0.5, 0.0};
  apply_epsilon_clip(normal, 1e-12);
  CHECK(normal[0] == 0.5);

  ParamVector disabled = {1e-13, 0.0};
  apply_epsilon_clip(disabled, 0.0);
  CHECK(disabled[0] == 1e-13);
}

TEST_CASE("the clip threshold is applied to the update inside a step") {
  LocalOptConfig cfg;
  cfg.kind = LocalKind::sgd;
  cfg.eta = 1.0;
  cfg.epsilon_clip = 1e-6;
  ParamVector x = {1.0};
  LocalOptState st;
  st.reset(1, cfg);
  local_step(x, {1e-9}, st, cfg);
  CHECK(x[0] == 1.0);  // the tiny update was zeroed exactly
}

TEST_CASE("configuration validation names the broken invariant") {
  LocalOptConfig cfg;
  cfg.kind = LocalKind::agdu;

  cfg.eta = 0.0;
  CHECK_THROWS_WITH_AS(validate_local_config(cfg), doctest::Contains("eta"),
                       std::invalid_argument);
  cfg.eta = 0.1;

  cfg.epsilon = 0.0;
  CHECK_THROWS_WITH_AS(validate_local_config(cfg), doctest::Contains("epsilon"),
                       std::invalid_argument);
  cfg.epsilon = 1e-8;

  cfg.delay = 0;
  CHECK_THROWS_WITH_AS(validate_local_config(cfg), doctest::Contains("delay"),
                       std::invalid_argument);
  cfg.delay = 1;

  cfg.beta1 = 1.0;
  CHECK_THROWS_WITH_AS(validate_local_config(cfg), doctest::Contains("beta1"),
                       std::invalid_argument);
  cfg.beta1 = 0.0;

  cfg.v0 = -0.5;
  CHECK_THROWS_WITH_AS(validate_local_config(cfg), doctest::Contains("v0"),
                       std::invalid_argument);
  cfg.v0 = 0.0;

  cfg.kind = LocalKind::sm3_ii;
  cfg.cover = nullptr;
  CHECK_THROWS_WITH_AS(validate_local_config(cfg), doctest::Contains("cover"),
                       std::invalid_argument);
}

TEST_CASE("a step rejects mismatched dimensions") {
  LocalOptConfig cfg;
  cfg.kind = LocalKind::sgd;
  ParamVector x = {1.0, 2.0};
  LocalOptState st;
  st.reset(2, cfg);
  CHECK_THROWS_WITH_AS(local_step(x, {1.0}, st, cfg),
                       doctest::Contains("dimension"), std::invalid_argument);
}

TEST_CASE("compressed kinds reject a cover built for another dimension") {
  const Cover cover = build_cover({2}, CoverPolicy::singleton);
  LocalOptConfig cfg;
  cfg.kind = LocalKind::sm3_ii;
  cfg.cover = &cover;
  ParamVector x = {1.0, 2.0, 3.0};
  LocalOptState st;
  st.reset(3, cfg);
  CHECK_THROWS_WITH_AS(local_step(x, {1.0, 1.0, 1.0}, st, cfg),
                       doctest::Contains("cover dimension"),
                       std::invalid_argument);
}

TEST_CASE("state reset restores configured floors") {
  LocalOptConfig cfg;
  cfg.kind = LocalKind::agdu;
  cfg.v0 = 0.25;
  LocalOptState st;
  st.reset(2, cfg);
  CHECK(st.k == 0);
  CHECK(st.v == ParamVector{0.25, 0.25});
  ParamVector x = {1.0, 1.0};
  local_step(x, {1.0, 1.0}, st, cfg);
  st.reset(2, cfg);
  CHECK(st.k == 0);
  CHECK(st.v == ParamVector{0.25, 0.25});
}

TEST_CASE("kind predicates and names") {
  CHECK(is_sm3_kind(LocalKind::sm3_i));
  CHECK(is_sm3_kind(LocalKind::sm3_ii));
  CHECK(is_sm3_kind(LocalKind::sm3_adam));
  CHECK_FALSE(is_sm3_kind(LocalKind::agdu));
  CHECK(has_dense_preconditioner(LocalKind::agdu));
  CHECK(has_dense_preconditioner(LocalKind::admu));
  CHECK_FALSE(has_dense_preconditioner(LocalKind::sm3_ii));
  CHECK_FALSE(has_dense_preconditioner(LocalKind::sgd));
  CHECK(std::string(to_string(LocalKind::sm3_adam)) == "sm3_adam");
}
