#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fedlab/rng.hpp"
#include "fedlab/server_optim.hpp"

using namespace fedlab;

TEST_CASE("plain averaging adds the scaled delta") {
  ServerConfig cfg;
  cfg.kind = ServerKind::avg;
  cfg.eta = 1.0;
  ServerState st;
  init_server_state(st, {0.0, 0.0}, cfg);
  server_update(st, {1.0, -1.0}, cfg);
  CHECK(st.x == ParamVector{1.0, -1.0});
  CHECK(st.t == 1);
  // Averaging touches neither moment.
  CHECK(st.m == ParamVector{0.0, 0.0});

  cfg.eta = 0.5;
  server_update(st, {1.0, -1.0}, cfg);
  CHECK(st.x == ParamVector{1.5, -1.5});
  CHECK(st.t == 2);
}

TEST_CASE("cumulative second moment on a scalar") {
  ServerConfig cfg;
  cfg.kind = ServerKind::adagrad;
  cfg.eta = 1.0;
  cfg.tau = 1.0;
  cfg.beta1 = 0.0;
  cfg.v0 = 1.0;
  ServerState st;
  init_server_state(st, {0.0}, cfg);

  server_update(st, {3.0}, cfg);
  CHECK(st.v[0] == 10.0);  // 1 + 3^2
  CHECK(st.x[0] == doctest::Approx(3.0 / (std::sqrt(10.0) + 1.0)).epsilon(1e-15));
  CHECK(st.x[0] == doctest::Approx(0.72076).epsilon(1e-4));
}

TEST_CASE("a zero delta leaves the iterate and moment in place") {
  ServerConfig cfg;
  cfg.kind = ServerKind::adagrad;
  cfg.eta = 1.0;
  cfg.tau = 1.0;
  cfg.v0 = 1.0;
  ServerState st;
  init_server_state(st, {2.0}, cfg);
  server_update(st, {0.0}, cfg);
  CHECK(st.x[0] == 2.0);
  CHECK(st.v[0] == 1.0);
  CHECK(st.t == 1);
}

TEST_CASE("momentum shapes consecutive increments") {
  ServerConfig cfg;
  cfg.kind = ServerKind::adagrad;
  cfg.eta = 1.0;
  cfg.tau = 1.0;
  cfg.beta1 = 0.5;
  cfg.v0 = 1.0;
  ServerState st;
  init_server_state(st, {0.0}, cfg);

  server_update(st, {1.0}, cfg);
  // m = 0.5, v = 2 -> increment 0.5/(sqrt(2)+1) = (sqrt(2)-1)/2.
  const double inc1 = 0.5 / (std::sqrt(2.0) + 1.0);
  CHECK(st.m[0] == 0.5);
  CHECK(st.v[0] == 2.0);
  CHECK(st.x[0] == doctest::Approx(inc1).epsilon(1e-15));
  CHECK(st.x[0] == doctest::Approx(0.20711).epsilon(1e-4));

  server_update(st, {1.0}, cfg);
  // m = 0.75, v = 3 -> increment 0.75/(sqrt(3)+1).
  const double inc2 = 0.75 / (std::sqrt(3.0) + 1.0);
  CHECK(st.m[0] == 0.75);
  CHECK(st.v[0] == 3.0);
  CHECK(st.x[0] == doctest::Approx(inc1 + inc2).epsilon(1e-15));
  CHECK(inc2 == doctest::Approx(0.2745190528).epsilon(1e-9));
}

TEST_CASE("smoothed second moment on a scalar") {
  ServerConfig cfg;
  cfg.kind = ServerKind::adam;
  cfg.eta = 1.0;
  cfg.tau = 1.0;
  cfg.beta1 = 0.0;
  cfg.beta2 = 0.5;
  cfg.v0 = 0.0;
  ServerState st;
  init_server_state(st, {0.0}, cfg);
  server_update(st, {2.0}, cfg);
  CHECK(st.v[0] == 2.0);  // 0.5*0 + 0.5*4
  CHECK(st.x[0] == doctest::Approx(2.0 / (std::sqrt(2.0) + 1.0)).epsilon(1e-15));
  CHECK(st.x[0] == doctest::Approx(0.82843).epsilon(1e-4));
}

TEST_CASE("a unit smoothing factor freezes the second moment") {
  ServerConfig cfg;
  cfg.kind = ServerKind::adam;
  cfg.eta = 0.1;
  cfg.tau = 0.5;
  cfg.beta1 = 0.0;
  cfg.beta2 = 1.0;
  cfg.v0 = 4.0;
  ServerState st;
  init_server_state(st, {0.0}, cfg);
  RngStream noise(3);
  for (int t = 0; t < 10; ++t) {
    server_update(st, {noise.normal()}, cfg);
    CHECK(st.v[0] == 4.0);
  }
}

TEST_CASE("a zero smoothing factor tracks the latest squared delta") {
  ServerConfig cfg;
  cfg.kind = ServerKind::adam;
  cfg.eta = 1.0;
  cfg.tau = 0.1;
  cfg.beta1 = 0.0;
  cfg.beta2 = 0.0;
  cfg.v0 = 1.0;
  ServerState st;
  init_server_state(st, {0.0}, cfg);
  RngStream noise(4);
  for (int t = 0; t < 10; ++t) {
    const double delta = noise.normal();
    server_update(st, {delta}, cfg);
    CHECK(st.v[0] == delta * delta);
  }
}

TEST_CASE("negative initial moment defaults to the squared floor") {
  ServerConfig cfg;
  cfg.tau = 0.25;
  cfg.v0 = -1.0;
  CHECK(cfg.effective_v0() == 0.0625);
  cfg.v0 = 0.5;
  CHECK(cfg.effective_v0() == 0.5);

  ServerState st;
  cfg.v0 = -1.0;
  init_server_state(st, {1.0, 2.0}, cfg);
  CHECK(st.v == ParamVector{0.0625, 0.0625});
  CHECK(st.m == ParamVector{0.0, 0.0});
  CHECK(st.x == ParamVector{1.0, 2.0});
  CHECK(st.t == 0);
}

TEST_CASE("configuration validation names the broken invariant") {
  ServerConfig cfg;
  cfg.kind = ServerKind::adagrad;
  cfg.eta = 0.1;
  cfg.tau = 0.5;

  ServerConfig bad = cfg;
  bad.eta = 0.0;
  CHECK_THROWS_WITH_AS(validate_server_config(bad), doctest::Contains("eta"),
                       std::invalid_argument);

  bad = cfg;
  bad.tau = 0.0;
  CHECK_THROWS_WITH_AS(validate_server_config(bad), doctest::Contains("tau"),
                       std::invalid_argument);

  bad = cfg;
  bad.beta1 = 1.0;
  CHECK_THROWS_WITH_AS(validate_server_config(bad), doctest::Contains("beta1"),
                       std::invalid_argument);

  bad = cfg;
  bad.beta2 = 1.5;
  CHECK_THROWS_WITH_AS(validate_server_config(bad), doctest::Contains("beta2"),
                       std::invalid_argument);

  bad = cfg;
  bad.v0 = 0.1;  // below tau^2 = 0.25
  CHECK_THROWS_WITH_AS(validate_server_config(bad), doctest::Contains("v0"),
                       std::invalid_argument);

  bad = cfg;
  bad.v0 = -1.0;  // sentinel: defaults to tau^2, always legal
  CHECK_NOTHROW(validate_server_config(bad));
}

TEST_CASE("an update rejects mismatched dimensions") {
  ServerConfig cfg;
  ServerState st;
  init_server_state(st, {0.0, 0.0}, cfg);
  CHECK_THROWS_WITH_AS(server_update(st, {1.0}, cfg),
                       doctest::Contains("dimension"), std::invalid_argument);
}

TEST_CASE("kind names") {
  CHECK(std::string(to_string(ServerKind::avg)) == "avg");
  CHECK(std::string(to_string(ServerKind::adagrad)) == "adagrad");
  CHECK(std::string(to_string(ServerKind::adam)) == "adam");
}
