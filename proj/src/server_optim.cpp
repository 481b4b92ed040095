#include "fedlab/server_optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fedlab {

void validate_server_config(const ServerConfig& cfg) {
  if (!(cfg.eta > 0.0)) throw std::invalid_argument("server eta must be positive");
  if (!(cfg.tau > 0.0)) throw std::invalid_argument("server tau must be positive");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0) {
    throw std::invalid_argument("server beta1 must lie in [0, 1)");
  }
  if (cfg.beta2 < 0.0 || cfg.beta2 > 1.0) {
    throw std::invalid_argument("server beta2 must lie in [0, 1]");
  }
  if (cfg.v0 >= 0.0 && cfg.v0 < cfg.tau * cfg.tau) {
    throw std::invalid_argument("server v0 must be at least tau^2");
  }
}

void init_server_state(ServerState& state, const ParamVector& x0,
                       const ServerConfig& cfg) {
  state.x = x0;
  state.m.assign(x0.size(), 0.0);
  state.v.assign(x0.size(), cfg.effective_v0());
  state.t = 0;
}

void server_update(ServerState& state, const ParamVector& delta,
                   const ServerConfig& cfg) {
  const std::size_t d = state.x.size();
  if (delta.size() != d) {
    throw std::invalid_argument("aggregated delta dimension " +
                                std::to_string(delta.size()) +
                                " does not match model dimension " +
                                std::to_string(d));
  }
  switch (cfg.kind) {
    case ServerKind::avg:
      for (std::size_t j = 0; j < d; ++j) state.x[j] += cfg.eta * delta[j];
      break;
    case ServerKind::adagrad:
      for (std::size_t j = 0; j < d; ++j) {
        state.m[j] = cfg.beta1 * state.m[j] + (1.0 - cfg.beta1) * delta[j];
        state.v[j] += delta[j] * delta[j];
        state.x[j] += cfg.eta * state.m[j] / (std::sqrt(state.v[j]) + cfg.tau);
      }
      break;
    case ServerKind::adam:
      for (std::size_t j = 0; j < d; ++j) {
        state.m[j] = cfg.beta1 * state.m[j] + (1.0 - cfg.beta1) * delta[j];
        state.v[j] =
            cfg.beta2 * state.v[j] + (1.0 - cfg.beta2) * delta[j] * delta[j];
        state.x[j] += cfg.eta * state.m[j] / (std::sqrt(state.v[j]) + cfg.tau);
      }
      break;
  }
  ++state.t;
}

const char* to_string(ServerKind kind) {
  switch (kind) {
    case ServerKind::avg: return "avg";
    case ServerKind::adagrad: return "adagrad";
    case ServerKind::adam: return "adam";
  }
  return "?";
}

}  // namespace fedlab
