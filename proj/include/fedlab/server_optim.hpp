#pragma once

#include <cstdint>

#include "fedlab/local_optim.hpp"

namespace fedlab {

enum class ServerKind { avg, adagrad, adam };

struct ServerConfig {
  ServerKind kind = ServerKind::adagrad;
  double eta = 1e-3;   // server learning rate, > 0
  double tau = 1e-3;   // denominator floor, > 0
  double beta1 = 0.0;  // momentum on aggregated pseudo-gradients, in [0, 1)
  double beta2 = 0.0;  // adam second-moment EMA, in [0, 1]
  // Initial second moment; negative means "use tau^2".  Config validation
  // enforces v0 >= tau^2.
  double v0 = -1.0;

  double effective_v0() const { return v0 < 0.0 ? tau * tau : v0; }
};

struct ServerState {
  ParamVector x;  // global iterate
  ParamVector m;  // pseudo-gradient momentum
  ParamVector v;  // second moment
  std::int64_t t = 0;  // completed server rounds
};

void validate_server_config(const ServerConfig& cfg);

void init_server_state(ServerState& state, const ParamVector& x0,
                       const ServerConfig& cfg);

// One server round given the aggregated pseudo-gradient delta (the mean of
// client deltas).  All three rules ADD their increment to x:
//   avg:     x += eta * delta
//   adagrad: m = b1*m + (1-b1)*delta;  v += delta^2;        x += eta*m/(sqrt(v)+tau)
//   adam:    m = b1*m + (1-b1)*delta;  v = b2*v+(1-b2)*delta^2 (no debias);
//            x += eta*m/(sqrt(v)+tau)
void server_update(ServerState& state, const ParamVector& delta,
                   const ServerConfig& cfg);

const char* to_string(ServerKind kind);

}  // namespace fedlab
