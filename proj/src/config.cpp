#include "fedlab/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fedlab/metrics.hpp"

namespace fedlab {
namespace {

struct ParseFail {
  std::string msg;
};

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (...) {
    throw ParseFail{"expected a number, got '" + s + "'"};
  }
  if (pos != s.size()) throw ParseFail{"expected a number, got '" + s + "'"};
  if (!std::isfinite(v)) throw ParseFail{"value must be finite, got '" + s + "'"};
  return v;
}

std::int64_t to_int64(const std::string& s) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (...) {
    throw ParseFail{"expected an integer, got '" + s + "'"};
  }
  if (pos != s.size()) throw ParseFail{"expected an integer, got '" + s + "'"};
  return static_cast<std::int64_t>(v);
}

std::uint64_t to_u64(const std::string& s) {
  if (!s.empty() && s[0] == '-')
    throw ParseFail{"expected a non-negative integer, got '" + s + "'"};
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (...) {
    throw ParseFail{"expected a non-negative integer, got '" + s + "'"};
  }
  if (pos != s.size())
    throw ParseFail{"expected a non-negative integer, got '" + s + "'"};
  return static_cast<std::uint64_t>(v);
}

std::size_t to_size(const std::string& s) {
  return static_cast<std::size_t>(to_u64(s));
}

bool to_bool(const std::string& s) {
  std::string l = s;
  std::transform(l.begin(), l.end(), l.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  throw ParseFail{"expected a boolean (true/false), got '" + s + "'"};
}

NoiseSpec to_noise(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ':')) parts.push_back(trim(item));
  if (parts.empty()) throw ParseFail{"empty noise spec"};
  const std::string& kind = parts[0];
  auto need = [&](std::size_t n) {
    if (parts.size() != n + 1)
      throw ParseFail{"noise '" + kind + "' takes " + std::to_string(n) +
                      " parameter(s), got '" + s + "'"};
  };
  if (kind == "gaussian") {
    need(1);
    double sigma = to_double(parts[1]);
    if (sigma < 0) throw ParseFail{"gaussian sigma must be >= 0"};
    return NoiseSpec::gaussian(sigma);
  }
  if (kind == "student_t") {
    need(1);
    double nu = to_double(parts[1]);
    if (nu <= 0) throw ParseFail{"student_t degrees of freedom must be > 0"};
    return NoiseSpec::studentT(nu);
  }
  if (kind == "cauchy") {
    need(2);
    double scale = to_double(parts[2]);
    if (scale <= 0) throw ParseFail{"cauchy scale must be > 0"};
    return NoiseSpec::cauchyAt(to_double(parts[1]), scale);
  }
  throw ParseFail{"unknown noise kind '" + kind +
                  "' (gaussian | student_t | cauchy)"};
}

LocalKind to_local_kind(const std::string& s) {
  if (s == "sgd") return LocalKind::sgd;
  if (s == "agdu") return LocalKind::agdu;
  if (s == "admu") return LocalKind::admu;
  if (s == "sm3_i") return LocalKind::sm3_i;
  if (s == "sm3_ii") return LocalKind::sm3_ii;
  if (s == "sm3_adam") return LocalKind::sm3_adam;
  throw ParseFail{"unknown optimizer kind '" + s +
                  "' (sgd | agdu | admu | sm3_i | sm3_ii | sm3_adam)"};
}

ServerKind to_server_kind(const std::string& s) {
  if (s == "avg") return ServerKind::avg;
  if (s == "adagrad") return ServerKind::adagrad;
  if (s == "adam") return ServerKind::adam;
  throw ParseFail{"unknown server kind '" + s + "' (avg | adagrad | adam)"};
}

TransmissionMode to_mode(const std::string& s) {
  if (s == "zero_init") return TransmissionMode::zero_init;
  if (s == "transmit" || s == "transmit_preconditioner")
    return TransmissionMode::transmit_preconditioner;
  if (s == "server_only") return TransmissionMode::server_only;
  if (s == "none") return TransmissionMode::none;
  throw ParseFail{"unknown transmission mode '" + s +
                  "' (zero_init | transmit_preconditioner | server_only | none)"};
}

LrSchedule to_schedule(const std::string& s) {
  if (s == "constant") return LrSchedule::constant;
  if (s == "harmonic") return LrSchedule::harmonic;
  throw ParseFail{"unknown schedule '" + s + "' (constant | harmonic)"};
}

std::vector<std::size_t> to_client_list(const std::string& s) {
  std::vector<std::size_t> out;
  for (const std::string& item : split_list(s)) {
    auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(to_size(item));
    } else {
      std::size_t lo = to_size(trim(item.substr(0, dash)));
      std::size_t hi = to_size(trim(item.substr(dash + 1)));
      if (hi < lo) throw ParseFail{"range '" + item + "' runs backwards"};
      for (std::size_t id = lo; id <= hi; ++id) out.push_back(id);
    }
  }
  return out;
}

ExperimentConfig file_defaults() {
  ExperimentConfig cfg;
  // The command-line defaults follow the best-performing adaptive-server /
  // adaptive-client pairing: Adam on both sides, server eta 1e-3 with floor
  // 1e-5, client eta 1e-2 with smoothing 1e-1.
  cfg.server.kind = ServerKind::adam;
  cfg.server.eta = 1e-3;
  cfg.server.tau = 1e-5;
  cfg.server.beta1 = 0.9;
  cfg.server.beta2 = 0.999;
  cfg.server.v0 = -1.0;
  return cfg;
}

void apply_strategy_kv(StrategyConfig& s, const std::string& key,
                       const std::string& value, bool named) {
  if (key == "kind") {
    s.kind = to_local_kind(value);
  } else if (key == "eta") {
    s.eta = to_double(value);
  } else if (key == "epsilon") {
    s.epsilon = to_double(value);
  } else if (key == "epsilon_clip") {
    s.epsilon_clip = to_double(value);
  } else if (key == "delay") {
    s.delay = to_int64(value);
  } else if (key == "beta1") {
    s.beta1 = to_double(value);
  } else if (key == "beta2") {
    s.beta2 = to_double(value);
  } else if (key == "v0") {
    s.v0 = to_double(value);
  } else if (key == "epochs") {
    s.epochs = to_int64(value);
  } else if (key == "steps_per_epoch") {
    s.steps_per_epoch = to_int64(value);
  } else if (key == "weight") {
    s.weight = to_double(value);
  } else if (key == "cover") {
    if (value != "auto" && value != "singleton" && value != "row_col")
      throw ParseFail{"unknown cover policy '" + value +
                      "' (auto | singleton | row_col)"};
    s.cover = value;
  } else if (key == "m_low") {
    s.scaling.m_low = to_double(value);
    s.has_scaling = true;
  } else if (key == "m_high") {
    s.scaling.m_high = to_double(value);
    s.has_scaling = true;
  } else if (key == "a_low") {
    s.scaling.a_low = to_double(value);
    s.has_scaling = true;
  } else if (key == "a_high") {
    s.scaling.a_high = to_double(value);
    s.has_scaling = true;
  } else if (key == "clients") {
    if (!named)
      throw ParseFail{
          "the default strategy applies to every client; client lists belong "
          "in [strategy.*] sections"};
    s.clients = to_client_list(value);
  } else {
    throw ParseFail{"unknown key"};
  }
}

StrategyConfig* find_strategy(ExperimentConfig& cfg, const std::string& name) {
  for (auto& [n, s] : cfg.strategies)
    if (n == name) return &s;
  return nullptr;
}

// Applies one key in `section` (already validated as a known section name).
void apply_kv(ExperimentConfig& cfg, const std::string& section,
              const std::string& key, const std::string& value) {
  if (section == "experiment") {
    if (key == "name") {
      cfg.name = value;
    } else if (key == "seed") {
      cfg.seeds = {to_u64(value)};
    } else if (key == "seeds") {
      cfg.seeds.clear();
      for (const std::string& item : split_list(value))
        cfg.seeds.push_back(to_u64(item));
    } else if (key == "rounds") {
      cfg.rounds = to_int64(value);
    } else if (key == "out") {
      cfg.out = value;
    } else {
      throw ParseFail{"unknown key"};
    }
  } else if (section == "problem") {
    auto& p = cfg.problem;
    if (key == "kind") {
      if (value != "quadratic" && value != "logistic")
        throw ParseFail{"unknown problem kind '" + value +
                        "' (quadratic | logistic)"};
      p.kind = value;
    } else if (key == "dimension") {
      p.dimension = to_size(value);
    } else if (key == "x0") {
      p.x0 = to_double(value);
    } else if (key == "noise") {
      p.noise = to_noise(value);
    } else if (key == "noise_overrides") {
      p.noise_overrides.clear();
      for (const std::string& item : split_list(value)) {
        auto eq = item.find('=');
        if (eq == std::string::npos)
          throw ParseFail{"override '" + item + "' is not 'client=spec'"};
        std::size_t id = to_size(trim(item.substr(0, eq)));
        p.noise_overrides[id] = to_noise(trim(item.substr(eq + 1)));
      }
    } else if (key == "classes") {
      p.classes = to_size(value);
    } else if (key == "features") {
      p.features = to_size(value);
    } else if (key == "samples") {
      p.samples = to_size(value);
    } else if (key == "test_samples") {
      p.test_samples = to_size(value);
    } else if (key == "l2") {
      p.l2 = to_double(value);
    } else if (key == "partition_alpha") {
      p.partition_alpha = to_double(value);
    } else if (key == "center_scale") {
      p.center_scale = to_double(value);
    } else if (key == "csv_path") {
      p.csv_path = value;
    } else if (key == "test_csv_path") {
      p.test_csv_path = value;
    } else if (key == "batch") {
      p.batch = to_size(value);
    } else {
      throw ParseFail{"unknown key"};
    }
  } else if (section == "server") {
    auto& s = cfg.server;
    if (key == "kind") {
      s.kind = to_server_kind(value);
    } else if (key == "eta") {
      s.eta = to_double(value);
    } else if (key == "tau") {
      s.tau = to_double(value);
    } else if (key == "beta1") {
      s.beta1 = to_double(value);
    } else if (key == "beta2") {
      s.beta2 = to_double(value);
    } else if (key == "v0") {
      s.v0 = to_double(value);
    } else {
      throw ParseFail{"unknown key"};
    }
  } else if (section == "client") {
    apply_strategy_kv(cfg.client, key, value, /*named=*/false);
  } else if (section.rfind("strategy.", 0) == 0) {
    std::string name = section.substr(9);
    StrategyConfig* s = find_strategy(cfg, name);
    if (s == nullptr) {
      cfg.strategies.emplace_back(name, StrategyConfig{});
      s = &cfg.strategies.back().second;
    }
    apply_strategy_kv(*s, key, value, /*named=*/true);
  } else if (section == "engine") {
    if (key == "clients") {
      cfg.clients = to_size(value);
    } else if (key == "fraction") {
      cfg.fraction = to_double(value);
    } else if (key == "mode") {
      cfg.mode = to_mode(value);
    } else if (key == "warmup_steps") {
      cfg.warmup_steps = to_int64(value);
    } else if (key == "schedule") {
      cfg.schedule = to_schedule(value);
    } else if (key == "schedule_margin") {
      cfg.schedule_margin = to_double(value);
    } else {
      throw ParseFail{"unknown key"};
    }
  } else if (section == "privacy") {
    cfg.has_privacy = true;
    if (key == "clip") {
      cfg.privacy.clip = to_double(value);
    } else if (key == "sigma") {
      cfg.privacy.sigma = to_double(value);
    } else {
      throw ParseFail{"unknown key"};
    }
  } else if (section == "bounds") {
    if (key == "check") {
      cfg.bound_check.enabled = to_bool(value);
    } else if (key == "G") {
      cfg.bound_check.G = to_double(value);
    } else {
      throw ParseFail{"unknown key"};
    }
  } else {
    throw ParseFail{"unknown section"};
  }
}

bool known_section(const std::string& s) {
  if (s == "experiment" || s == "problem" || s == "server" || s == "client" ||
      s == "engine" || s == "privacy" || s == "bounds")
    return true;
  return s.rfind("strategy.", 0) == 0 && s.size() > 9 &&
         s.find('.', 9) == std::string::npos;
}

// Keys that were never written keep kind-appropriate defaults: the EMA decay
// rates only make sense for the Adam-family kinds, so other kinds fall back
// to the cumulative rule (0) unless the file says otherwise.
void normalize_strategy_defaults(StrategyConfig& s,
                                 const std::set<std::string>& seen,
                                 const std::string& prefix) {
  const bool reads_beta1 =
      s.kind == LocalKind::admu || s.kind == LocalKind::sm3_adam;
  const bool reads_ema_beta2 = s.kind == LocalKind::admu;
  if (!reads_beta1 && seen.count(prefix + ".beta1") == 0) s.beta1 = 0.0;
  if (!reads_ema_beta2 && seen.count(prefix + ".beta2") == 0) s.beta2 = 0.0;
}

void validate_strategy(const StrategyConfig& s, const std::string& prefix,
                       std::size_t n_clients, const std::string& problem_kind,
                       std::vector<std::string>& errors) {
  auto err = [&](const std::string& key, const std::string& msg) {
    errors.push_back(prefix + "." + key + ": " + msg);
  };
  if (s.eta <= 0) err("eta", "must be > 0");
  if (s.epsilon <= 0) err("epsilon", "must be > 0 (zero removes the smoothing the update rule requires)");
  if (s.epsilon_clip < 0) err("epsilon_clip", "must be >= 0");
  if (s.delay < 1) err("delay", "must be >= 1");
  if (s.beta1 < 0 || s.beta1 >= 1) err("beta1", "must lie in [0, 1)");
  if (s.beta2 < 0 || s.beta2 >= 1) err("beta2", "must lie in [0, 1)");
  if (s.v0 < 0) err("v0", "must be >= 0");
  if (s.epochs < 1) err("epochs", "must be >= 1");
  if (s.steps_per_epoch < 1) err("steps_per_epoch", "must be >= 1");
  if (s.weight <= 0) err("weight", "must be > 0");
  if (s.cover == "row_col" && problem_kind == "quadratic")
    err("cover", "row_col requires a two-dimensional parameter shape; the "
                 "quadratic problem is flat");
  if (s.has_scaling) {
    if (!(s.scaling.m_low > 0) || s.scaling.m_high < s.scaling.m_low)
      err("m_low", "scaling bounds need 0 < m_low <= m_high");
    if (!(s.scaling.a_low > 0) || s.scaling.a_high < s.scaling.a_low)
      err("a_low", "scaling bounds need 0 < a_low <= a_high");
  }
  for (std::size_t id : s.clients)
    if (id >= n_clients)
      err("clients", "client " + std::to_string(id) + " out of range (clients = " +
                         std::to_string(n_clients) + ")");
}

void validate_experiment(const ExperimentConfig& cfg,
                         std::vector<std::string>& errors) {
  auto err = [&](const std::string& path, const std::string& msg) {
    errors.push_back(path + ": " + msg);
  };
  if (cfg.seeds.empty()) err("experiment.seeds", "at least one seed required");
  if (cfg.rounds < 0) err("experiment.rounds", "must be >= 0");
  if (cfg.out.empty()) err("experiment.out", "output path must not be empty");

  const auto& p = cfg.problem;
  if (p.kind == "quadratic") {
    if (p.dimension < 1) err("problem.dimension", "must be >= 1");
    for (const auto& [id, spec] : p.noise_overrides) {
      (void)spec;
      if (id >= cfg.clients)
        err("problem.noise_overrides",
            "client " + std::to_string(id) + " out of range (clients = " +
                std::to_string(cfg.clients) + ")");
    }
  } else if (p.kind == "logistic") {
    if (!p.noise_overrides.empty())
      err("problem.noise_overrides",
          "gradient-noise specs apply to the quadratic problem only");
    if (p.csv_path.empty()) {
      if (p.classes < 2) err("problem.classes", "must be >= 2");
      if (p.features < 1) err("problem.features", "must be >= 1");
      if (p.samples < 1) err("problem.samples", "must be >= 1");
      if (p.center_scale <= 0) err("problem.center_scale", "must be > 0");
    }
    if (p.l2 < 0) err("problem.l2", "must be >= 0");
    if (p.partition_alpha < 0) err("problem.partition_alpha", "must be >= 0");
    if (p.batch < 1) err("problem.batch", "must be >= 1");
  } else {
    err("problem.kind", "unknown problem kind '" + p.kind + "'");
  }

  if (cfg.server.eta <= 0) err("server.eta", "must be > 0");
  if (cfg.server.tau <= 0)
    err("server.tau",
        "must be > 0; a zero floor removes the positivity the adaptive "
        "denominator requires");
  if (cfg.server.beta1 < 0 || cfg.server.beta1 >= 1)
    err("server.beta1", "must lie in [0, 1)");
  if (cfg.server.beta2 < 0 || cfg.server.beta2 > 1)
    err("server.beta2", "must lie in [0, 1]");
  if (cfg.server.v0 >= 0 && cfg.server.v0 < cfg.server.tau * cfg.server.tau)
    err("server.v0", "must be >= tau^2 (or omitted to default to tau^2)");

  if (cfg.clients < 1) err("engine.clients", "must be >= 1");
  if (!(cfg.fraction > 0) || cfg.fraction > 1)
    err("engine.fraction", "must lie in (0, 1]");
  if (cfg.warmup_steps < 0) err("engine.warmup_steps", "must be >= 0");
  if (cfg.schedule_margin < 0 || cfg.schedule_margin >= 1)
    err("engine.schedule_margin", "must lie in [0, 1)");

  validate_strategy(cfg.client, "client", cfg.clients, p.kind, errors);
  std::set<std::size_t> assigned;
  for (const auto& [name, s] : cfg.strategies) {
    const std::string prefix = "strategy." + name;
    validate_strategy(s, prefix, cfg.clients, p.kind, errors);
    if (s.clients.empty())
      err(prefix + ".clients", "at least one client id required");
    for (std::size_t id : s.clients) {
      if (id < cfg.clients && !assigned.insert(id).second)
        err(prefix + ".clients",
            "client " + std::to_string(id) + " already pinned to another strategy");
    }
  }

  if (cfg.mode == TransmissionMode::transmit_preconditioner) {
    auto check_dense = [&](const StrategyConfig& s, const std::string& prefix) {
      if (!has_dense_preconditioner(s.kind))
        err("engine.mode",
            "transmit_preconditioner requires a dense second-moment client "
            "kind (agdu or admu); " +
                prefix + " uses " + to_string(s.kind));
    };
    check_dense(cfg.client, "client");
    for (const auto& [name, s] : cfg.strategies)
      check_dense(s, "strategy." + name);
  }

  if (cfg.has_privacy) {
    if (cfg.privacy.clip <= 0) err("privacy.clip", "must be > 0");
    if (cfg.privacy.sigma < 0) err("privacy.sigma", "must be >= 0");
  }
  if (cfg.bound_check.G <= 0) err("bounds.G", "must be > 0");
}

std::string join_errors(const std::vector<std::string>& errors) {
  std::string out;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (i) out += '\n';
    out += errors[i];
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg = file_defaults();
  std::vector<std::string> errors;
  std::set<std::string> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    std::string line = trim(raw);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back(where + ": malformed section header '" + line + "'");
        section.clear();
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      if (!known_section(section)) {
        errors.push_back(where + ": unknown section [" + section + "]");
        section.clear();
      } else if (section == "privacy") {
        cfg.has_privacy = true;
      }
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + ": expected 'key = value', got '" + line + "'");
      continue;
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      errors.push_back(where + ": empty key");
      continue;
    }
    if (section.empty()) {
      errors.push_back(where + ": key '" + key + "' outside any [section]");
      continue;
    }
    const std::string path = section + "." + key;
    try {
      apply_kv(cfg, section, key, value);
      seen.insert(path);
    } catch (const ParseFail& f) {
      errors.push_back(path + ": " + f.msg);
    }
  }

  // Plain averaging takes a unit server step unless the file set one.
  if (cfg.server.kind == ServerKind::avg && seen.count("server.eta") == 0)
    cfg.server.eta = 1.0;
  normalize_strategy_defaults(cfg.client, seen, "client");
  for (auto& [name, s] : cfg.strategies)
    normalize_strategy_defaults(s, seen, "strategy." + name);

  validate_experiment(cfg, errors);
  if (!errors.empty()) throw ConfigError(join_errors(errors));
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream o;
  o << "[experiment]\n";
  o << "name = " << cfg.name << "\n";
  o << "seeds = ";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
    o << (i ? "," : "") << cfg.seeds[i];
  o << "\n";
  o << "rounds = " << cfg.rounds << "\n";
  o << "out = " << cfg.out << "\n";

  const auto& p = cfg.problem;
  o << "\n[problem]\n";
  o << "kind = " << p.kind << "\n";
  if (p.kind == "quadratic") {
    o << "dimension = " << p.dimension << "\n";
    o << "x0 = " << g17(p.x0) << "\n";
    o << "noise = " << to_string(p.noise) << "\n";
    if (!p.noise_overrides.empty()) {
      o << "noise_overrides = ";
      bool first = true;
      for (const auto& [id, spec] : p.noise_overrides) {
        o << (first ? "" : ", ") << id << "=" << to_string(spec);
        first = false;
      }
      o << "\n";
    }
  } else {
    if (!p.csv_path.empty()) o << "csv_path = " << p.csv_path << "\n";
    if (!p.test_csv_path.empty())
      o << "test_csv_path = " << p.test_csv_path << "\n";
    o << "classes = " << p.classes << "\n";
    o << "features = " << p.features << "\n";
    o << "samples = " << p.samples << "\n";
    o << "test_samples = " << p.test_samples << "\n";
    o << "l2 = " << g17(p.l2) << "\n";
    o << "partition_alpha = " << g17(p.partition_alpha) << "\n";
    o << "center_scale = " << g17(p.center_scale) << "\n";
    o << "batch = " << p.batch << "\n";
  }

  o << "\n[server]\n";
  o << "kind = " << to_string(cfg.server.kind) << "\n";
  o << "eta = " << g17(cfg.server.eta) << "\n";
  o << "tau = " << g17(cfg.server.tau) << "\n";
  o << "beta1 = " << g17(cfg.server.beta1) << "\n";
  o << "beta2 = " << g17(cfg.server.beta2) << "\n";
  if (cfg.server.v0 >= 0) o << "v0 = " << g17(cfg.server.v0) << "\n";

  auto emit_strategy = [&o](const StrategyConfig& s) {
    o << "kind = " << to_string(s.kind) << "\n";
    o << "eta = " << g17(s.eta) << "\n";
    o << "epsilon = " << g17(s.epsilon) << "\n";
    o << "epsilon_clip = " << g17(s.epsilon_clip) << "\n";
    o << "delay = " << s.delay << "\n";
    o << "beta1 = " << g17(s.beta1) << "\n";
    o << "beta2 = " << g17(s.beta2) << "\n";
    o << "v0 = " << g17(s.v0) << "\n";
    o << "epochs = " << s.epochs << "\n";
    o << "steps_per_epoch = " << s.steps_per_epoch << "\n";
    o << "weight = " << g17(s.weight) << "\n";
    o << "cover = " << s.cover << "\n";
    if (s.has_scaling) {
      o << "m_low = " << g17(s.scaling.m_low) << "\n";
      o << "m_high = " << g17(s.scaling.m_high) << "\n";
      o << "a_low = " << g17(s.scaling.a_low) << "\n";
      o << "a_high = " << g17(s.scaling.a_high) << "\n";
    }
  };

  o << "\n[client]\n";
  emit_strategy(cfg.client);
  for (const auto& [name, s] : cfg.strategies) {
    o << "\n[strategy." << name << "]\n";
    emit_strategy(s);
    o << "clients = ";
    for (std::size_t i = 0; i < s.clients.size(); ++i)
      o << (i ? "," : "") << s.clients[i];
    o << "\n";
  }

  o << "\n[engine]\n";
  o << "clients = " << cfg.clients << "\n";
  o << "fraction = " << g17(cfg.fraction) << "\n";
  o << "mode = " << to_string(cfg.mode) << "\n";
  o << "warmup_steps = " << cfg.warmup_steps << "\n";
  o << "schedule = "
    << (cfg.schedule == LrSchedule::harmonic ? "harmonic" : "constant") << "\n";
  o << "schedule_margin = " << g17(cfg.schedule_margin) << "\n";

  if (cfg.has_privacy) {
    o << "\n[privacy]\n";
    o << "clip = " << g17(cfg.privacy.clip) << "\n";
    o << "sigma = " << g17(cfg.privacy.sigma) << "\n";
  }

  o << "\n[bounds]\n";
  o << "check = " << (cfg.bound_check.enabled ? "true" : "false") << "\n";
  o << "G = " << g17(cfg.bound_check.G) << "\n";
  return o.str();
}

void apply_override(ExperimentConfig& cfg, const std::string& key_path,
                    const std::string& value) {
  std::string section, key;
  if (key_path.rfind("strategy.", 0) == 0) {
    auto dot = key_path.find('.', 9);
    if (dot == std::string::npos)
      throw ConfigError(key_path + ": expected strategy.<name>.<key>");
    section = key_path.substr(0, dot);
    key = key_path.substr(dot + 1);
    if (find_strategy(cfg, section.substr(9)) == nullptr)
      throw ConfigError(key_path + ": no such strategy section");
  } else {
    auto dot = key_path.find('.');
    if (dot == std::string::npos)
      throw ConfigError(key_path + ": expected <section>.<key>");
    section = key_path.substr(0, dot);
    key = key_path.substr(dot + 1);
    if (!known_section(section))
      throw ConfigError(key_path + ": unknown section '" + section + "'");
  }
  try {
    apply_kv(cfg, section, key, trim(value));
  } catch (const ParseFail& f) {
    throw ConfigError(key_path + ": " + f.msg);
  }
}

namespace {

// Reserved setup channels under round 0 (training streams always use
// round >= 1): 0 = dataset synthesis, 1 = partitioning.
constexpr std::uint64_t kDataChannel = 0;
constexpr std::uint64_t kPartitionChannel = 1;

OptimizerStrategy materialize_strategy(const StrategyConfig& s,
                                       const std::vector<std::size_t>& shape,
                                       std::deque<Cover>& covers) {
  OptimizerStrategy out;
  out.local.kind = s.kind;
  out.local.eta = s.eta;
  out.local.epsilon = s.epsilon;
  out.local.epsilon_clip = s.epsilon_clip;
  out.local.delay = s.delay;
  out.local.beta1 = s.beta1;
  out.local.beta2 = s.beta2;
  out.local.v0 = s.v0;
  if (is_sm3_kind(s.kind)) {
    CoverPolicy policy;
    if (s.cover == "singleton") {
      policy = CoverPolicy::singleton;
    } else if (s.cover == "row_col") {
      policy = CoverPolicy::row_col;
    } else {
      policy = shape.size() == 2 ? CoverPolicy::row_col : CoverPolicy::singleton;
    }
    covers.emplace_back(build_cover(shape, policy));
    out.local.cover = &covers.back();
  }
  out.epochs = s.epochs;
  out.steps_per_epoch = s.steps_per_epoch;
  out.weight = s.weight;
  if (s.has_scaling) out.scaling = s.scaling;
  return out;
}

}  // namespace

RunPlan build_run(const ExperimentConfig& cfg, std::uint64_t seed) {
  {
    std::vector<std::string> errors;
    validate_experiment(cfg, errors);
    if (!errors.empty()) throw ConfigError(join_errors(errors));
  }

  RunPlan plan;
  std::vector<std::size_t> shape;

  if (cfg.problem.kind == "quadratic") {
    QuadraticSpec spec;
    spec.dim = cfg.problem.dimension;
    spec.client_noise.assign(cfg.clients, cfg.problem.noise);
    for (const auto& [id, noise] : cfg.problem.noise_overrides)
      spec.client_noise[id] = noise;
    plan.problem = std::make_unique<QuadraticProblem>(std::move(spec));
    plan.x0.assign(cfg.problem.dimension, cfg.problem.x0);
    shape = {cfg.problem.dimension};
  } else {
    Dataset train, test;
    if (!cfg.problem.csv_path.empty()) {
      train = load_csv_dataset(cfg.problem.csv_path);
      if (!cfg.problem.test_csv_path.empty()) {
        test = load_csv_dataset(cfg.problem.test_csv_path);
        if (test.features != train.features)
          throw ConfigError(
              "problem.test_csv_path: feature count differs from the train "
              "set");
        test.classes = std::max(test.classes, train.classes);
        train.classes = test.classes;
      }
    } else {
      // One draw covers train and test so both share the same class centers.
      Dataset all = make_blob_dataset(
          cfg.problem.samples + cfg.problem.test_samples, cfg.problem.features,
          cfg.problem.classes, cfg.problem.center_scale,
          derive_stream(seed, 0, kDataChannel));
      const std::size_t f = all.features;
      train.features = test.features = f;
      train.classes = test.classes = all.classes;
      const std::size_t n_train = cfg.problem.samples;
      train.x.assign(all.x.begin(), all.x.begin() + n_train * f);
      train.y.assign(all.y.begin(), all.y.begin() + n_train);
      test.x.assign(all.x.begin() + n_train * f, all.x.end());
      test.y.assign(all.y.begin() + n_train, all.y.end());
    }

    std::vector<std::vector<std::size_t>> client_rows;
    if (cfg.problem.partition_alpha > 0) {
      client_rows =
          dirichlet_partition(train.y, cfg.clients, cfg.problem.partition_alpha,
                              derive_stream(seed, 0, kPartitionChannel));
    } else {
      client_rows.resize(cfg.clients);
      const std::size_t n = train.rows();
      for (std::size_t c = 0; c < cfg.clients; ++c) {
        const std::size_t lo = n * c / cfg.clients;
        const std::size_t hi = n * (c + 1) / cfg.clients;
        for (std::size_t r = lo; r < hi; ++r) client_rows[c].push_back(r);
      }
    }

    shape = {train.classes, train.features};
    plan.x0.assign(train.classes * train.features, 0.0);
    plan.problem = std::make_unique<LogisticProblem>(
        std::move(train), std::move(test), std::move(client_rows),
        cfg.problem.l2, cfg.problem.batch);
  }

  plan.engine.seed = seed;
  plan.engine.n_clients = cfg.clients;
  plan.engine.fraction = cfg.fraction;
  plan.engine.mode = cfg.mode;
  plan.engine.server = cfg.server;
  plan.engine.strategy = materialize_strategy(cfg.client, shape, plan.covers);
  for (const auto& [name, s] : cfg.strategies) {
    OptimizerStrategy strat = materialize_strategy(s, shape, plan.covers);
    for (std::size_t id : s.clients) plan.engine.per_client[id] = strat;
  }
  if (cfg.has_privacy) plan.engine.privacy = cfg.privacy;
  plan.engine.warmup_steps = cfg.warmup_steps;
  plan.engine.schedule = cfg.schedule;
  plan.engine.schedule_margin = cfg.schedule_margin;
  plan.engine.bound_check = cfg.bound_check;

  plan.rounds = cfg.rounds;

  auto& b = plan.bounds;
  b.eta = cfg.server.eta;
  b.eta_l = cfg.client.eta;
  b.tau = cfg.server.tau;
  b.eps = cfg.client.epsilon;
  b.eps_s = cfg.client.epsilon_clip;
  b.beta1_srv = cfg.server.beta1;
  if (plan.problem->uses_dataset()) {
    std::size_t max_steps = 0;
    for (std::size_t c = 0; c < cfg.clients; ++c)
      max_steps = std::max(max_steps, plan.problem->steps_per_epoch(c));
    b.K = cfg.client.epochs * static_cast<std::int64_t>(max_steps);
    if (b.K < 1) b.K = 1;
  } else {
    b.K = cfg.client.epochs * cfg.client.steps_per_epoch;
  }
  b.z = cfg.client.delay;
  b.d = static_cast<std::int64_t>(plan.problem->dim());
  b.G = cfg.bound_check.G;
  b.v0 = cfg.client.v0;
  b.v0_srv = cfg.server.effective_v0();
  b.T = cfg.rounds;
  b.L = 1.0;
  b.f_gap = plan.problem->train_loss(plan.x0);
  return plan;
}

}  // namespace fedlab
