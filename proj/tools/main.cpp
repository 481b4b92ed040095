#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "fedlab/config.hpp"
#include "fedlab/metrics.hpp"
#include "fedlab/selfcheck.hpp"

namespace fs = std::filesystem;
using namespace fedlab;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

// "dir/name.csv" -> {"dir/name", ".csv"}
std::pair<std::string, std::string> split_ext(const std::string& out) {
  fs::path p(out);
  fs::path stem = p.parent_path() / p.stem();
  return {stem.string(), p.extension().string()};
}

int cmd_run(const std::string& config_path, const std::string& out_override,
            bool has_seed, std::uint64_t seed_override) {
  ExperimentConfig cfg = load_config(config_path);
  if (!out_override.empty()) cfg.out = out_override;
  const std::vector<std::uint64_t> seeds =
      has_seed ? std::vector<std::uint64_t>{seed_override} : cfg.seeds;
  const auto [stem, ext] = split_ext(cfg.out);

  std::vector<MetricsTable> tables;
  for (std::uint64_t seed : seeds) {
    RunPlan plan = build_run(cfg, seed);
    Engine engine(plan.engine, *plan.problem, plan.x0);
    const std::vector<RoundRecord> records = engine.run_experiment(plan.rounds);

    const std::string run_stem =
        seeds.size() == 1 ? stem : stem + "_s" + std::to_string(seed);
    const std::string csv_path = run_stem + (ext.empty() ? ".csv" : ext);
    emit_metrics(records, csv_path);
    std::cout << "wrote " << csv_path << "\n";

    const BoundReport report = theorem_rhs(plan.bounds, engine.min_grad_sq());
    const std::string bounds_path = run_stem + "_bounds.txt";
    write_text(bounds_path, bound_report_text(report));
    std::cout << "wrote " << bounds_path << "\n";

    tables.push_back(parse_metrics(metrics_to_string(records)));
  }

  if (seeds.size() > 1) {
    const std::string summary_path = stem + "_summary.csv";
    write_text(summary_path, ensemble_to_csv(summarize_ensemble(tables)));
    std::cout << "wrote " << summary_path << "\n";
  }
  return 0;
}

struct GridAxis {
  std::string path;
  std::vector<std::string> values;
};

std::vector<GridAxis> parse_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grid file: " + path);
  std::vector<GridAxis> axes;
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    // Trim.
    auto b = raw.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    auto e = raw.find_last_not_of(" \t");
    std::string line = raw.substr(b, e - b + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("grid line " + std::to_string(lineno) +
                        ": expected 'section.key = v1, v2, ...'");
    GridAxis axis;
    auto trim = [](std::string s) {
      auto lb = s.find_first_not_of(" \t");
      if (lb == std::string::npos) return std::string();
      auto le = s.find_last_not_of(" \t");
      return s.substr(lb, le - lb + 1);
    };
    axis.path = trim(line.substr(0, eq));
    std::stringstream vs(line.substr(eq + 1));
    std::string v;
    while (std::getline(vs, v, ',')) {
      v = trim(v);
      if (!v.empty()) axis.values.push_back(v);
    }
    if (axis.path.empty() || axis.values.empty())
      throw ConfigError("grid line " + std::to_string(lineno) +
                        ": empty key or value list");
    axes.push_back(std::move(axis));
  }
  if (axes.empty()) throw ConfigError("grid file has no axes: " + path);
  return axes;
}

int cmd_sweep(const std::string& config_path, const std::string& grid_path,
              const std::string& out_dir) {
  const ExperimentConfig base = load_config(config_path);
  const std::vector<GridAxis> axes = parse_grid(grid_path);
  fs::create_directories(out_dir);

  std::size_t cells = 1;
  for (const GridAxis& a : axes) cells *= a.values.size();

  std::ostringstream index;
  index << "cell,overrides,files\n";
  std::vector<std::size_t> pick(axes.size(), 0);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    ExperimentConfig cfg = base;
    std::string overrides;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const std::string& value = axes[a].values[pick[a]];
      apply_override(cfg, axes[a].path, value);
      if (a) overrides += ';';
      overrides += axes[a].path + "=" + value;
    }

    std::string files;
    for (std::uint64_t seed : cfg.seeds) {
      RunPlan plan = build_run(cfg, seed);
      Engine engine(plan.engine, *plan.problem, plan.x0);
      const std::vector<RoundRecord> records =
          engine.run_experiment(plan.rounds);
      const std::string name = "cell" + std::to_string(cell) + "_s" +
                               std::to_string(seed) + ".csv";
      emit_metrics(records, (fs::path(out_dir) / name).string());
      if (!files.empty()) files += ';';
      files += name;
    }
    index << cell << ',' << overrides << ',' << files << "\n";
    std::cout << "cell " << cell << ": " << overrides << "\n";

    // Odometer increment over the axes.
    for (std::size_t a = axes.size(); a-- > 0;) {
      if (++pick[a] < axes[a].values.size()) break;
      pick[a] = 0;
    }
  }
  write_text((fs::path(out_dir) / "index.csv").string(), index.str());
  std::cout << "wrote " << (fs::path(out_dir) / "index.csv").string() << "\n";
  return 0;
}

int cmd_verify(bool full) {
  const std::vector<CheckResult> results =
      full ? run_all_checks() : run_fast_checks();
  bool all_pass = true;
  for (const CheckResult& r : results) {
    std::cout << format_check_line(r) << "\n";
    all_pass = all_pass && r.pass;
  }
  std::cout << (all_pass ? "verification passed" : "verification FAILED")
            << "\n";
  return all_pass ? 0 : 3;
}

int cmd_report(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (entry.path().extension() != ".csv") continue;
    if (name == "index.csv" || name == "summary.csv") continue;
    if (name.size() > 12 && name.rfind("_summary.csv") == name.size() - 12)
      continue;
    files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());

  std::vector<MetricsTable> tables;
  for (const std::string& f : files) {
    try {
      MetricsTable t = load_metrics(f);
      t.col("round");
      t.col("grad_norm");
      tables.push_back(std::move(t));
    } catch (const std::exception&) {
      std::cerr << "skipping non-metrics csv: " << f << "\n";
    }
  }
  if (tables.empty()) {
    std::cerr << "no metrics CSVs found in " << dir << "\n";
    return 1;
  }
  const std::size_t rounds = tables[0].rows.size();
  for (const MetricsTable& t : tables) {
    if (t.rows.size() != rounds) {
      std::cerr << "metrics files disagree on round count; aggregate one "
                   "experiment at a time\n";
      return 1;
    }
  }

  const EnsembleSummary summary = summarize_ensemble(tables);
  const std::string out_path = (fs::path(dir) / "summary.csv").string();
  write_text(out_path, ensemble_to_csv(summary));

  std::cout << "runs: " << tables.size() << ", rounds: " << rounds << "\n";
  if (!summary.mean_train.empty()) {
    const std::size_t last = summary.mean_train.size() - 1;
    std::cout << "final train loss: " << g17(summary.mean_train[last])
              << " +/- " << g17(summary.ci_train[last]) << "\n";
    std::cout << "final test loss:  " << g17(summary.mean_test[last])
              << " +/- " << g17(summary.ci_test[last]) << "\n";
    std::cout << "final grad norm:  " << g17(summary.mean_grad[last])
              << " +/- " << g17(summary.ci_grad[last]) << "\n";
    std::vector<double> min_so_far;
    double m = std::numeric_limits<double>::infinity();
    for (double v : summary.mean_grad) {
      m = std::min(m, v);
      min_so_far.push_back(m);
    }
    try {
      std::cout << "min-so-far grad-norm log-log slope: "
                << g17(fit_rate(min_so_far)) << "\n";
    } catch (const std::exception& e) {
      std::cout << "min-so-far grad-norm log-log slope: n/a (" << e.what()
                << ")\n";
    }
  }
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "deterministic simulation laboratory for jointly adaptive federated "
      "optimization"};
  app.require_subcommand(1);

  std::string config_path, out_override, grid_path, report_dir;
  std::string out_dir = "sweep_out";
  std::uint64_t seed_override = 0;
  bool full = false;

  CLI::App* run_cmd = app.add_subcommand(
      "run", "run one experiment; writes metrics CSV(s) and a bound report");
  run_cmd->add_option("config", config_path, "experiment config file")
      ->required();
  run_cmd->add_option("--out", out_override,
                      "override the configured output path");
  CLI::Option* seed_opt =
      run_cmd->add_option("--seed", seed_override, "run only this seed");

  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "Cartesian hyperparameter sweep: one CSV per cell and seed "
               "plus an index file");
  sweep_cmd->add_option("config", config_path, "experiment config file")
      ->required();
  sweep_cmd
      ->add_option("--grid", grid_path,
                   "grid file; each line 'section.key = v1, v2, ...'")
      ->required();
  sweep_cmd->add_option("--out-dir", out_dir,
                        "output directory (default sweep_out)");

  CLI::App* verify_cmd = app.add_subcommand(
      "verify", "run the invariant/oracle suite and exit nonzero on failure");
  verify_cmd->add_flag("--full", full,
                       "run the complete acceptance suite (slow)");

  CLI::App* report_cmd = app.add_subcommand(
      "report", "aggregate multi-seed metrics CSVs into mean/CI tables");
  report_cmd->add_option("dir", report_dir, "directory of metrics CSVs")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run_cmd->parsed())
      return cmd_run(config_path, out_override, seed_opt->count() > 0,
                     seed_override);
    if (sweep_cmd->parsed()) return cmd_sweep(config_path, grid_path, out_dir);
    if (verify_cmd->parsed()) return cmd_verify(full);
    if (report_cmd->parsed()) return cmd_report(report_dir);
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return 2;
  } catch (const RoundError& e) {
    std::cerr << "round failure: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error:\n" << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
