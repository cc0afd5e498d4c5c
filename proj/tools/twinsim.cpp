// Command-line front end: scenario ingestion, pipeline orchestration and
// canonical result persistence. Exit codes: 0 success, 1 domain error,
// 2 usage/schema error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "twinsim/errors.hpp"
#include "twinsim/mixture.hpp"
#include "twinsim/scenario.hpp"
#include "twinsim/stochastic_dag.hpp"
#include "twinsim/textfmt.hpp"
#include "twinsim/tsn_mgmt.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace twinsim;

struct Options {
  std::string scenario_path;
  std::string trace_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "json";
  std::uint64_t n = 100000;
  std::optional<double> deadline;
  bool exact = false;
  int k = 2;
  int max_iter = 200;
  double tol = 1e-6;
};

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(Errc::SchemaError, "cannot write '" + path.string() + "'");
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::SchemaError, "cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::uint64_t pick_seed(const Options& opt, const scenario::Scenario& sc) {
  return opt.seed ? *opt.seed : sc.seeds.root;
}

int cmd_validate(const Options& opt) {
  scenario::Scenario sc = scenario::load_scenario(opt.scenario_path);
  if (!sc.twin_graph) raise(Errc::SchemaError, "scenario has no twin_graph section");
  std::vector<graph::Violation> violations = sc.twin_graph->validate();
  for (const graph::Violation& v : violations) std::cout << v.to_string() << "\n";
  if (!violations.empty()) return 1;
  std::cout << "valid\n";
  return 0;
}

ordered_json exact_stats(const std::vector<sdag::DiscretePoint>& dist,
                         const std::optional<double>& deadline) {
  double mean = 0.0;
  for (const auto& p : dist) mean += p.value * p.prob;
  auto quantile = [&](double q) {
    double acc = 0.0;
    for (const auto& p : dist) {
      acc += p.prob;
      if (acc >= q - 1e-12) return p.value;
    }
    return dist.back().value;
  };
  ordered_json j;
  j["mean"] = mean;
  j["p50"] = quantile(0.50);
  j["p95"] = quantile(0.95);
  j["p99"] = quantile(0.99);
  if (deadline) {
    double acc = 0.0;
    for (const auto& p : dist) {
      if (p.value <= *deadline) acc += p.prob;
    }
    j["deadline"] = *deadline;
    j["deadline_prob"] = acc;
  }
  return j;
}

int cmd_evaluate(const Options& opt) {
  scenario::Scenario sc = scenario::load_scenario(opt.scenario_path);
  if (!sc.twin_graph) raise(Errc::SchemaError, "scenario has no twin_graph section");
  if (!sc.durations) raise(Errc::SchemaError, "scenario has no durations section");
  sdag::StochasticDag dag = scenario::dag_from_scenario(sc);

  std::string payload;
  std::string ext = opt.format;
  if (opt.exact) {
    std::vector<sdag::DiscretePoint> dist = sdag::completion_exact(dag);
    if (opt.format == "csv") {
      payload = "value,prob\n";
      for (const auto& p : dist) {
        payload += fmt_double(p.value) + "," + fmt_double(p.prob) + "\n";
      }
    } else {
      ordered_json j;
      j["distribution"] = ordered_json::array();
      for (const auto& p : dist) {
        ordered_json jp;
        jp["value"] = p.value;
        jp["prob"] = p.prob;
        j["distribution"].push_back(jp);
      }
      j["stats"] = exact_stats(dist, opt.deadline);
      payload = j.dump() + "\n";
    }
  } else {
    sdag::CompletionStats stats =
        sdag::completion_mc(dag, opt.n, pick_seed(opt, sc), opt.deadline);
    if (opt.format == "csv") {
      payload = "samples,mean,p50,p95,p99\n" + std::to_string(stats.samples) + "," +
                fmt_double(stats.mean) + "," + fmt_double(stats.p50) + "," +
                fmt_double(stats.p95) + "," + fmt_double(stats.p99) + "\n";
    } else {
      payload = stats.to_json() + "\n";
    }
  }
  std::cout << payload;
  if (!opt.out.empty()) write_file(fs::path(opt.out) / ("evaluate." + ext), payload);
  return 0;
}

int cmd_export_dag(const Options& opt) {
  scenario::Scenario sc = scenario::load_scenario(opt.scenario_path);
  if (!sc.twin_graph) raise(Errc::SchemaError, "scenario has no twin_graph section");
  std::string payload = sdag::export_dag(scenario::dag_from_scenario(sc));
  std::cout << payload;
  if (!opt.out.empty()) write_file(fs::path(opt.out) / "dag.json", payload);
  return 0;
}

int cmd_failover(const Options& opt) {
  scenario::Scenario sc = scenario::load_scenario(opt.scenario_path);
  if (opt.out.empty()) raise(Errc::SchemaError, "failover needs --out <dir>");
  simkit::EventLog log;
  tsn::FailoverReport report = scenario::run_failover(sc, pick_seed(opt, sc), &log);
  std::string summary = report.summary_json() + "\n";
  write_file(fs::path(opt.out) / "latency.csv", report.series_csv());
  write_file(fs::path(opt.out) / "summary.json", summary);
  write_file(fs::path(opt.out) / "events.jsonl", log.to_jsonl());
  std::cout << summary;
  return 0;
}

int cmd_replicate(const Options& opt) {
  scenario::Scenario sc = scenario::load_scenario(opt.scenario_path);
  if (!sc.chain) raise(Errc::SchemaError, "scenario has no chain section");
  if (!sc.profile) raise(Errc::SchemaError, "scenario has no profile section");
  if (opt.out.empty()) raise(Errc::SchemaError, "replicate needs --out <dir>");

  std::vector<std::uint64_t> seeds = opt.seed ? std::vector<std::uint64_t>{*opt.seed}
                                              : sc.seeds.runs;
  for (std::uint64_t seed : seeds) {
    scenario::ReplicationOutcome outcome =
        scenario::run_replication(*sc.chain, *sc.profile, seed);
    std::string tag = "s" + std::to_string(seed);
    write_file(fs::path(opt.out) / ("comparison_" + tag + ".csv"),
               outcome.comparison.to_csv());
    ordered_json jm;
    jm["stages"] = ordered_json::array();
    for (const auto& [stage_id, models] : outcome.fitted) {
      ordered_json js;
      js["id"] = stage_id;
      js["models"] = ordered_json::array();
      for (const mixture::MixtureModel& m : models) {
        js["models"].push_back(ordered_json::parse(mixture::to_json(m)));
      }
      jm["stages"].push_back(js);
    }
    write_file(fs::path(opt.out) / ("models_" + tag + ".json"), jm.dump() + "\n");

    double max_err_mean = 0.0, max_err_p99 = 0.0;
    for (const auto& row : outcome.comparison.rows) {
      max_err_mean = std::max(max_err_mean, row.err_mean);
      max_err_p99 = std::max(max_err_p99, row.err_p99);
    }
    std::cout << "seed " << seed << " loads " << outcome.comparison.rows.size()
              << " max_err_mean " << fmt_double(max_err_mean) << " max_err_p99 "
              << fmt_double(max_err_p99) << "\n";
  }
  return 0;
}

int cmd_fit(const Options& opt) {
  std::vector<mixture::Trace> traces = mixture::traces_from_csv(read_file(opt.trace_path));
  if (traces.empty()) raise(Errc::TooFewSamples, "trace file has no samples");
  std::uint64_t seed = opt.seed.value_or(1);
  std::string payload;
  for (const mixture::Trace& trace : traces) {
    mixture::FitResult fit = mixture::fit_em(trace, opt.k, seed, opt.max_iter, opt.tol);
    payload += mixture::to_json(fit.model) + "\n";
  }
  std::cout << payload;
  if (!opt.out.empty()) write_file(fs::path(opt.out) / "models.json", payload);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twinsim: digital twin network modeling and simulation"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;

  app.add_option("--seed", opt.seed, "override the scenario root seed");
  app.add_option("--out", opt.out, "output directory");
  app.add_option("--format", opt.format, "json|csv")
      ->check(CLI::IsMember({"json", "csv"}));

  CLI::App* validate = app.add_subcommand("validate", "schema + twin graph validation");
  validate->add_option("scenario", opt.scenario_path, "scenario file")->required();

  CLI::App* evaluate = app.add_subcommand("evaluate", "transform and evaluate completion time");
  evaluate->add_option("scenario", opt.scenario_path, "scenario file")->required();
  evaluate->add_option("--n", opt.n, "Monte Carlo replications");
  evaluate->add_option("--deadline", opt.deadline, "deadline in seconds");
  evaluate->add_flag("--exact", opt.exact, "exact enumeration (all-Discrete durations)");

  CLI::App* exportdag = app.add_subcommand("export-dag", "emit the stochastic DAG descriptor");
  exportdag->add_option("scenario", opt.scenario_path, "scenario file")->required();

  CLI::App* failover = app.add_subcommand("failover", "run the failover experiment");
  failover->add_option("scenario", opt.scenario_path, "scenario file")->required();

  CLI::App* replicate = app.add_subcommand("replicate", "ground truth, fit, twin run, compare");
  replicate->add_option("scenario", opt.scenario_path, "scenario file")->required();

  CLI::App* fit = app.add_subcommand("fit", "fit mixture models to a trace CSV");
  fit->add_option("trace", opt.trace_path, "trace CSV (load_rps,response_ms)")->required();
  fit->add_option("--k", opt.k, "components per model");
  fit->add_option("--max-iter", opt.max_iter, "EM iteration cap");
  fit->add_option("--tol", opt.tol, "log-likelihood convergence tolerance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*validate) return cmd_validate(opt);
    if (*evaluate) return cmd_evaluate(opt);
    if (*exportdag) return cmd_export_dag(opt);
    if (*failover) return cmd_failover(opt);
    if (*replicate) return cmd_replicate(opt);
    if (*fit) return cmd_fit(opt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::SchemaError ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
