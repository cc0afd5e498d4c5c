#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "twinsim/stochastic_dag.hpp"
#include "twinsim/tsn_mgmt.hpp"
#include "twinsim/twin_graph.hpp"
#include "twinsim/workload_replica.hpp"

namespace twinsim::scenario {

struct DurationSection {
  std::string duration_key = "duration_s";
  std::optional<sdag::DurationDist> default_duration;
  std::map<std::string, sdag::DurationDist> per_twin;
};

struct TrafficSection {
  tsn::TrafficSpec spec;
  std::optional<tsn::FailureSpec> failure;
  simkit::SimTime run_until_ns = 0;
};

struct ChainSection {
  replica::ChainSpec chain;
  int fit_k = 2;
  int fit_max_iter = 200;
  double fit_tol = 1e-6;
};

struct SeedSection {
  std::uint64_t root = 1;
  std::vector<std::uint64_t> runs;  // defaults to {root}
};

// One declarative document drives every subcommand; sections are optional
// per command. Parsing is strict: unknown keys anywhere are SchemaError.
struct Scenario {
  std::optional<graph::TwinGraph> twin_graph;
  std::optional<DurationSection> durations;
  std::optional<tsn::Topology> topology;
  std::optional<tsn::MgmtConfig> mgmt;
  std::optional<TrafficSection> traffic;
  std::optional<ChainSection> chain;
  std::optional<replica::LoadProfile> profile;
  SeedSection seeds;
};

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);  // SchemaError on unreadable file

// transform() with this scenario's duration table and default.
sdag::StochasticDag dag_from_scenario(const Scenario& sc);

struct ReplicationOutcome {
  replica::RunComparison comparison;
  // fitted models per stage, ascending load
  std::map<std::string, std::vector<mixture::MixtureModel>> fitted;
};

// The full replication pipeline for one seed: synthetic ground truth,
// per-stage EM fits at the fit loads, twin run, comparison.
ReplicationOutcome run_replication(const ChainSection& chain, const replica::LoadProfile& profile,
                                   std::uint64_t seed);

tsn::FailoverReport run_failover(const Scenario& sc, std::uint64_t seed,
                                 simkit::EventLog* out_log = nullptr);

}  // namespace twinsim::scenario
