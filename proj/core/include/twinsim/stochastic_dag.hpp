#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "twinsim/mixture.hpp"
#include "twinsim/rng.hpp"
#include "twinsim/twin_graph.hpp"

namespace twinsim::sdag {

struct DiscretePoint {
  double value = 0.0;  // seconds
  double prob = 0.0;

  bool operator==(const DiscretePoint&) const = default;
};

// Node duration distribution, values in seconds. Construction validates:
// probabilities sum to 1 +- 1e-9, lo <= hi, rate > 0, values >= 0.
class DurationDist {
 public:
  enum class Kind { Deterministic, Uniform, Exponential, Discrete, Mixture };

  static DurationDist deterministic(double seconds);
  static DurationDist uniform(double lo, double hi);
  static DurationDist exponential(double rate);
  static DurationDist discrete(std::vector<DiscretePoint> points);
  // Mixture samples are in ms and are scaled to seconds here.
  static DurationDist mixture(mixture::MixtureModel model);

  Kind kind() const { return kind_; }
  double sample(Rng& rng) const;

  // Discrete support; Deterministic is promoted to a single point.
  // UnsupportedDist for the continuous kinds.
  std::vector<DiscretePoint> support() const;

  double deterministic_value() const { return a_; }
  double lo() const { return a_; }
  double hi() const { return b_; }
  double rate() const { return a_; }
  const std::vector<DiscretePoint>& points() const { return points_; }
  const mixture::MixtureModel& mixture_model() const { return mixture_; }

  bool operator==(const DurationDist&) const = default;

 private:
  DurationDist() = default;
  Kind kind_ = Kind::Deterministic;
  double a_ = 0.0;
  double b_ = 0.0;
  std::vector<DiscretePoint> points_;
  mixture::MixtureModel mixture_;
};

struct DagNode {
  std::string id;
  DurationDist duration;

  bool operator==(const DagNode&) const = default;
};

// Activity DAG with stochastic durations. Nodes are kept sorted by id;
// make_dag validates uniqueness and acyclicity.
struct StochasticDag {
  std::vector<DagNode> nodes;
  std::set<std::pair<std::string, std::string>> edges;  // (before, after)

  bool operator==(const StochasticDag&) const = default;
};

StochasticDag make_dag(std::vector<DagNode> nodes,
                       std::set<std::pair<std::string, std::string>> edges);

// One DAG node per twin; Contains/DependsOn edges become precedence,
// ConnectsTo edges are topology and are dropped. Duration lookup order:
// durations table by twin id, then a numeric twin state value under
// duration_key (treated as Deterministic seconds), then default_duration.
// MissingDuration when all three miss; InvalidGraph when validate() fails.
StochasticDag transform(const graph::TwinGraph& g, const std::string& duration_key,
                        const std::map<std::string, DurationDist>& durations = {},
                        const std::optional<DurationDist>& default_duration = {});

// Exact makespan distribution by full enumeration of joint outcomes.
// Requires Discrete (or Deterministic) durations and a joint support of at
// most 10^6 outcomes. Result is sorted by value, probabilities sum to 1.
std::vector<DiscretePoint> completion_exact(const StochasticDag& dag);

struct CompletionStats {
  std::uint64_t samples = 0;
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  std::optional<double> deadline;
  double deadline_prob = 0.0;  // meaningful only when deadline is set

  std::string to_json() const;  // canonical single line

  bool operator==(const CompletionStats&) const = default;
};

// Replication i draws from a stream seeded by (seed, rep_offset + i), so
// splitting a run into seeded halves merges to the same sample multiset.
std::vector<double> makespan_samples(const StochasticDag& dag, std::uint64_t n,
                                     std::uint64_t seed, std::uint64_t rep_offset = 0);

CompletionStats completion_mc(const StochasticDag& dag, std::uint64_t n, std::uint64_t seed,
                              std::optional<double> deadline = {});

// Nearest-rank percentile, 0 < p < 1, shared by every stats consumer.
double nearest_rank(std::vector<double> sorted_ascending, double p);

// Canonical JSON descriptor; dag_from_json(export_dag(d)) == d.
std::string export_dag(const StochasticDag& dag);
StochasticDag dag_from_json(const std::string& text);

}  // namespace twinsim::sdag
