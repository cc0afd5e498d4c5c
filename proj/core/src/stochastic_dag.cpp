#include "twinsim/stochastic_dag.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <unordered_map>

#include "twinsim/errors.hpp"
#include "twinsim/textfmt.hpp"

#include "json_detail.hpp"

namespace twinsim::sdag {

namespace {

using nlohmann::ordered_json;

constexpr double kProbTol = 1e-9;
constexpr std::uint64_t kMaxJointSupport = 1000000;

}  // namespace

DurationDist DurationDist::deterministic(double seconds) {
  if (seconds < 0.0) raise(Errc::InvalidDistribution, "duration must be >= 0");
  DurationDist d;
  d.kind_ = Kind::Deterministic;
  d.a_ = seconds;
  return d;
}

DurationDist DurationDist::uniform(double lo, double hi) {
  if (lo < 0.0 || lo > hi) raise(Errc::InvalidDistribution, "uniform needs 0 <= lo <= hi");
  DurationDist d;
  d.kind_ = Kind::Uniform;
  d.a_ = lo;
  d.b_ = hi;
  return d;
}

DurationDist DurationDist::exponential(double rate) {
  if (!(rate > 0.0)) raise(Errc::InvalidDistribution, "exponential rate must be > 0");
  DurationDist d;
  d.kind_ = Kind::Exponential;
  d.a_ = rate;
  return d;
}

DurationDist DurationDist::discrete(std::vector<DiscretePoint> points) {
  if (points.empty()) raise(Errc::InvalidDistribution, "discrete needs >= 1 point");
  double total = 0.0;
  for (const DiscretePoint& p : points) {
    if (p.value < 0.0) raise(Errc::InvalidDistribution, "discrete values must be >= 0");
    if (!(p.prob > 0.0)) raise(Errc::InvalidDistribution, "discrete probs must be > 0");
    total += p.prob;
  }
  if (std::abs(total - 1.0) > kProbTol) {
    raise(Errc::InvalidDistribution, "discrete probs sum to " + fmt_double(total));
  }
  DurationDist d;
  d.kind_ = Kind::Discrete;
  d.points_ = std::move(points);
  return d;
}

DurationDist DurationDist::mixture(mixture::MixtureModel model) {
  if (model.components.empty()) raise(Errc::InvalidDistribution, "mixture needs components");
  double total = 0.0;
  for (const auto& c : model.components) {
    if (!(c.weight > 0.0)) raise(Errc::InvalidDistribution, "mixture weights must be > 0");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > kProbTol) {
    raise(Errc::InvalidDistribution, "mixture weights sum to " + fmt_double(total));
  }
  DurationDist d;
  d.kind_ = Kind::Mixture;
  d.mixture_ = std::move(model);
  return d;
}

double DurationDist::sample(Rng& rng) const {
  switch (kind_) {
    case Kind::Deterministic:
      return a_;
    case Kind::Uniform:
      return rng.next_uniform(a_, b_);
    case Kind::Exponential:
      return rng.next_exponential(a_);
    case Kind::Discrete: {
      double u = rng.next_unit();
      double acc = 0.0;
      for (const DiscretePoint& p : points_) {
        acc += p.prob;
        if (u < acc) return p.value;
      }
      return points_.back().value;
    }
    case Kind::Mixture:
      // mixture models are in ms, DAG durations in seconds
      return mixture::sample_one(mixture_, rng) / 1000.0;
  }
  return 0.0;
}

std::vector<DiscretePoint> DurationDist::support() const {
  if (kind_ == Kind::Discrete) return points_;
  if (kind_ == Kind::Deterministic) return {{a_, 1.0}};
  raise(Errc::UnsupportedDist, "only Discrete/Deterministic have finite support");
}

StochasticDag make_dag(std::vector<DagNode> nodes,
                       std::set<std::pair<std::string, std::string>> edges) {
  if (nodes.empty()) raise(Errc::InvalidGraph, "DAG needs >= 1 node");
  std::sort(nodes.begin(), nodes.end(),
            [](const DagNode& a, const DagNode& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (nodes[i].id == nodes[i - 1].id) {
      raise(Errc::DuplicateId, "DAG node '" + nodes[i].id + "'");
    }
  }
  std::map<std::string, std::vector<std::string>> succ;
  std::map<std::string, int> indeg;
  for (const DagNode& n : nodes) indeg[n.id] = 0;
  for (const auto& [before, after] : edges) {
    if (!indeg.contains(before)) raise(Errc::UnknownTwin, "DAG edge endpoint '" + before + "'");
    if (!indeg.contains(after)) raise(Errc::UnknownTwin, "DAG edge endpoint '" + after + "'");
    succ[before].push_back(after);
    indeg[after]++;
  }
  std::deque<std::string> ready;
  for (const auto& [id, d] : indeg) {
    if (d == 0) ready.push_back(id);
  }
  std::size_t seen = 0;
  while (!ready.empty()) {
    std::string id = ready.front();
    ready.pop_front();
    ++seen;
    for (const std::string& s : succ[id]) {
      if (--indeg[s] == 0) ready.push_back(s);
    }
  }
  if (seen != nodes.size()) raise(Errc::CycleWouldForm, "precedence edges form a cycle");
  StochasticDag dag;
  dag.nodes = std::move(nodes);
  dag.edges = std::move(edges);
  return dag;
}

StochasticDag transform(const graph::TwinGraph& g, const std::string& duration_key,
                        const std::map<std::string, DurationDist>& durations,
                        const std::optional<DurationDist>& default_duration) {
  if (auto violations = g.validate(); !violations.empty()) {
    raise(Errc::InvalidGraph, "twin graph invalid: " + violations.front().to_string());
  }
  std::vector<DagNode> nodes;
  nodes.reserve(g.twins.size());
  for (const auto& [id, twin] : g.twins) {
    auto dit = durations.find(id);
    if (dit != durations.end()) {
      nodes.push_back({id, dit->second});
      continue;
    }
    auto sit = twin.state.find(duration_key);
    if (sit != twin.state.end() && is_numeric(sit->second)) {
      nodes.push_back({id, DurationDist::deterministic(as_double(sit->second))});
      continue;
    }
    if (default_duration) {
      nodes.push_back({id, *default_duration});
      continue;
    }
    raise(Errc::MissingDuration, "twin '" + id + "' has no duration under key '" +
                                     duration_key + "' and no default is configured");
  }
  std::set<std::pair<std::string, std::string>> edges;
  for (const graph::Edge& e : g.edges) {
    // ConnectsTo is topology, not precedence
    if (e.relation == graph::Relation::ConnectsTo) continue;
    edges.insert({e.parent, e.child});
  }
  return make_dag(std::move(nodes), std::move(edges));
}

namespace {

struct DagIndex {
  std::vector<std::size_t> topo;                       // indices into nodes
  std::vector<std::vector<std::size_t>> preds;         // per node index
  std::vector<std::size_t> sinks;                      // node indices with no successor
};

DagIndex index_dag(const StochasticDag& dag) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < dag.nodes.size(); ++i) pos[dag.nodes[i].id] = i;
  DagIndex ix;
  ix.preds.resize(dag.nodes.size());
  std::vector<std::size_t> outdeg(dag.nodes.size(), 0);
  std::vector<int> indeg(dag.nodes.size(), 0);
  std::vector<std::vector<std::size_t>> succ(dag.nodes.size());
  for (const auto& [before, after] : dag.edges) {
    std::size_t b = pos.at(before), a = pos.at(after);
    ix.preds[a].push_back(b);
    succ[b].push_back(a);
    outdeg[b]++;
    indeg[a]++;
  }
  // Kahn in node-id order (nodes are sorted by id)
  std::deque<std::size_t> ready;
  for (std::size_t i = 0; i < dag.nodes.size(); ++i) {
    if (indeg[i] == 0) ready.push_back(i);
  }
  while (!ready.empty()) {
    std::size_t i = ready.front();
    ready.pop_front();
    ix.topo.push_back(i);
    for (std::size_t s : succ[i]) {
      if (--indeg[s] == 0) ready.push_back(s);
    }
  }
  for (std::size_t i = 0; i < dag.nodes.size(); ++i) {
    if (outdeg[i] == 0) ix.sinks.push_back(i);
  }
  return ix;
}

double makespan(const DagIndex& ix, const std::vector<double>& durations,
                std::vector<double>& finish) {
  for (std::size_t i : ix.topo) {
    double start = 0.0;
    for (std::size_t p : ix.preds[i]) start = std::max(start, finish[p]);
    finish[i] = start + durations[i];
  }
  double total = 0.0;
  for (std::size_t s : ix.sinks) total = std::max(total, finish[s]);
  return total;
}

}  // namespace

std::vector<DiscretePoint> completion_exact(const StochasticDag& dag) {
  std::vector<std::vector<DiscretePoint>> supports;
  supports.reserve(dag.nodes.size());
  std::uint64_t joint = 1;
  for (const DagNode& n : dag.nodes) {
    supports.push_back(n.duration.support());  // UnsupportedDist for continuous kinds
    if (joint > kMaxJointSupport / supports.back().size()) {
      raise(Errc::StateSpaceTooLarge, "joint support exceeds 10^6 outcomes");
    }
    joint *= supports.back().size();
  }

  DagIndex ix = index_dag(dag);
  std::vector<std::size_t> pick(dag.nodes.size(), 0);
  std::vector<double> durations(dag.nodes.size(), 0.0);
  std::vector<double> finish(dag.nodes.size(), 0.0);
  std::map<double, double> dist;
  for (std::uint64_t outcome = 0; outcome < joint; ++outcome) {
    double prob = 1.0;
    for (std::size_t i = 0; i < pick.size(); ++i) {
      const DiscretePoint& p = supports[i][pick[i]];
      durations[i] = p.value;
      prob *= p.prob;
    }
    dist[makespan(ix, durations, finish)] += prob;
    // mixed-radix increment
    for (std::size_t i = 0; i < pick.size(); ++i) {
      if (++pick[i] < supports[i].size()) break;
      pick[i] = 0;
    }
  }
  std::vector<DiscretePoint> out;
  out.reserve(dist.size());
  double total = 0.0;
  for (const auto& [value, prob] : dist) {
    out.push_back({value, prob});
    total += prob;
  }
  if (std::abs(total - 1.0) > kProbTol) {
    raise(Errc::InvalidDistribution, "enumeration probabilities sum to " + fmt_double(total));
  }
  return out;
}

std::vector<double> makespan_samples(const StochasticDag& dag, std::uint64_t n,
                                     std::uint64_t seed, std::uint64_t rep_offset) {
  if (n < 1) raise(Errc::SchemaError, "replication count must be >= 1");
  DagIndex ix = index_dag(dag);
  std::vector<double> durations(dag.nodes.size(), 0.0);
  std::vector<double> finish(dag.nodes.size(), 0.0);
  std::vector<double> out;
  out.reserve(n);
  for (std::uint64_t rep = 0; rep < n; ++rep) {
    // counter-based per-replication stream: evaluation order never matters
    Rng rng(Rng::stream_seed(seed, rep_offset + rep));
    for (std::size_t i = 0; i < dag.nodes.size(); ++i) {
      durations[i] = dag.nodes[i].duration.sample(rng);
    }
    out.push_back(makespan(ix, durations, finish));
  }
  return out;
}

double nearest_rank(std::vector<double> sorted_ascending, double p) {
  if (sorted_ascending.empty()) raise(Errc::EmptySamples, "percentile of no samples");
  if (!(p > 0.0 && p < 1.0)) raise(Errc::SchemaError, "percentile needs 0 < p < 1");
  auto rank = static_cast<std::size_t>(
      std::ceil(p * static_cast<double>(sorted_ascending.size())));
  if (rank == 0) rank = 1;
  return sorted_ascending[rank - 1];
}

CompletionStats completion_mc(const StochasticDag& dag, std::uint64_t n, std::uint64_t seed,
                              std::optional<double> deadline) {
  std::vector<double> samples = makespan_samples(dag, n, seed);
  CompletionStats stats;
  stats.samples = n;
  double sum = 0.0;
  for (double x : samples) sum += x;
  stats.mean = sum / static_cast<double>(n);
  std::sort(samples.begin(), samples.end());
  stats.p50 = nearest_rank(samples, 0.50);
  stats.p95 = nearest_rank(samples, 0.95);
  stats.p99 = nearest_rank(samples, 0.99);
  if (deadline) {
    stats.deadline = deadline;
    auto it = std::upper_bound(samples.begin(), samples.end(), *deadline);
    stats.deadline_prob =
        static_cast<double>(it - samples.begin()) / static_cast<double>(n);
  }
  return stats;
}

std::string CompletionStats::to_json() const {
  ordered_json j;
  j["samples"] = samples;
  j["mean"] = mean;
  j["p50"] = p50;
  j["p95"] = p95;
  j["p99"] = p99;
  if (deadline) {
    j["deadline"] = *deadline;
    j["deadline_prob"] = deadline_prob;
  }
  return j.dump();
}

namespace {

ordered_json dist_to_json(const DurationDist& d) {
  ordered_json j;
  switch (d.kind()) {
    case DurationDist::Kind::Deterministic:
      j["type"] = "deterministic";
      j["value"] = d.deterministic_value();
      break;
    case DurationDist::Kind::Uniform:
      j["type"] = "uniform";
      j["lo"] = d.lo();
      j["hi"] = d.hi();
      break;
    case DurationDist::Kind::Exponential:
      j["type"] = "exponential";
      j["rate"] = d.rate();
      break;
    case DurationDist::Kind::Discrete: {
      j["type"] = "discrete";
      j["points"] = ordered_json::array();
      for (const DiscretePoint& p : d.points()) {
        ordered_json jp;
        jp["value"] = p.value;
        jp["prob"] = p.prob;
        j["points"].push_back(jp);
      }
      break;
    }
    case DurationDist::Kind::Mixture: {
      const mixture::MixtureModel& m = d.mixture_model();
      j["type"] = "mixture";
      j["load"] = m.load;
      j["components"] = ordered_json::array();
      for (const auto& c : m.components) {
        ordered_json jc;
        jc["w"] = c.weight;
        jc["mu"] = c.mean;
        jc["sigma"] = c.stddev;
        j["components"].push_back(jc);
      }
      break;
    }
  }
  return j;
}

}  // namespace

DurationDist dist_from_json_obj(const ordered_json& j, const std::string& ctx) {
  if (!j.is_object() || !j.contains("type")) {
    raise(Errc::SchemaError, ctx + ": duration must be an object with 'type'");
  }
  const std::string type = j["type"].get<std::string>();
  try {
    if (type == "deterministic") return DurationDist::deterministic(j.at("value").get<double>());
    if (type == "uniform") {
      return DurationDist::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    }
    if (type == "exponential") return DurationDist::exponential(j.at("rate").get<double>());
    if (type == "discrete") {
      std::vector<DiscretePoint> pts;
      for (const auto& jp : j.at("points")) {
        pts.push_back({jp.at("value").get<double>(), jp.at("prob").get<double>()});
      }
      return DurationDist::discrete(std::move(pts));
    }
    if (type == "mixture") {
      mixture::MixtureModel m;
      m.load = j.contains("load") ? j["load"].get<double>() : 0.0;
      for (const auto& jc : j.at("components")) {
        m.components.push_back({jc.at("w").get<double>(), jc.at("mu").get<double>(),
                                jc.at("sigma").get<double>()});
      }
      return DurationDist::mixture(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::SchemaError, ctx + ": " + e.what());
  }
  raise(Errc::SchemaError, ctx + ": unknown duration type '" + type + "'");
}

std::string export_dag(const StochasticDag& dag) {
  std::vector<std::string> node_lines;
  for (const DagNode& n : dag.nodes) {
    ordered_json j;
    j["id"] = n.id;
    j["duration"] = dist_to_json(n.duration);
    node_lines.push_back(j.dump());
  }
  std::vector<std::string> edge_lines;
  for (const auto& [before, after] : dag.edges) {
    ordered_json j;
    j["before"] = before;
    j["after"] = after;
    edge_lines.push_back(j.dump());
  }
  std::string out = "{\n\"nodes\": [";
  if (!node_lines.empty()) {
    out += '\n';
    for (std::size_t i = 0; i < node_lines.size(); ++i) {
      out += node_lines[i];
      out += (i + 1 < node_lines.size()) ? ",\n" : "\n";
    }
  }
  out += "],\n\"edges\": [";
  if (!edge_lines.empty()) {
    out += '\n';
    for (std::size_t i = 0; i < edge_lines.size(); ++i) {
      out += edge_lines[i];
      out += (i + 1 < edge_lines.size()) ? ",\n" : "\n";
    }
  }
  out += "]\n}\n";
  return out;
}

StochasticDag dag_from_json(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::SchemaError, std::string("invalid DAG JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes")) {
    raise(Errc::SchemaError, "DAG document needs {nodes, edges}");
  }
  std::vector<DagNode> nodes;
  for (const auto& jn : doc["nodes"]) {
    if (!jn.contains("id") || !jn.contains("duration")) {
      raise(Errc::SchemaError, "DAG node needs {id, duration}");
    }
    std::string id = jn["id"].get<std::string>();
    nodes.push_back({id, dist_from_json_obj(jn["duration"], "node '" + id + "'")});
  }
  std::set<std::pair<std::string, std::string>> edges;
  if (doc.contains("edges")) {
    for (const auto& je : doc["edges"]) {
      edges.insert({je.at("before").get<std::string>(), je.at("after").get<std::string>()});
    }
  }
  return make_dag(std::move(nodes), std::move(edges));
}

}  // namespace twinsim::sdag
