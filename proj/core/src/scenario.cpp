#include "twinsim/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "twinsim/errors.hpp"
#include "twinsim/textfmt.hpp"

#include "json_detail.hpp"

namespace twinsim::scenario {

namespace {

using nlohmann::ordered_json;

void expect_keys(const ordered_json& obj, std::initializer_list<const char*> allowed,
                 const std::string& ctx) {
  if (!obj.is_object()) raise(Errc::SchemaError, ctx + ": must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) {
      if (it.key() == k) ok = true;
    }
    if (!ok) raise(Errc::SchemaError, ctx + ": unknown key '" + it.key() + "'");
  }
}

const ordered_json& need(const ordered_json& obj, const char* key, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) raise(Errc::SchemaError, ctx + ": missing key '" + std::string(key) + "'");
  return *it;
}

double num(const ordered_json& j, const std::string& ctx) {
  if (!j.is_number()) raise(Errc::SchemaError, ctx + ": expected a number");
  return j.get<double>();
}

std::uint64_t uns(const ordered_json& j, const std::string& ctx) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) {
    raise(Errc::SchemaError, ctx + ": expected a non-negative integer");
  }
  if (j.is_number_integer() && j.get<std::int64_t>() < 0) {
    raise(Errc::SchemaError, ctx + ": expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

double load_key(const std::string& key, const std::string& ctx) {
  try {
    std::size_t pos = 0;
    double v = std::stod(key, &pos);
    if (pos != key.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    raise(Errc::SchemaError, ctx + ": load key '" + key + "' is not a number");
  }
}

mixture::MixtureModel model_from_obj(const ordered_json& j, double load,
                                     const std::string& ctx) {
  expect_keys(j, {"components"}, ctx);
  mixture::MixtureModel m;
  m.load = load;
  for (const ordered_json& jc : need(j, "components", ctx)) {
    expect_keys(jc, {"w", "mu", "sigma"}, ctx + " component");
    m.components.push_back({num(need(jc, "w", ctx), ctx + ".w"),
                            num(need(jc, "mu", ctx), ctx + ".mu"),
                            num(need(jc, "sigma", ctx), ctx + ".sigma")});
  }
  if (m.components.empty()) raise(Errc::SchemaError, ctx + ": needs >= 1 component");
  double wsum = 0.0;
  for (const auto& c : m.components) {
    if (!(c.weight > 0.0)) raise(Errc::SchemaError, ctx + ": weights must be > 0");
    if (c.stddev < 0.0) raise(Errc::SchemaError, ctx + ": sigma must be >= 0");
    wsum += c.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-9) raise(Errc::SchemaError, ctx + ": weights must sum to 1");
  return m;
}

DurationSection parse_durations(const ordered_json& j) {
  expect_keys(j, {"duration_key", "default", "per_twin"}, "durations");
  DurationSection out;
  if (j.contains("duration_key")) out.duration_key = j["duration_key"].get<std::string>();
  if (j.contains("default")) {
    out.default_duration = sdag::dist_from_json_obj(j["default"], "durations.default");
  }
  if (j.contains("per_twin")) {
    for (auto it = j["per_twin"].begin(); it != j["per_twin"].end(); ++it) {
      out.per_twin.emplace(
          it.key(), sdag::dist_from_json_obj(it.value(), "durations.per_twin." + it.key()));
    }
  }
  return out;
}

tsn::Topology parse_topology(const ordered_json& j) {
  expect_keys(j, {"nodes", "links"}, "topology");
  tsn::Topology topo;
  for (const ordered_json& jn : need(j, "nodes", "topology")) {
    expect_keys(jn, {"id", "kind"}, "topology node");
    std::string id = need(jn, "id", "node").get<std::string>();
    if (topo.nodes.contains(id)) raise(Errc::SchemaError, "duplicate node '" + id + "'");
    topo.nodes.emplace(id, tsn::device_kind_from(need(jn, "kind", "node").get<std::string>()));
  }
  for (const ordered_json& jl : need(j, "links", "topology")) {
    expect_keys(jl, {"id", "a", "b", "latency_ns", "up"}, "topology link");
    tsn::Link link;
    link.id = need(jl, "id", "link").get<std::string>();
    link.a = need(jl, "a", "link").get<std::string>();
    link.b = need(jl, "b", "link").get<std::string>();
    link.per_hop_latency_ns = uns(need(jl, "latency_ns", "link"), "link.latency_ns");
    link.up = jl.contains("up") ? jl["up"].get<bool>() : true;
    if (topo.links.contains(link.id)) {
      raise(Errc::SchemaError, "duplicate link '" + link.id + "'");
    }
    topo.links.emplace(link.id, std::move(link));
  }
  topo.check();
  return topo;
}

tsn::MgmtConfig parse_mgmt(const ordered_json& j) {
  expect_keys(j,
              {"detect_delay_ns", "compute_delay_ns", "push_delay_net_ns",
               "push_delay_dev_ns", "registry_refresh_ns"},
              "mgmt");
  tsn::MgmtConfig cfg;
  cfg.detect_delay_ns = uns(need(j, "detect_delay_ns", "mgmt"), "mgmt.detect_delay_ns");
  cfg.compute_delay_ns = uns(need(j, "compute_delay_ns", "mgmt"), "mgmt.compute_delay_ns");
  cfg.push_delay_net_ns = uns(need(j, "push_delay_net_ns", "mgmt"), "mgmt.push_delay_net_ns");
  cfg.push_delay_dev_ns = uns(need(j, "push_delay_dev_ns", "mgmt"), "mgmt.push_delay_dev_ns");
  if (j.contains("registry_refresh_ns")) {
    cfg.registry_refresh_ns = uns(j["registry_refresh_ns"], "mgmt.registry_refresh_ns");
  }
  return cfg;
}

TrafficSection parse_traffic(const ordered_json& j) {
  expect_keys(j, {"flow_id", "src", "dst", "qos", "period_ns", "run_until_ns", "failure"},
              "traffic");
  TrafficSection out;
  out.spec.flow_id = need(j, "flow_id", "traffic").get<std::string>();
  out.spec.src = need(j, "src", "traffic").get<std::string>();
  out.spec.dst = need(j, "dst", "traffic").get<std::string>();
  out.spec.qos = j.contains("qos") ? j["qos"].get<int>() : 0;
  out.spec.period_ns = uns(need(j, "period_ns", "traffic"), "traffic.period_ns");
  out.run_until_ns = uns(need(j, "run_until_ns", "traffic"), "traffic.run_until_ns");
  if (j.contains("failure")) {
    const ordered_json& jf = j["failure"];
    expect_keys(jf, {"link", "at_ns"}, "traffic.failure");
    out.failure = tsn::FailureSpec{need(jf, "link", "failure").get<std::string>(),
                                   uns(need(jf, "at_ns", "failure"), "failure.at_ns")};
  }
  return out;
}

ChainSection parse_chain(const ordered_json& j) {
  expect_keys(j, {"arrivals", "stages", "fit_k", "fit_max_iter", "fit_tol"}, "chain");
  ChainSection out;
  out.chain.arrivals = replica::arrival_from(need(j, "arrivals", "chain").get<std::string>());
  if (j.contains("fit_k")) out.fit_k = j["fit_k"].get<int>();
  if (j.contains("fit_max_iter")) out.fit_max_iter = j["fit_max_iter"].get<int>();
  if (j.contains("fit_tol")) out.fit_tol = j["fit_tol"].get<double>();
  for (const ordered_json& js : need(j, "stages", "chain")) {
    expect_keys(js, {"id", "replicas", "hidden"}, "chain stage");
    replica::StageSpec stage;
    stage.id = need(js, "id", "stage").get<std::string>();
    stage.replicas = js.contains("replicas") ? js["replicas"].get<int>() : 1;
    if (stage.replicas < 1) raise(Errc::SchemaError, "stage replicas must be >= 1");
    if (js.contains("hidden")) {
      for (auto it = js["hidden"].begin(); it != js["hidden"].end(); ++it) {
        double load = load_key(it.key(), "stage '" + stage.id + "' hidden");
        stage.hidden.emplace(load, model_from_obj(it.value(), load,
                                                  "stage '" + stage.id + "' hidden[" +
                                                      it.key() + "]"));
      }
    }
    out.chain.stages.push_back(std::move(stage));
  }
  if (out.chain.stages.empty()) raise(Errc::SchemaError, "chain needs >= 1 stage");
  return out;
}

replica::LoadProfile parse_profile(const ordered_json& j) {
  expect_keys(j, {"loads", "fit_loads"}, "profile");
  replica::LoadProfile out;
  for (const ordered_json& jp : need(j, "loads", "profile")) {
    expect_keys(jp, {"rps", "duration_s"}, "profile load");
    replica::LoadPoint p;
    p.rps = num(need(jp, "rps", "load"), "load.rps");
    p.duration_s = num(need(jp, "duration_s", "load"), "load.duration_s");
    if (!(p.rps > 0.0)) raise(Errc::SchemaError, "profile loads must be > 0");
    out.points.push_back(p);
  }
  if (out.points.empty()) raise(Errc::SchemaError, "profile needs >= 1 load");
  if (j.contains("fit_loads")) {
    for (const ordered_json& jf : j["fit_loads"]) {
      out.fit_loads.push_back(num(jf, "profile.fit_loads"));
    }
  }
  return out;
}

SeedSection parse_seeds(const ordered_json& j) {
  expect_keys(j, {"root", "runs"}, "seeds");
  SeedSection out;
  if (j.contains("root")) out.root = uns(j["root"], "seeds.root");
  if (j.contains("runs")) {
    for (const ordered_json& jr : j["runs"]) out.runs.push_back(uns(jr, "seeds.runs"));
  }
  if (out.runs.empty()) out.runs.push_back(out.root);
  return out;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::SchemaError, std::string("invalid scenario JSON: ") + e.what());
  }
  expect_keys(doc,
              {"twin_graph", "durations", "topology", "mgmt", "traffic", "chain", "profile",
               "seeds"},
              "scenario");
  Scenario sc;
  if (doc.contains("twin_graph")) {
    // the section is the twin_graph module's own document format
    sc.twin_graph = graph::graph_from_json(doc["twin_graph"].dump());
  }
  if (doc.contains("durations")) sc.durations = parse_durations(doc["durations"]);
  if (doc.contains("topology")) sc.topology = parse_topology(doc["topology"]);
  if (doc.contains("mgmt")) sc.mgmt = parse_mgmt(doc["mgmt"]);
  if (doc.contains("traffic")) sc.traffic = parse_traffic(doc["traffic"]);
  if (doc.contains("chain")) sc.chain = parse_chain(doc["chain"]);
  if (doc.contains("profile")) sc.profile = parse_profile(doc["profile"]);
  if (doc.contains("seeds")) sc.seeds = parse_seeds(doc["seeds"]);
  if (sc.seeds.runs.empty()) sc.seeds.runs.push_back(sc.seeds.root);
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::SchemaError, "cannot read scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

sdag::StochasticDag dag_from_scenario(const Scenario& sc) {
  if (!sc.twin_graph) raise(Errc::SchemaError, "scenario has no twin_graph section");
  DurationSection d = sc.durations.value_or(DurationSection{});
  return sdag::transform(*sc.twin_graph, d.duration_key, d.per_twin, d.default_duration);
}

ReplicationOutcome run_replication(const ChainSection& chain,
                                   const replica::LoadProfile& profile, std::uint64_t seed) {
  replica::GroundTruth gt = replica::generate_ground_truth(chain.chain, profile, seed);

  std::vector<replica::TwinStage> twin_stages;
  ReplicationOutcome outcome;
  for (const replica::StageSpec& stage : chain.chain.stages) {
    replica::TwinStage ts;
    ts.id = stage.id;
    ts.replicas = stage.replicas;
    auto tit = gt.stage_traces.find(stage.id);
    if (tit == gt.stage_traces.end()) {
      raise(Errc::SchemaError, "no traces collected for stage '" + stage.id + "'");
    }
    for (const mixture::Trace& trace : tit->second) {
      std::uint64_t fit_seed =
          Rng::stream_seed(seed, Rng::hash_id("fit|" + stage.id + "|" + fmt_double(trace.load)));
      ts.models.push_back(
          mixture::fit_em(trace, chain.fit_k, fit_seed, chain.fit_max_iter, chain.fit_tol)
              .model);
    }
    outcome.fitted.emplace(stage.id, ts.models);
    twin_stages.push_back(std::move(ts));
  }

  auto twin = replica::replicate(twin_stages, chain.chain.arrivals, profile, seed);
  outcome.comparison = replica::compare(gt.responses_ms, twin);
  return outcome;
}

tsn::FailoverReport run_failover(const Scenario& sc, std::uint64_t seed,
                                 simkit::EventLog* out_log) {
  if (!sc.topology || !sc.mgmt || !sc.traffic) {
    raise(Errc::SchemaError, "failover needs topology, mgmt and traffic sections");
  }
  return tsn::run_failover_scenario(*sc.topology, *sc.mgmt, sc.traffic->spec,
                                    sc.traffic->failure, sc.traffic->run_until_ns, seed,
                                    out_log);
}

}  // namespace twinsim::scenario
