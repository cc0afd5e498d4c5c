#include "twinsim/twin_graph.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>

#include "twinsim/errors.hpp"

#include <json.hpp>

namespace twinsim::graph {

namespace {

using nlohmann::ordered_json;

std::string edge_label(const Edge& e) { return e.parent + "->" + e.child; }

}  // namespace

std::string Violation::to_string() const {
  return invariant + " " + subject + ": " + message;
}

void TwinGraph::add_asset(Asset a) {
  if (assets.contains(a.id)) raise(Errc::DuplicateId, "asset '" + a.id + "'");
  assets.emplace(a.id, std::move(a));
}

DigitalTwin& TwinGraph::bind_twin(const std::string& asset_id, TwinFidelity fidelity,
                                  const std::set<std::string>& exposed_keys,
                                  std::string twin_id) {
  auto ait = assets.find(asset_id);
  if (ait == assets.end()) raise(Errc::UnknownAsset, "asset '" + asset_id + "'");
  for (const auto& [id, t] : twins) {
    if (t.asset_id == asset_id) raise(Errc::AlreadyBound, "asset '" + asset_id + "'");
  }
  if (twin_id.empty()) twin_id = asset_id;
  if (twins.contains(twin_id)) raise(Errc::DuplicateId, "twin '" + twin_id + "'");

  const Asset& asset = ait->second;
  DigitalTwin twin;
  twin.id = twin_id;
  twin.asset_id = asset_id;
  twin.fidelity = fidelity;
  twin.tier = 0;
  if (fidelity == TwinFidelity::Doppel) {
    // empty set means "all"; anything else must be the full attribute set
    if (!exposed_keys.empty()) {
      for (const auto& [k, v] : asset.attributes) {
        if (!exposed_keys.contains(k)) {
          raise(Errc::FidelityMismatch,
                "Doppel twin '" + twin_id + "' misses attribute '" + k + "'");
        }
      }
    }
    twin.state = asset.attributes;
  } else {
    for (const std::string& k : exposed_keys) {
      auto kit = asset.attributes.find(k);
      if (kit == asset.attributes.end()) {
        raise(Errc::UnknownAttribute, "asset '" + asset_id + "' has no attribute '" + k + "'");
      }
      twin.state.emplace(k, kit->second);
    }
  }
  return twins.emplace(twin_id, std::move(twin)).first->second;
}

bool TwinGraph::would_cycle(const std::string& parent_id, const std::string& child_id) const {
  if (parent_id == child_id) return true;
  // DFS from child along existing edges; a path back to parent closes a cycle
  std::vector<const std::string*> stack{&child_id};
  std::set<std::string> seen;
  while (!stack.empty()) {
    const std::string& cur = *stack.back();
    stack.pop_back();
    if (!seen.insert(cur).second) continue;
    if (cur == parent_id) return true;
    auto it = edges.lower_bound(Edge{cur, "", Relation::Contains});
    for (; it != edges.end() && it->parent == cur; ++it) stack.push_back(&it->child);
  }
  return false;
}

void TwinGraph::link(const std::string& parent_id, const std::string& child_id,
                     Relation relation) {
  if (!twins.contains(parent_id)) raise(Errc::UnknownTwin, "twin '" + parent_id + "'");
  if (!twins.contains(child_id)) raise(Errc::UnknownTwin, "twin '" + child_id + "'");
  Edge e{parent_id, child_id, relation};
  if (edges.contains(e)) return;  // set semantics
  if (would_cycle(parent_id, child_id)) {
    raise(Errc::CycleWouldForm, edge_label(e));
  }
  edges.insert(e);
  recompute_tiers();
}

void TwinGraph::remove_twin(const std::string& twin_id) {
  if (!twins.contains(twin_id)) raise(Errc::UnknownTwin, "twin '" + twin_id + "'");
  if (!children_of(twin_id).empty()) {
    raise(Errc::HasChildren, "twin '" + twin_id + "' still has children");
  }
  std::erase_if(edges, [&](const Edge& e) { return e.child == twin_id; });
  twins.erase(twin_id);
  recompute_tiers();
}

void TwinGraph::add_rule(SynthesisRule r) { rules.insert(std::move(r)); }

std::vector<const DigitalTwin*> TwinGraph::children_of(const std::string& twin_id) const {
  std::vector<const DigitalTwin*> out;
  auto it = edges.lower_bound(Edge{twin_id, "", Relation::Contains});
  for (; it != edges.end() && it->parent == twin_id; ++it) {
    auto tit = twins.find(it->child);
    if (tit != twins.end()) {
      // multi-relation edges to the same child count once
      if (!out.empty() && out.back()->id == it->child) continue;
      out.push_back(&tit->second);
    }
  }
  return out;
}

std::vector<const DigitalTwin*> TwinGraph::parents_of(const std::string& twin_id) const {
  std::vector<const DigitalTwin*> out;
  for (const Edge& e : edges) {
    if (e.child != twin_id) continue;
    auto tit = twins.find(e.parent);
    if (tit != twins.end()) {
      if (!out.empty() && out.back()->id == e.parent) continue;
      out.push_back(&tit->second);
    }
  }
  return out;
}

int TwinGraph::tier_of(const std::string& twin_id) const {
  auto it = twins.find(twin_id);
  if (it == twins.end()) raise(Errc::UnknownTwin, "twin '" + twin_id + "'");
  return it->second.tier;
}

void TwinGraph::recompute_tiers() {
  // reverse topological sweep: leaves at 0, parents 1 + max child tier
  std::map<std::string, int> unresolved;  // children not yet tiered
  for (auto& [id, t] : twins) unresolved[id] = 0;
  std::map<std::string, std::set<std::string>> childset, parentset;
  for (const Edge& e : edges) {
    if (!twins.contains(e.parent) || !twins.contains(e.child)) continue;
    childset[e.parent].insert(e.child);
    parentset[e.child].insert(e.parent);
  }
  for (auto& [id, cs] : childset) unresolved[id] = static_cast<int>(cs.size());

  std::deque<std::string> ready;
  for (auto& [id, n] : unresolved) {
    if (n == 0) ready.push_back(id);
  }
  std::map<std::string, int> tier;
  while (!ready.empty()) {
    std::string id = ready.front();
    ready.pop_front();
    int t = 0;
    for (const std::string& c : childset[id]) t = std::max(t, tier[c] + 1);
    tier[id] = t;
    for (const std::string& p : parentset[id]) {
      if (--unresolved[p] == 0) ready.push_back(p);
    }
  }
  // on a cycle (only constructible by direct mutation) the affected twins
  // keep their previous tier; validate() reports the cycle itself
  for (auto& [id, t] : twins) {
    auto it = tier.find(id);
    if (it != tier.end()) t.tier = it->second;
  }
}

std::vector<Violation> TwinGraph::validate() const {
  std::vector<Violation> out;

  for (const Edge& e : edges) {
    if (!twins.contains(e.parent) || !twins.contains(e.child)) {
      out.push_back({"DanglingEdge", edge_label(e), "edge endpoint is not a twin"});
    }
  }

  std::map<std::string, std::string> bound;  // asset -> twin
  for (const auto& [id, t] : twins) {
    if (!assets.contains(t.asset_id)) {
      out.push_back({"UnknownAsset", id, "twin references asset '" + t.asset_id + "'"});
      continue;
    }
    auto [it, fresh] = bound.emplace(t.asset_id, id);
    if (!fresh) {
      out.push_back({"DuplicateTwinForAsset", id,
                     "asset '" + t.asset_id + "' already twinned by '" + it->second + "'"});
    }
    if (t.fidelity == TwinFidelity::Doppel) {
      for (const auto& [k, v] : assets.at(t.asset_id).attributes) {
        if (!t.state.contains(k)) {
          out.push_back({"FidelityMismatch", id, "Doppel state misses attribute '" + k + "'"});
        }
      }
    }
  }

  // cycle check over edges with both endpoints present
  std::map<std::string, std::set<std::string>> childset;
  std::map<std::string, int> indeg;
  for (const auto& [id, t] : twins) indeg[id] = 0;
  for (const Edge& e : edges) {
    if (!twins.contains(e.parent) || !twins.contains(e.child)) continue;
    if (childset[e.parent].insert(e.child).second) indeg[e.child]++;
  }
  std::deque<std::string> ready;
  for (auto& [id, d] : indeg) {
    if (d == 0) ready.push_back(id);
  }
  std::size_t seen = 0;
  std::map<std::string, int> depth;  // longest path to a leaf, for tier check
  while (!ready.empty()) {
    std::string id = ready.front();
    ready.pop_front();
    ++seen;
    for (const std::string& c : childset[id]) {
      if (--indeg[c] == 0) ready.push_back(c);
    }
  }
  bool acyclic = seen == twins.size();
  if (!acyclic) {
    std::string cyclic;
    for (auto& [id, d] : indeg) {
      if (d > 0) cyclic += (cyclic.empty() ? "" : ",") + id;
    }
    out.push_back({"CycleWouldForm", cyclic, "twins form a directed cycle"});
  } else {
    // tiers: recompute and compare
    std::function<int(const std::string&)> depth_of = [&](const std::string& id) -> int {
      auto it = depth.find(id);
      if (it != depth.end()) return it->second;
      int t = 0;
      for (const std::string& c : childset[id]) t = std::max(t, depth_of(c) + 1);
      depth[id] = t;
      return t;
    };
    for (const auto& [id, t] : twins) {
      int want = depth_of(id);
      if (t.tier != want) {
        out.push_back({"TierMismatch", id,
                       "tier is " + std::to_string(t.tier) + ", structure implies " +
                           std::to_string(want)});
      }
    }
  }
  return out;
}

Value aggregate(Aggregator agg, const std::vector<Value>& values) {
  if (values.empty()) raise(Errc::EmptyChildSet, "aggregator over no children");
  if (agg == Aggregator::Count) return static_cast<std::int64_t>(values.size());

  bool all_int = std::all_of(values.begin(), values.end(), [](const Value& v) {
    return std::holds_alternative<std::int64_t>(v);
  });
  if (agg == Aggregator::Mean) {
    double sum = 0;
    for (const Value& v : values) sum += as_double(v);
    return sum / static_cast<double>(values.size());
  }
  if (all_int) {
    std::int64_t acc = std::get<std::int64_t>(values.front());
    for (std::size_t i = 1; i < values.size(); ++i) {
      std::int64_t x = std::get<std::int64_t>(values[i]);
      switch (agg) {
        case Aggregator::Sum: acc += x; break;
        case Aggregator::Max: acc = std::max(acc, x); break;
        case Aggregator::Min: acc = std::min(acc, x); break;
        default: break;
      }
    }
    return acc;
  }
  double acc = as_double(values.front());
  for (std::size_t i = 1; i < values.size(); ++i) {
    double x = as_double(values[i]);
    switch (agg) {
      case Aggregator::Sum: acc += x; break;
      case Aggregator::Max: acc = std::max(acc, x); break;
      case Aggregator::Min: acc = std::min(acc, x); break;
      default: break;
    }
  }
  return acc;
}

void TwinGraph::synthesize() {
  // children before parents; among ready twins the smallest id goes first
  std::map<std::string, std::set<std::string>> childset, parentset;
  std::map<std::string, int> remaining;
  for (const auto& [id, t] : twins) remaining[id] = 0;
  for (const Edge& e : edges) {
    if (!twins.contains(e.parent) || !twins.contains(e.child)) {
      raise(Errc::InvalidGraph, "dangling edge " + edge_label(e));
    }
    if (childset[e.parent].insert(e.child).second) remaining[e.parent]++;
    parentset[e.child].insert(e.parent);
  }
  std::set<std::string> ready;
  for (auto& [id, n] : remaining) {
    if (n == 0) ready.insert(id);
  }
  std::size_t processed = 0;
  while (!ready.empty()) {
    std::string id = *ready.begin();
    ready.erase(ready.begin());
    ++processed;
    const std::set<std::string>& children = childset[id];
    if (!children.empty()) {
      DigitalTwin& twin = twins.at(id);
      for (const SynthesisRule& rule : rules) {
        std::vector<Value> inputs;
        inputs.reserve(children.size());
        for (const std::string& c : children) {
          const DigitalTwin& ct = twins.at(c);
          auto vit = ct.state.find(rule.source_key);
          if (vit == ct.state.end()) {
            raise(Errc::MissingSourceKey, "twin '" + c + "' key '" + rule.source_key + "'");
          }
          inputs.push_back(vit->second);
        }
        twin.state[rule.target_key] = aggregate(rule.aggregator, inputs);
      }
    }
    for (const std::string& p : parentset[id]) {
      if (--remaining[p] == 0) ready.insert(p);
    }
  }
  if (processed != twins.size()) raise(Errc::InvalidGraph, "graph has a cycle");
}

TwinGraph TwinGraph::abstract_view(int tier_floor) const {
  if (tier_floor < 0) raise(Errc::SchemaError, "tier_floor must be >= 0");
  int max_tier = 0;
  for (const auto& [id, t] : twins) max_tier = std::max(max_tier, t.tier);

  std::set<std::string> keep;
  if (tier_floor > max_tier) {
    // above every tier: fall back to the roots
    std::set<std::string> with_parent;
    for (const Edge& e : edges) with_parent.insert(e.child);
    for (const auto& [id, t] : twins) {
      if (!with_parent.contains(id)) keep.insert(id);
    }
  } else {
    for (const auto& [id, t] : twins) {
      if (t.tier >= tier_floor) keep.insert(id);
    }
  }

  TwinGraph view;
  view.assets = assets;
  view.rules = rules;
  for (const std::string& id : keep) view.twins.emplace(id, twins.at(id));

  std::map<std::string, std::set<Edge>> out_edges;
  for (const Edge& e : edges) out_edges[e.parent].insert(e);

  for (const std::string& u : keep) {
    // direct edges survive with their relation; paths through removed twins
    // contract to DependsOn
    std::set<std::string> reachable_via_removed;
    std::vector<std::string> stack;
    for (const Edge& e : out_edges[u]) {
      if (keep.contains(e.child)) {
        view.edges.insert(e);
      } else {
        stack.push_back(e.child);
      }
    }
    std::set<std::string> seen;
    while (!stack.empty()) {
      std::string cur = stack.back();
      stack.pop_back();
      if (!seen.insert(cur).second) continue;
      for (const Edge& e : out_edges[cur]) {
        if (keep.contains(e.child)) {
          reachable_via_removed.insert(e.child);
        } else {
          stack.push_back(e.child);
        }
      }
    }
    for (const std::string& v : reachable_via_removed) {
      bool direct = false;
      for (const Edge& e : out_edges[u]) {
        if (e.child == v) direct = true;
      }
      if (!direct) view.edges.insert(Edge{u, v, Relation::DependsOn});
    }
  }
  view.recompute_tiers();
  return view;
}

const char* to_string(AssetKind k) {
  switch (k) {
    case AssetKind::NetworkElement: return "NetworkElement";
    case AssetKind::EndDevice: return "EndDevice";
    case AssetKind::IndustrialAsset: return "IndustrialAsset";
    case AssetKind::Service: return "Service";
    case AssetKind::External: return "External";
  }
  return "?";
}

const char* to_string(TwinFidelity f) {
  return f == TwinFidelity::Doppel ? "Doppel" : "Light";
}

const char* to_string(Relation r) {
  switch (r) {
    case Relation::Contains: return "Contains";
    case Relation::ConnectsTo: return "ConnectsTo";
    case Relation::DependsOn: return "DependsOn";
  }
  return "?";
}

const char* to_string(Aggregator a) {
  switch (a) {
    case Aggregator::Sum: return "Sum";
    case Aggregator::Max: return "Max";
    case Aggregator::Min: return "Min";
    case Aggregator::Mean: return "Mean";
    case Aggregator::Count: return "Count";
  }
  return "?";
}

AssetKind asset_kind_from(const std::string& s) {
  if (s == "NetworkElement") return AssetKind::NetworkElement;
  if (s == "EndDevice") return AssetKind::EndDevice;
  if (s == "IndustrialAsset") return AssetKind::IndustrialAsset;
  if (s == "Service") return AssetKind::Service;
  if (s == "External") return AssetKind::External;
  raise(Errc::SchemaError, "unknown asset kind '" + s + "'");
}

TwinFidelity fidelity_from(const std::string& s) {
  if (s == "Doppel") return TwinFidelity::Doppel;
  if (s == "Light") return TwinFidelity::Light;
  raise(Errc::SchemaError, "unknown fidelity '" + s + "'");
}

Relation relation_from(const std::string& s) {
  if (s == "Contains") return Relation::Contains;
  if (s == "ConnectsTo") return Relation::ConnectsTo;
  if (s == "DependsOn") return Relation::DependsOn;
  raise(Errc::SchemaError, "unknown relation '" + s + "'");
}

Aggregator aggregator_from(const std::string& s) {
  if (s == "Sum") return Aggregator::Sum;
  if (s == "Max") return Aggregator::Max;
  if (s == "Min") return Aggregator::Min;
  if (s == "Mean") return Aggregator::Mean;
  if (s == "Count") return Aggregator::Count;
  raise(Errc::SchemaError, "unknown aggregator '" + s + "'");
}

namespace {

ordered_json value_to_json(const Value& v) {
  struct Visitor {
    ordered_json operator()(double d) const { return d; }
    ordered_json operator()(std::int64_t i) const { return i; }
    ordered_json operator()(bool b) const { return b; }
    ordered_json operator()(const std::string& s) const { return s; }
  };
  return std::visit(Visitor{}, v);
}

Value value_from_json(const ordered_json& j, const std::string& ctx) {
  if (j.is_number_float()) return j.get<double>();
  if (j.is_number_integer() || j.is_number_unsigned()) return j.get<std::int64_t>();
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_string()) return j.get<std::string>();
  raise(Errc::SchemaError, ctx + ": values must be number, bool or string");
}

ordered_json valuemap_to_json(const ValueMap& m) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : m) j[k] = value_to_json(v);  // std::map: sorted
  return j;
}

void write_section(std::string& out, const char* name,
                   const std::vector<std::string>& lines, bool last) {
  out += '"';
  out += name;
  out += "\": [";
  if (!lines.empty()) {
    out += '\n';
    for (std::size_t i = 0; i < lines.size(); ++i) {
      out += lines[i];
      out += (i + 1 < lines.size()) ? ",\n" : "\n";
    }
  }
  out += ']';
  out += last ? "\n" : ",\n";
}

void expect_keys(const ordered_json& obj, std::initializer_list<const char*> allowed,
                 const std::string& ctx) {
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

}  // namespace

std::string to_canonical_json(const TwinGraph& g) {
  std::vector<std::string> asset_lines;
  for (const auto& [id, a] : g.assets) {
    ordered_json j;
    j["id"] = a.id;
    j["kind"] = to_string(a.kind);
    j["attributes"] = valuemap_to_json(a.attributes);
    asset_lines.push_back(j.dump());
  }
  std::vector<std::string> twin_lines;
  for (const auto& [id, t] : g.twins) {
    ordered_json j;
    j["id"] = t.id;
    j["asset_id"] = t.asset_id;
    j["fidelity"] = to_string(t.fidelity);
    j["tier"] = t.tier;
    j["state"] = valuemap_to_json(t.state);
    twin_lines.push_back(j.dump());
  }
  std::vector<std::string> edge_lines;
  for (const Edge& e : g.edges) {
    ordered_json j;
    j["parent"] = e.parent;
    j["child"] = e.child;
    j["relation"] = to_string(e.relation);
    edge_lines.push_back(j.dump());
  }
  std::vector<std::string> rule_lines;
  for (const SynthesisRule& r : g.rules) {
    ordered_json j;
    j["target_key"] = r.target_key;
    j["aggregator"] = to_string(r.aggregator);
    j["source_key"] = r.source_key;
    rule_lines.push_back(j.dump());
  }

  std::string out = "{\n";
  write_section(out, "assets", asset_lines, false);
  write_section(out, "twins", twin_lines, false);
  write_section(out, "edges", edge_lines, false);
  write_section(out, "rules", rule_lines, true);
  out += "}\n";
  return out;
}

static TwinGraph graph_from_object(const ordered_json& doc) {
  expect_keys(doc, {"assets", "twins", "edges", "rules"}, "twin_graph");
  TwinGraph g;
  for (const ordered_json& ja : need(doc, "assets", "twin_graph")) {
    expect_keys(ja, {"id", "kind", "attributes"}, "asset");
    Asset a;
    a.id = need(ja, "id", "asset").get<std::string>();
    a.kind = asset_kind_from(need(ja, "kind", "asset").get<std::string>());
    if (ja.contains("attributes")) {
      for (auto it = ja["attributes"].begin(); it != ja["attributes"].end(); ++it) {
        a.attributes.emplace(it.key(), value_from_json(it.value(), "asset '" + a.id + "'"));
      }
    }
    if (g.assets.contains(a.id)) raise(Errc::SchemaError, "duplicate asset '" + a.id + "'");
    g.assets.emplace(a.id, std::move(a));
  }
  for (const ordered_json& jt : need(doc, "twins", "twin_graph")) {
    expect_keys(jt, {"id", "asset_id", "fidelity", "tier", "state"}, "twin");
    DigitalTwin t;
    t.id = need(jt, "id", "twin").get<std::string>();
    t.asset_id = need(jt, "asset_id", "twin").get<std::string>();
    t.fidelity = fidelity_from(need(jt, "fidelity", "twin").get<std::string>());
    t.tier = jt.contains("tier") ? jt["tier"].get<int>() : 0;
    if (jt.contains("state")) {
      for (auto it = jt["state"].begin(); it != jt["state"].end(); ++it) {
        t.state.emplace(it.key(), value_from_json(it.value(), "twin '" + t.id + "'"));
      }
    }
    if (g.twins.contains(t.id)) raise(Errc::SchemaError, "duplicate twin '" + t.id + "'");
    g.twins.emplace(t.id, std::move(t));
  }
  if (doc.contains("edges")) {
    for (const ordered_json& je : doc["edges"]) {
      expect_keys(je, {"parent", "child", "relation"}, "edge");
      g.edges.insert(Edge{need(je, "parent", "edge").get<std::string>(),
                          need(je, "child", "edge").get<std::string>(),
                          relation_from(need(je, "relation", "edge").get<std::string>())});
    }
  }
  if (doc.contains("rules")) {
    for (const ordered_json& jr : doc["rules"]) {
      expect_keys(jr, {"target_key", "aggregator", "source_key"}, "rule");
      g.rules.insert(
          SynthesisRule{need(jr, "target_key", "rule").get<std::string>(),
                        aggregator_from(need(jr, "aggregator", "rule").get<std::string>()),
                        need(jr, "source_key", "rule").get<std::string>()});
    }
  }
  return g;
}

TwinGraph graph_from_json(const std::string& text) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::SchemaError, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) raise(Errc::SchemaError, "twin_graph document must be an object");
  return graph_from_object(doc);
}

}  // namespace twinsim::graph
