#pragma once

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "twinsim/value.hpp"

namespace twinsim::graph {

enum class AssetKind { NetworkElement, EndDevice, IndustrialAsset, Service, External };

// Doppel: near one-to-one replica exposing every asset attribute.
// Light: stylized twin exposing a declared subset.
enum class TwinFidelity { Doppel, Light };

enum class Relation { Contains, ConnectsTo, DependsOn };

enum class Aggregator { Sum, Max, Min, Mean, Count };

struct Asset {
  std::string id;
  AssetKind kind = AssetKind::NetworkElement;
  ValueMap attributes;

  bool operator==(const Asset&) const = default;
};

struct DigitalTwin {
  std::string id;
  std::string asset_id;
  TwinFidelity fidelity = TwinFidelity::Light;
  int tier = 0;  // derived: leaves 0, otherwise 1 + max child tier
  ValueMap state;

  bool operator==(const DigitalTwin&) const = default;
};

struct Edge {
  std::string parent;
  std::string child;
  Relation relation = Relation::Contains;

  auto operator<=>(const Edge&) const = default;
};

struct SynthesisRule {
  std::string target_key;
  Aggregator aggregator = Aggregator::Sum;
  std::string source_key;

  auto operator<=>(const SynthesisRule&) const = default;
};

// One invariant breach found by validate(). Violations are data, not errors.
struct Violation {
  std::string invariant;  // DanglingEdge, FidelityMismatch, CycleWouldForm, ...
  std::string subject;    // twin id or "parent->child"
  std::string message;

  std::string to_string() const;
};

// Multi-parent DAG of digital twins bound to assets. Mutating operations
// keep the structural invariants; direct field access exists so broken
// graphs can be constructed for validation tests and file ingestion.
// Value semantics throughout: copies are independent snapshots.
struct TwinGraph {
  std::map<std::string, Asset> assets;
  std::map<std::string, DigitalTwin> twins;  // keyed by twin id
  std::set<Edge> edges;
  std::set<SynthesisRule> rules;

  void add_asset(Asset a);

  // Creates the twin at tier 0, state projected from asset attributes.
  // Doppel: exposed_keys must be empty (= all) or the full attribute set.
  // Light: exposed_keys is the declared subset. Twin id defaults to asset id.
  DigitalTwin& bind_twin(const std::string& asset_id, TwinFidelity fidelity,
                         const std::set<std::string>& exposed_keys = {},
                         std::string twin_id = {});

  // Adds the edge if it keeps the graph acyclic, then recomputes tiers.
  void link(const std::string& parent_id, const std::string& child_id, Relation relation);

  // Rejected while the twin still has children (no cascade); removes the
  // twin and any edges from its parents.
  void remove_twin(const std::string& twin_id);

  void add_rule(SynthesisRule r);

  std::vector<const DigitalTwin*> children_of(const std::string& twin_id) const;
  std::vector<const DigitalTwin*> parents_of(const std::string& twin_id) const;
  int tier_of(const std::string& twin_id) const;

  // Empty iff every invariant holds. Each violation names the subject and
  // the invariant.
  std::vector<Violation> validate() const;

  // Applies every rule to every twin with children, children before
  // parents, ties broken by twin id. Idempotent on an unchanged graph.
  void synthesize();

  // Twins with tier >= tier_floor; edges contracted so u->v survives iff a
  // path u->v ran through removed twins only. Contracted edges that had no
  // direct counterpart become DependsOn. tier_floor above the max tier
  // yields the roots. Tiers are recomputed within the view.
  TwinGraph abstract_view(int tier_floor) const;

  bool operator==(const TwinGraph&) const = default;

 private:
  void recompute_tiers();
  bool would_cycle(const std::string& parent_id, const std::string& child_id) const;
};

// Aggregates child values; EmptyChildSet on an empty input, never a default.
Value aggregate(Aggregator agg, const std::vector<Value>& values);

const char* to_string(AssetKind k);
const char* to_string(TwinFidelity f);
const char* to_string(Relation r);
const char* to_string(Aggregator a);
AssetKind asset_kind_from(const std::string& s);
TwinFidelity fidelity_from(const std::string& s);
Relation relation_from(const std::string& s);
Aggregator aggregator_from(const std::string& s);

// Canonical serialization: one JSON document, top-level keys
// assets/twins/edges/rules, one element per line, arrays sorted, LF
// newlines. parse(serialize(g)) == g and serialize is a fixed point on its
// own output.
std::string to_canonical_json(const TwinGraph& g);
TwinGraph graph_from_json(const std::string& text);

}  // namespace twinsim::graph
