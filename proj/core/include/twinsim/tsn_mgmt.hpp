#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "twinsim/simkit.hpp"

namespace twinsim::tsn {

enum class DeviceKind { Switch, EndDevice };

struct Link {
  std::string id;
  std::string a;
  std::string b;
  std::uint64_t per_hop_latency_ns = 0;  // > 0
  bool up = true;

  bool operator==(const Link&) const = default;
};

struct Topology {
  std::map<std::string, DeviceKind> nodes;
  std::map<std::string, Link> links;  // keyed by link id

  // Endpoints exist, latencies > 0, end devices connected when all links up.
  void check() const;

  bool operator==(const Topology&) const = default;
};

enum class FlowState { Active, Reconfiguring, Down };

struct Flow {
  std::string id;
  std::string src;
  std::string dst;
  int qos = 0;
  std::vector<std::string> path;  // ordered link ids, src -> dst
  FlowState state = FlowState::Down;

  bool operator==(const Flow&) const = default;
};

struct MgmtConfig {
  std::uint64_t detect_delay_ns = 0;    // failure notification latency
  std::uint64_t compute_delay_ns = 0;   // CNC path computation
  std::uint64_t push_delay_net_ns = 0;  // CNC -> switches
  std::uint64_t push_delay_dev_ns = 0;  // CUC -> agents
  std::optional<std::uint64_t> registry_refresh_ns;  // optional periodic DT refresh
};

// DT of the managed network: snapshot of topology and flow state, synced at
// each completed management transaction (and optionally periodically).
struct DtRegistry {
  Topology topology;
  std::map<std::string, Flow> flows;
  simkit::SimTime last_update = 0;
};

struct TrafficSpec {
  std::string flow_id;
  std::string src;
  std::string dst;
  int qos = 0;
  std::uint64_t period_ns = 0;
};

struct FailureSpec {
  std::string link_id;
  simkit::SimTime at_ns = 0;
};

struct Delivery {
  simkit::SimTime t_ns = 0;  // receive time
  std::string flow_id;
  std::uint64_t latency_ns = 0;  // receive - transmit
  int path_version = 0;          // 0 = initial path, +1 per reconfiguration

  bool operator==(const Delivery&) const = default;
};

struct FailoverReport {
  std::vector<Delivery> deliveries;
  std::uint64_t downtime_ns = 0;  // last old-path rx -> first new-path rx
  std::vector<std::string> path_before;
  std::vector<std::string> path_after;

  // CSV `t_ns,flow_id,latency_ns`, one delivered packet per row.
  std::string series_csv() const;
  // {"downtime_ns":...,"path_before":[...],"path_after":[...]}
  std::string summary_json() const;
};

// Fewest hops over up links, ties broken by lexicographic link-id sequence.
// Endpoints must be end devices; intermediate nodes are switches. Raises
// NoPath (src == dst is rejected as degenerate), UnknownDevice.
std::vector<std::string> select_path(const Topology& topo, const std::string& src,
                                     const std::string& dst);

// CNC + CUC + per-device agents wired onto one engine. The CNC owns path
// computation and switch config, the CUC pushes device config through the
// agents, the registry mirrors the managed state.
class TsnSim {
 public:
  TsnSim(simkit::Engine& engine, Topology topology, const MgmtConfig& cfg);

  // Starts the configuration transaction at the current time; the flow goes
  // Active at compute + max(push_net, push_dev) and periodic traffic starts
  // at activation. Raises NoPath when no path exists over up links now.
  void configure_flow(const TrafficSpec& spec);

  // Marks the link down at `at`, drops packets then in flight on it, and
  // notifies the CNC detect_delay later. Raises UnknownLink.
  void inject_link_failure(const std::string& link_id, simkit::SimTime at);

  const Topology& topology() const { return topo_; }
  const std::map<std::string, Flow>& flows() const { return flows_; }
  const DtRegistry& registry() const { return registry_; }
  const std::vector<Delivery>& deliveries() const { return deliveries_; }
  const std::vector<std::string>& initial_path(const std::string& flow_id) const;
  const std::vector<std::string>& current_path(const std::string& flow_id) const;

 private:
  struct AgentState {
    std::uint64_t period_ns = 0;
    simkit::Engine::Handle pending_tx;
    bool has_pending = false;
  };
  struct Packet {
    std::string flow_id;
    simkit::SimTime tx_ns = 0;
    std::vector<std::string> path;
    std::size_t hop = 0;
    int path_version = 0;
    std::uint64_t pkt_seq = 0;
  };

  void sync_registry();
  void start_traffic(const std::string& flow_id);
  void transmit(const std::string& flow_id);
  void enter_link(Packet pkt);
  void on_link_down(const std::string& link_id);
  void on_cnc_notified(const std::string& link_id);
  void reconfigure(const std::string& flow_id);
  void activate(const std::string& flow_id, std::vector<std::string> path);

  simkit::Engine& engine_;
  Topology topo_;
  MgmtConfig cfg_;
  std::map<std::string, Flow> flows_;
  std::map<std::string, AgentState> agents_;
  std::map<std::string, std::vector<std::string>> initial_paths_;
  std::map<std::string, int> path_versions_;
  // in-flight crossings per link: pkt_seq -> pending hop-exit event
  std::map<std::string, std::map<std::uint64_t, simkit::Engine::Handle>> in_flight_;
  std::map<std::uint64_t, Packet> flying_;
  DtRegistry registry_;
  std::vector<Delivery> deliveries_;
  std::uint64_t next_pkt_seq_ = 0;
};

// Builds an engine, configures the flow at t=0, optionally injects the
// failure, runs to `until` and derives the report. Deterministic per seed;
// the event log lands in *out_log when given.
FailoverReport run_failover_scenario(const Topology& topo, const MgmtConfig& cfg,
                                     const TrafficSpec& traffic,
                                     const std::optional<FailureSpec>& failure,
                                     simkit::SimTime until, std::uint64_t seed,
                                     simkit::EventLog* out_log = nullptr);

const char* to_string(DeviceKind k);
const char* to_string(FlowState s);
DeviceKind device_kind_from(const std::string& s);

}  // namespace twinsim::tsn
