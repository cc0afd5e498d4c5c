#include "twinsim/tsn_mgmt.hpp"

#include <algorithm>
#include <queue>
#include <set>

#include "twinsim/errors.hpp"

#include <json.hpp>

namespace twinsim::tsn {

namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ',';
    out += parts[i];
  }
  return out;
}

}  // namespace

void Topology::check() const {
  for (const auto& [id, link] : links) {
    if (link.id != id) raise(Errc::SchemaError, "link key '" + id + "' != link id");
    if (!nodes.contains(link.a)) raise(Errc::UnknownDevice, "link '" + id + "' endpoint '" + link.a + "'");
    if (!nodes.contains(link.b)) raise(Errc::UnknownDevice, "link '" + id + "' endpoint '" + link.b + "'");
    if (link.per_hop_latency_ns == 0) {
      raise(Errc::SchemaError, "link '" + id + "' needs per-hop latency > 0");
    }
  }
  // end devices must be mutually reachable when every link is up
  std::vector<std::string> end_devices;
  for (const auto& [id, kind] : nodes) {
    if (kind == DeviceKind::EndDevice) end_devices.push_back(id);
  }
  if (end_devices.size() < 2) return;
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& [id, link] : links) {
    adj[link.a].push_back(link.b);
    adj[link.b].push_back(link.a);
  }
  std::set<std::string> seen{end_devices.front()};
  std::vector<std::string> stack{end_devices.front()};
  while (!stack.empty()) {
    std::string cur = stack.back();
    stack.pop_back();
    for (const std::string& n : adj[cur]) {
      if (seen.insert(n).second) stack.push_back(n);
    }
  }
  for (const std::string& ed : end_devices) {
    if (!seen.contains(ed)) {
      raise(Errc::SchemaError, "end device '" + ed + "' unreachable with all links up");
    }
  }
}

std::vector<std::string> select_path(const Topology& topo, const std::string& src,
                                     const std::string& dst) {
  auto sit = topo.nodes.find(src);
  auto dit = topo.nodes.find(dst);
  if (sit == topo.nodes.end()) raise(Errc::UnknownDevice, "'" + src + "'");
  if (dit == topo.nodes.end()) raise(Errc::UnknownDevice, "'" + dst + "'");
  if (sit->second != DeviceKind::EndDevice || dit->second != DeviceKind::EndDevice) {
    raise(Errc::NoPath, "flow endpoints must be end devices");
  }
  if (src == dst) raise(Errc::NoPath, "src == dst is degenerate");

  // adjacency over up links, per node sorted by link id (map order)
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> adj;
  for (const auto& [id, link] : topo.links) {
    if (!link.up) continue;
    adj[link.a].push_back({id, link.b});
    adj[link.b].push_back({id, link.a});
  }

  // fewest hops, ties by lexicographic link-id sequence: a best-first search
  // ordered by (hops, link sequence) pops the optimum first
  using State = std::pair<std::vector<std::string>, std::string>;  // (links, node)
  auto worse = [](const State& a, const State& b) {
    if (a.first.size() != b.first.size()) return a.first.size() > b.first.size();
    return a.first > b.first;
  };
  std::priority_queue<State, std::vector<State>, decltype(worse)> frontier(worse);
  frontier.push({{}, src});
  std::set<std::string> done;
  while (!frontier.empty()) {
    auto [path, node] = frontier.top();
    frontier.pop();
    if (node == dst) return path;
    if (!done.insert(node).second) continue;
    for (const auto& [link_id, next] : adj[node]) {
      if (done.contains(next)) continue;
      // only switches forward traffic
      if (next != dst && topo.nodes.at(next) != DeviceKind::Switch) continue;
      std::vector<std::string> np = path;
      np.push_back(link_id);
      frontier.push({std::move(np), next});
    }
  }
  raise(Errc::NoPath, "no up path from '" + src + "' to '" + dst + "'");
}

TsnSim::TsnSim(simkit::Engine& engine, Topology topology, const MgmtConfig& cfg)
    : engine_(engine), topo_(std::move(topology)), cfg_(cfg) {
  topo_.check();
  sync_registry();
  if (cfg_.registry_refresh_ns && *cfg_.registry_refresh_ns > 0) {
    std::uint64_t period = *cfg_.registry_refresh_ns;
    // self-rescheduling refresh tick
    struct Refresher {
      TsnSim* sim;
      std::uint64_t period;
      void operator()() const {
        sim->sync_registry();
        sim->engine_.schedule(period, "dt", "dt_refresh", Refresher{sim, period});
      }
    };
    engine_.schedule(period, "dt", "dt_refresh", Refresher{this, period});
  }
}

void TsnSim::sync_registry() {
  registry_.topology = topo_;
  registry_.flows = flows_;
  registry_.last_update = engine_.now();
}

const std::vector<std::string>& TsnSim::initial_path(const std::string& flow_id) const {
  auto it = initial_paths_.find(flow_id);
  if (it == initial_paths_.end()) raise(Errc::UnknownLink, "flow '" + flow_id + "' never activated");
  return it->second;
}

const std::vector<std::string>& TsnSim::current_path(const std::string& flow_id) const {
  auto it = flows_.find(flow_id);
  if (it == flows_.end()) raise(Errc::UnknownLink, "unknown flow '" + flow_id + "'");
  return it->second.path;
}

void TsnSim::configure_flow(const TrafficSpec& spec) {
  if (flows_.contains(spec.flow_id)) raise(Errc::DuplicateId, "flow '" + spec.flow_id + "'");
  // fail fast when no path can exist right now
  std::vector<std::string> path = select_path(topo_, spec.src, spec.dst);

  Flow flow;
  flow.id = spec.flow_id;
  flow.src = spec.src;
  flow.dst = spec.dst;
  flow.qos = spec.qos;
  flow.state = FlowState::Reconfiguring;
  flows_.emplace(spec.flow_id, std::move(flow));
  agents_[spec.flow_id].period_ns = spec.period_ns;
  path_versions_[spec.flow_id] = -1;

  std::string fid = spec.flow_id;
  engine_.schedule(0, "cnc", "cfg_request", [this, fid] { reconfigure(fid); }, 0,
                   "flow=" + fid);
}

void TsnSim::reconfigure(const std::string& flow_id) {
  engine_.schedule(cfg_.compute_delay_ns, "cnc", "cfg_computed", [this, flow_id] {
    Flow& flow = flows_.at(flow_id);
    std::vector<std::string> path;
    try {
      path = select_path(topo_, flow.src, flow.dst);
    } catch (const Error& e) {
      if (e.code() != Errc::NoPath) throw;
      flow.state = FlowState::Down;
      engine_.schedule(0, "cnc", "flow_down", [this] { sync_registry(); }, 0,
                       "flow=" + flow_id);
      return;
    }
    // switch config and device config push in parallel; the flow goes
    // active when the later one lands
    auto remaining = std::make_shared<int>(2);
    auto arm = [this, flow_id, path, remaining] {
      if (--*remaining == 0) {
        engine_.schedule(0, "cnc", "flow_active",
                         [this, flow_id, path] { activate(flow_id, path); }, 0,
                         "flow=" + flow_id + " path=" + join(path));
      }
    };
    engine_.schedule(cfg_.push_delay_net_ns, "cnc", "cfg_push_net_done", arm, 0,
                     "flow=" + flow_id + " path=" + join(path));
    engine_.schedule(cfg_.push_delay_dev_ns, "cuc", "cfg_push_dev_done", arm, 0,
                     "flow=" + flow_id + " path=" + join(path));
  }, 0, "flow=" + flow_id);
}

void TsnSim::activate(const std::string& flow_id, std::vector<std::string> path) {
  Flow& flow = flows_.at(flow_id);
  flow.path = std::move(path);
  flow.state = FlowState::Active;
  int& version = path_versions_.at(flow_id);
  ++version;
  if (version == 0) initial_paths_[flow_id] = flow.path;
  sync_registry();
  start_traffic(flow_id);
}

void TsnSim::start_traffic(const std::string& flow_id) {
  AgentState& agent = agents_.at(flow_id);
  if (agent.period_ns == 0) return;
  // re-anchor the periodic schedule at activation time
  if (agent.has_pending) {
    engine_.cancel(agent.pending_tx);
    agent.has_pending = false;
  }
  const Flow& flow = flows_.at(flow_id);
  engine_.schedule(0, flow.src, "pkt_tx", [this, flow_id] { transmit(flow_id); }, 0,
                   "flow=" + flow_id);
}

void TsnSim::transmit(const std::string& flow_id) {
  Flow& flow = flows_.at(flow_id);
  AgentState& agent = agents_.at(flow_id);
  agent.pending_tx = engine_.schedule(agent.period_ns, flow.src, "pkt_tx",
                                      [this, flow_id] { transmit(flow_id); }, 0,
                                      "flow=" + flow_id);
  agent.has_pending = true;
  if (flow.path.empty()) return;

  Packet pkt;
  pkt.flow_id = flow_id;
  pkt.tx_ns = engine_.now();
  pkt.path = flow.path;  // the device transmits on its configured path
  pkt.hop = 0;
  pkt.path_version = path_versions_.at(flow_id);
  pkt.pkt_seq = next_pkt_seq_++;
  enter_link(std::move(pkt));
}

void TsnSim::enter_link(Packet pkt) {
  const std::string& link_id = pkt.path[pkt.hop];
  auto lit = topo_.links.find(link_id);
  if (lit == topo_.links.end() || !lit->second.up) {
    engine_.schedule(0, link_id, "pkt_drop", {}, 0,
                     "flow=" + pkt.flow_id + " reason=link_down");
    return;
  }
  const Link& link = lit->second;
  bool last = pkt.hop + 1 == pkt.path.size();
  std::uint64_t pkt_seq = pkt.pkt_seq;
  std::string flow_id = pkt.flow_id;
  simkit::SimTime rx = engine_.now() + link.per_hop_latency_ns;
  std::string detail = "flow=" + flow_id;
  if (last) detail += " latency_ns=" + std::to_string(rx - pkt.tx_ns);

  flying_[pkt_seq] = std::move(pkt);
  auto handle = engine_.schedule(
      link.per_hop_latency_ns, link_id, last ? "pkt_rx" : "pkt_hop",
      [this, pkt_seq, link_id, last] {
        auto fit = flying_.find(pkt_seq);
        Packet p = std::move(fit->second);
        flying_.erase(fit);
        in_flight_[link_id].erase(pkt_seq);
        if (last) {
          deliveries_.push_back(
              {engine_.now(), p.flow_id, engine_.now() - p.tx_ns, p.path_version});
        } else {
          p.hop++;
          enter_link(std::move(p));
        }
      },
      0, detail);
  in_flight_[link_id][pkt_seq] = handle;
}

void TsnSim::inject_link_failure(const std::string& link_id, simkit::SimTime at) {
  auto lit = topo_.links.find(link_id);
  if (lit == topo_.links.end()) raise(Errc::UnknownLink, "'" + link_id + "'");
  if (!lit->second.up) raise(Errc::UnknownLink, "link '" + link_id + "' is already down");
  if (at < engine_.now()) raise(Errc::SchemaError, "failure time is in the past");
  engine_.schedule(at - engine_.now(), link_id, "link_down",
                   [this, link_id] { on_link_down(link_id); }, 0, "link=" + link_id);
}

void TsnSim::on_link_down(const std::string& link_id) {
  topo_.links.at(link_id).up = false;
  // packets mid-crossing are lost
  auto& crossing = in_flight_[link_id];
  for (auto& [pkt_seq, handle] : crossing) {
    engine_.cancel(handle);
    auto fit = flying_.find(pkt_seq);
    engine_.schedule(0, link_id, "pkt_drop", {}, 0,
                     "flow=" + fit->second.flow_id + " reason=in_flight");
    flying_.erase(fit);
  }
  crossing.clear();
  engine_.schedule(cfg_.detect_delay_ns, "cnc", "cnc_notified",
                   [this, link_id] { on_cnc_notified(link_id); }, 0, "link=" + link_id);
}

void TsnSim::on_cnc_notified(const std::string& link_id) {
  std::vector<std::string> affected;
  for (auto& [fid, flow] : flows_) {
    if (flow.state != FlowState::Active) continue;
    if (std::find(flow.path.begin(), flow.path.end(), link_id) != flow.path.end()) {
      flow.state = FlowState::Reconfiguring;
      affected.push_back(fid);
    }
  }
  // the notification itself is a management transaction: the DT learns the
  // link state and any flows now reconfiguring
  sync_registry();
  for (const std::string& fid : affected) reconfigure(fid);
}

std::string FailoverReport::series_csv() const {
  std::string out = "t_ns,flow_id,latency_ns\n";
  for (const Delivery& d : deliveries) {
    out += std::to_string(d.t_ns);
    out += ',';
    out += d.flow_id;
    out += ',';
    out += std::to_string(d.latency_ns);
    out += '\n';
  }
  return out;
}

std::string FailoverReport::summary_json() const {
  nlohmann::ordered_json j;
  j["downtime_ns"] = downtime_ns;
  j["path_before"] = path_before;
  j["path_after"] = path_after;
  return j.dump();
}

FailoverReport run_failover_scenario(const Topology& topo, const MgmtConfig& cfg,
                                     const TrafficSpec& traffic,
                                     const std::optional<FailureSpec>& failure,
                                     simkit::SimTime until, std::uint64_t seed,
                                     simkit::EventLog* out_log) {
  simkit::Engine engine(seed);
  TsnSim sim(engine, topo, cfg);
  sim.configure_flow(traffic);
  if (failure) sim.inject_link_failure(failure->link_id, failure->at_ns);
  engine.run(until);

  FailoverReport report;
  report.deliveries = sim.deliveries();
  report.path_before = sim.initial_path(traffic.flow_id);
  report.path_after = sim.current_path(traffic.flow_id);

  std::optional<simkit::SimTime> last_old;
  std::optional<simkit::SimTime> first_new;
  for (const Delivery& d : report.deliveries) {
    if (d.path_version == 0) last_old = d.t_ns;
    if (d.path_version > 0 && !first_new) first_new = d.t_ns;
  }
  report.downtime_ns = (last_old && first_new) ? *first_new - *last_old : 0;
  if (out_log) *out_log = engine.log();
  return report;
}

const char* to_string(DeviceKind k) {
  return k == DeviceKind::Switch ? "switch" : "end_device";
}

const char* to_string(FlowState s) {
  switch (s) {
    case FlowState::Active: return "Active";
    case FlowState::Reconfiguring: return "Reconfiguring";
    case FlowState::Down: return "Down";
  }
  return "?";
}

DeviceKind device_kind_from(const std::string& s) {
  if (s == "switch") return DeviceKind::Switch;
  if (s == "end_device") return DeviceKind::EndDevice;
  raise(Errc::SchemaError, "unknown device kind '" + s + "'");
}

}  // namespace twinsim::tsn
