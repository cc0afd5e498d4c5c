#include "twinsim/simkit.hpp"

#include <utility>

#include "twinsim/errors.hpp"

#include <json.hpp>

namespace twinsim::simkit {

std::string EventLog::to_jsonl() const {
  std::string out;
  for (const LogRecord& r : records) {
    nlohmann::ordered_json j;
    j["t_ns"] = r.t_ns;
    j["seq"] = r.seq;
    j["origin"] = r.origin;
    j["kind"] = r.kind;
    j["detail"] = r.detail;
    out += j.dump();
    out += '\n';
  }
  return out;
}

bool Engine::Later::operator()(const Pending& a, const Pending& b) const {
  if (a.t != b.t) return a.t > b.t;
  if (a.priority != b.priority) return a.priority > b.priority;
  return a.seq > b.seq;
}

Engine::Engine(std::uint64_t seed, bool record_log)
    : seed_(seed), record_log_(record_log) {}

Engine::Handle Engine::schedule(SimTime delay, std::string origin, std::string kind,
                                Action action, int priority, std::string detail) {
  if (halted_) raise(Errc::EngineStopped, "schedule after halt");
  Pending p{now_ + delay,     priority,          next_seq_++,
            std::move(origin), std::move(kind),  std::move(detail),
            std::move(action)};
  Handle h{p.seq};
  pending_.insert(p.seq);
  queue_.push(std::move(p));
  return h;
}

bool Engine::cancel(Handle h) {
  // lazy: tombstone the seq, skip it on pop
  if (pending_.erase(h.seq) == 0) return false;
  cancelled_.insert(h.seq);
  return true;
}

const EventLog& Engine::run(SimTime until) {
  while (!halted_ && !queue_.empty()) {
    if (queue_.top().t > until) break;
    Pending ev = queue_.top();
    queue_.pop();
    if (cancelled_.erase(ev.seq) > 0) continue;
    pending_.erase(ev.seq);
    now_ = ev.t;
    if (record_log_) {
      log_.records.push_back({ev.t, ev.seq, ev.origin, ev.kind, ev.detail});
    }
    if (ev.action) ev.action();
  }
  return log_;
}

void Engine::halt() { halted_ = true; }

Rng& Engine::rng_for(std::string_view entity) {
  auto it = streams_.find(entity);
  if (it == streams_.end()) {
    std::uint64_t s = Rng::stream_seed(seed_, Rng::hash_id(entity));
    it = streams_.emplace(std::string(entity), Rng(s)).first;
  }
  return it->second;
}

}  // namespace twinsim::simkit
