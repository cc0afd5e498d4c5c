#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "twinsim/rng.hpp"

namespace twinsim::simkit {

// Nanoseconds since simulation start. Integer so tie-breaking is exact and
// latency arithmetic never drifts.
using SimTime = std::uint64_t;

struct LogRecord {
  SimTime t_ns = 0;
  std::uint64_t seq = 0;
  std::string origin;
  std::string kind;
  std::string detail;

  bool operator==(const LogRecord&) const = default;
};

// Append-only record of processed events, ordered by (t, priority, seq).
// Cancelled events never appear.
struct EventLog {
  std::vector<LogRecord> records;

  // JSON lines, one event per line, field order {t_ns, seq, origin, kind, detail}.
  std::string to_jsonl() const;

  bool operator==(const EventLog&) const = default;
};

// Single-threaded discrete-event engine. Separate engine instances may run
// on separate threads; one engine never shares state.
class Engine {
 public:
  using Action = std::function<void()>;

  struct Handle {
    std::uint64_t seq = 0;
  };

  explicit Engine(std::uint64_t seed, bool record_log = true);

  // Enqueue at now + delay. Total order is (time, priority, seq); seq is the
  // global insertion counter, so same-time events run in insertion order.
  Handle schedule(SimTime delay, std::string origin, std::string kind,
                  Action action, int priority = 0, std::string detail = {});

  // True if the event was still pending.
  bool cancel(Handle h);

  // Process every event with time <= until. The clock follows processed
  // events only: with no events it stays where it was.
  const EventLog& run(SimTime until);

  SimTime now() const { return now_; }
  std::uint64_t seed() const { return seed_; }

  // Stop accepting events; schedule() raises EngineStopped afterwards.
  void halt();
  bool halted() const { return halted_; }

  // Per-entity random stream, derived from (seed, entity id). Streams are
  // created on first use and persist for the engine's lifetime.
  Rng& rng_for(std::string_view entity);

  const EventLog& log() const { return log_; }

 private:
  struct Pending {
    SimTime t;
    int priority;
    std::uint64_t seq;
    std::string origin;
    std::string kind;
    std::string detail;
    Action action;
  };
  struct Later {
    bool operator()(const Pending& a, const Pending& b) const;
  };

  std::uint64_t seed_;
  bool record_log_;
  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  bool halted_ = false;
  std::priority_queue<Pending, std::vector<Pending>, Later> queue_;
  std::unordered_set<std::uint64_t> pending_;
  std::unordered_set<std::uint64_t> cancelled_;
  std::map<std::string, Rng, std::less<>> streams_;
  EventLog log_;
};

}  // namespace twinsim::simkit
