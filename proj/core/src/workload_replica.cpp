#include "twinsim/workload_replica.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "twinsim/errors.hpp"
#include "twinsim/simkit.hpp"
#include "twinsim/stochastic_dag.hpp"
#include "twinsim/textfmt.hpp"

namespace twinsim::replica {

namespace {

struct ResolvedStage {
  std::string id;
  int replicas = 1;
  mixture::MixtureModel model;
};

// FIFO multi-server stations in series on one engine instance.
class ChainSim {
 public:
  ChainSim(std::vector<ResolvedStage> stages, ArrivalProcess arrivals, double rps,
           std::size_t n_requests, std::uint64_t engine_seed, bool collect_services)
      : engine_(engine_seed, /*record_log=*/false),
        stages_(std::move(stages)),
        collect_(collect_services) {
    state_.resize(stages_.size());
    for (std::size_t s = 0; s < stages_.size(); ++s) state_[s].free = stages_[s].replicas;
    if (collect_) services_.resize(stages_.size());
    responses_.resize(n_requests, 0.0);
    arrivals_.reserve(n_requests);

    // arrival times are drawn upfront from their own stream, so service
    // sampling can never perturb the arrival process
    Rng& arr = engine_.rng_for("arrivals");
    double rate_per_ns = rps / 1e9;
    std::uint64_t t = 0;
    for (std::size_t i = 0; i < n_requests; ++i) {
      if (arrivals == ArrivalProcess::Poisson) {
        t += static_cast<std::uint64_t>(std::llround(arr.next_exponential(rate_per_ns)));
      } else {
        t += static_cast<std::uint64_t>(std::llround(1e9 / rps));
      }
      arrivals_.push_back(t);
    }
  }

  void run() {
    if (arrivals_.empty()) return;
    schedule_arrival(0);
    engine_.run(std::numeric_limits<simkit::SimTime>::max());
  }

  std::vector<double> take_responses() { return std::move(responses_); }
  std::vector<std::vector<double>> take_services() { return std::move(services_); }

 private:
  struct StageState {
    int free = 0;
    std::deque<std::uint32_t> waiting;
  };

  void schedule_arrival(std::uint32_t req) {
    engine_.schedule(arrivals_[req] - engine_.now(), "src", "arr", [this, req] {
      if (req + 1 < arrivals_.size()) schedule_arrival(req + 1);
      enter_stage(req, 0);
    });
  }

  void enter_stage(std::uint32_t req, std::size_t s) {
    StageState& st = state_[s];
    if (st.free > 0) {
      st.free--;
      start_service(req, s);
    } else {
      st.waiting.push_back(req);
    }
  }

  void start_service(std::uint32_t req, std::size_t s) {
    double ms = mixture::sample_one(stages_[s].model, engine_.rng_for(stages_[s].id));
    if (collect_) services_[s].push_back(ms);
    auto ns = static_cast<std::uint64_t>(std::llround(ms * 1e6));
    engine_.schedule(ns, stages_[s].id, "done", [this, req, s] {
      if (s + 1 < stages_.size()) {
        enter_stage(req, s + 1);
      } else {
        responses_[req] = static_cast<double>(engine_.now() - arrivals_[req]) / 1e6;
      }
      StageState& st = state_[s];
      if (!st.waiting.empty()) {
        std::uint32_t next = st.waiting.front();
        st.waiting.pop_front();
        start_service(next, s);
      } else {
        st.free++;
      }
    });
  }

  simkit::Engine engine_;
  std::vector<ResolvedStage> stages_;
  bool collect_;
  std::vector<StageState> state_;
  std::vector<std::uint64_t> arrivals_;
  std::vector<double> responses_;
  std::vector<std::vector<double>> services_;
};

std::size_t request_count(const LoadPoint& p) {
  auto n = static_cast<std::int64_t>(std::llround(p.rps * p.duration_s));
  if (n < 1) raise(Errc::SchemaError, "load point yields < 1 request");
  return static_cast<std::size_t>(n);
}

std::uint64_t run_seed(std::uint64_t seed, const char* side, double load) {
  return Rng::stream_seed(seed, Rng::hash_id(std::string(side) + "|" + fmt_double(load)));
}

}  // namespace

GroundTruth generate_ground_truth(const ChainSpec& chain, const LoadProfile& profile,
                                  std::uint64_t seed) {
  if (chain.stages.empty()) raise(Errc::SchemaError, "chain needs >= 1 stage");
  for (double fl : profile.fit_loads) {
    bool found = false;
    for (const LoadPoint& p : profile.points) found |= p.rps == fl;
    if (!found) {
      raise(Errc::SchemaError, "fit load " + fmt_double(fl) + " is not a profile load");
    }
  }

  GroundTruth gt;
  for (const LoadPoint& point : profile.points) {
    std::vector<ResolvedStage> resolved;
    resolved.reserve(chain.stages.size());
    for (const StageSpec& stage : chain.stages) {
      auto it = stage.hidden.find(point.rps);
      if (it == stage.hidden.end()) {
        raise(Errc::MissingModelForLoad,
              "stage '" + stage.id + "' has no hidden model at load " + fmt_double(point.rps));
      }
      resolved.push_back({stage.id, stage.replicas, it->second});
    }
    bool fit_load = std::find(profile.fit_loads.begin(), profile.fit_loads.end(), point.rps) !=
                    profile.fit_loads.end();
    ChainSim sim(resolved, chain.arrivals, point.rps, request_count(point),
                 run_seed(seed, "real", point.rps), fit_load);
    sim.run();
    gt.responses_ms[point.rps] = sim.take_responses();
    if (fit_load) {
      auto services = sim.take_services();
      for (std::size_t s = 0; s < chain.stages.size(); ++s) {
        gt.stage_traces[chain.stages[s].id].push_back({point.rps, std::move(services[s])});
      }
    }
  }
  return gt;
}

std::map<double, std::vector<double>> replicate(const std::vector<TwinStage>& stages,
                                                ArrivalProcess arrivals,
                                                const LoadProfile& profile,
                                                std::uint64_t seed) {
  if (stages.empty()) raise(Errc::SchemaError, "chain needs >= 1 stage");
  std::map<double, std::vector<double>> out;
  for (const LoadPoint& point : profile.points) {
    std::vector<ResolvedStage> resolved;
    resolved.reserve(stages.size());
    for (const TwinStage& stage : stages) {
      if (stage.models.empty()) {
        raise(Errc::MissingModelForLoad, "stage '" + stage.id + "' has no fitted models");
      }
      const mixture::MixtureModel* exact = nullptr;
      for (const mixture::MixtureModel& m : stage.models) {
        if (m.load == point.rps) exact = &m;
      }
      if (exact) {
        resolved.push_back({stage.id, stage.replicas, *exact});
      } else if (stage.models.size() < 2) {
        raise(Errc::MissingModelForLoad,
              "stage '" + stage.id + "' has no model at load " + fmt_double(point.rps));
      } else {
        try {
          resolved.push_back({stage.id, stage.replicas,
                              mixture::interpolate(stage.models, point.rps)});
        } catch (const Error& e) {
          if (e.code() != Errc::ExtrapolationRefused) throw;
          raise(Errc::MissingModelForLoad,
                "stage '" + stage.id + "': load " + fmt_double(point.rps) +
                    " outside the fitted range");
        }
      }
    }
    ChainSim sim(resolved, arrivals, point.rps, request_count(point),
                 run_seed(seed, "twin", point.rps), false);
    sim.run();
    out[point.rps] = sim.take_responses();
  }
  return out;
}

RunComparison compare(const std::map<double, std::vector<double>>& real,
                      const std::map<double, std::vector<double>>& twin) {
  if (real.size() != twin.size()) {
    raise(Errc::SchemaError, "real and twin cover different load sets");
  }
  RunComparison out;
  for (const auto& [load, real_samples] : real) {
    auto tit = twin.find(load);
    if (tit == twin.end()) {
      raise(Errc::SchemaError, "twin misses load " + fmt_double(load));
    }
    const std::vector<double>& twin_samples = tit->second;
    if (real_samples.empty() || twin_samples.empty()) {
      raise(Errc::EmptySamples, "load " + fmt_double(load));
    }
    auto mean = [](const std::vector<double>& xs) {
      double s = 0.0;
      for (double x : xs) s += x;
      return s / static_cast<double>(xs.size());
    };
    auto p99 = [](std::vector<double> xs) {
      std::sort(xs.begin(), xs.end());
      return sdag::nearest_rank(std::move(xs), 0.99);
    };
    LoadComparison row;
    row.load = load;
    row.mean_real = mean(real_samples);
    row.p99_real = p99(real_samples);
    row.mean_twin = mean(twin_samples);
    row.p99_twin = p99(twin_samples);
    row.err_mean = std::abs(row.mean_twin - row.mean_real) / row.mean_real;
    row.err_p99 = std::abs(row.p99_twin - row.p99_real) / row.p99_real;
    out.rows.push_back(row);
  }
  return out;
}

std::string RunComparison::to_csv() const {
  std::string out =
      "load_rps,mean_real_ms,p99_real_ms,mean_twin_ms,p99_twin_ms,err_mean,err_p99\n";
  for (const LoadComparison& r : rows) {
    out += fmt_double(r.load);
    out += ',';
    out += fmt_double(r.mean_real);
    out += ',';
    out += fmt_double(r.p99_real);
    out += ',';
    out += fmt_double(r.mean_twin);
    out += ',';
    out += fmt_double(r.p99_twin);
    out += ',';
    out += fmt_double(r.err_mean);
    out += ',';
    out += fmt_double(r.err_p99);
    out += '\n';
  }
  return out;
}

const char* to_string(ArrivalProcess a) {
  return a == ArrivalProcess::Poisson ? "poisson" : "uniform";
}

ArrivalProcess arrival_from(const std::string& s) {
  if (s == "poisson") return ArrivalProcess::Poisson;
  if (s == "uniform") return ArrivalProcess::UniformSpaced;
  raise(Errc::SchemaError, "unknown arrival process '" + s + "'");
}

}  // namespace twinsim::replica
