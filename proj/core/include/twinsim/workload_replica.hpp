#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "twinsim/mixture.hpp"

namespace twinsim::replica {

enum class ArrivalProcess { Poisson, UniformSpaced };

// One microservice stage: FIFO multi-server station, service times in ms.
// For ground truth the per-load hidden models play the real system; the
// twin side carries fitted models instead.
struct StageSpec {
  std::string id;
  int replicas = 1;
  std::map<double, mixture::MixtureModel> hidden;  // by load (rps)
};

struct ChainSpec {
  std::vector<StageSpec> stages;
  ArrivalProcess arrivals = ArrivalProcess::Poisson;
};

struct LoadPoint {
  double rps = 0.0;
  double duration_s = 0.0;  // requests = round(rps * duration_s)
};

struct LoadProfile {
  std::vector<LoadPoint> points;
  std::vector<double> fit_loads;  // subset of points used for fitting
};

struct GroundTruth {
  // end-to-end response times per load, ms, arrival order
  std::map<double, std::vector<double>> responses_ms;
  // measured per-stage service times at the fit loads, for model fitting
  std::map<std::string, std::vector<mixture::Trace>> stage_traces;
};

struct TwinStage {
  std::string id;
  int replicas = 1;
  std::vector<mixture::MixtureModel> models;  // one per fitted load
};

// Simulates the chain with the hidden distributions; each response is the
// sum of sampled stage times plus any replica-queueing wait. Deterministic
// per seed.
GroundTruth generate_ground_truth(const ChainSpec& chain, const LoadProfile& profile,
                                  std::uint64_t seed);

// Same mechanics, sampling from the fitted models; loads between fitted
// loads use mixture::interpolate. MissingModelForLoad outside the range.
std::map<double, std::vector<double>> replicate(const std::vector<TwinStage>& stages,
                                                ArrivalProcess arrivals,
                                                const LoadProfile& profile,
                                                std::uint64_t seed);

struct LoadComparison {
  double load = 0.0;
  double mean_real = 0.0;
  double p99_real = 0.0;
  double mean_twin = 0.0;
  double p99_twin = 0.0;
  double err_mean = 0.0;  // |twin - real| / real
  double err_p99 = 0.0;
};

struct RunComparison {
  std::vector<LoadComparison> rows;  // ascending load

  // CSV `load_rps,mean_real_ms,p99_real_ms,mean_twin_ms,p99_twin_ms,err_mean,err_p99`
  std::string to_csv() const;
};

// Per-load means and nearest-rank p99s with relative errors; loads must
// match between the two sets. EmptySamples on any empty per-load set.
RunComparison compare(const std::map<double, std::vector<double>>& real,
                      const std::map<double, std::vector<double>>& twin);

const char* to_string(ArrivalProcess a);
ArrivalProcess arrival_from(const std::string& s);

}  // namespace twinsim::replica
