#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "twinsim/rng.hpp"

namespace twinsim::mixture {

// Smallest stddev fit_em will produce, in ms. Keeps components regular on
// duplicated samples. Hand-built models may still use stddev 0 for
// degenerate point masses.
inline constexpr double kStddevFloor = 1e-3;

struct Component {
  double weight = 1.0;
  double mean = 0.0;    // ms
  double stddev = 0.0;  // ms

  bool operator==(const Component&) const = default;
};

// Weighted Gaussian mixture over response times at one load label.
struct MixtureModel {
  std::vector<Component> components;
  double load = 0.0;  // requests/s it was fitted at

  double mean() const;  // analytic, sum of w_i * mu_i
  double cdf(double x) const;

  bool operator==(const MixtureModel&) const = default;
};

struct Trace {
  double load = 0.0;
  std::vector<double> samples;  // response times, ms, all > 0
};

struct FitReport {
  std::vector<double> log_likelihood;  // index 0 is the initial model
  int iterations = 0;
  int restarts_used = 0;
  bool converged = false;
};

struct FitResult {
  MixtureModel model;
  FitReport report;
};

// EM fit with quantile-spread initial means refined by one k-means pass,
// 3 restarts on component collapse, best log-likelihood wins. Components
// come back sorted by ascending mean. Raises TooFewSamples when
// samples < 10*k, DegenerateComponent when restarts are exhausted.
FitResult fit_em(const Trace& trace, int k, std::uint64_t seed,
                 int max_iter = 200, double tol = 1e-6);

// Component-then-normal two-step; resamples until the draw is > 0.
double sample_one(const MixtureModel& m, Rng& rng);

std::vector<double> sample(const MixtureModel& m, std::size_t n, std::uint64_t seed);

// Value q with mixture CDF(q) = p, by bisection on the analytic CDF.
double percentile(const MixtureModel& m, double p);

// Piecewise-linear interpolation between the two models bracketing `load`,
// components matched by ascending mean, weights renormalized. A model
// fitted exactly at `load` is returned unchanged. ExtrapolationRefused
// outside the fitted range, ComponentCountMismatch on unequal k.
MixtureModel interpolate(const std::vector<MixtureModel>& models, double load);

// Trace CSV: header `load_rps,response_ms`, one sample per row. Traces come
// back grouped by load, ascending.
std::vector<Trace> traces_from_csv(const std::string& text);

// Canonical model persistence: {"load":...,"components":[{"w","mu","sigma"}]}.
std::string to_json(const MixtureModel& m);
MixtureModel model_from_json(const std::string& text);

}  // namespace twinsim::mixture
