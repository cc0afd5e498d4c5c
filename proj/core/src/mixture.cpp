#include "twinsim/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "twinsim/errors.hpp"

#include <json.hpp>

namespace twinsim::mixture {

namespace {

constexpr int kRestarts = 3;
constexpr int kMaxResample = 10000;

double normal_cdf(double x, double mean, double stddev) {
  if (stddev <= 0.0) return x < mean ? 0.0 : 1.0;
  return 0.5 * std::erfc(-(x - mean) / (stddev * std::numbers::sqrt2));
}

std::vector<Component> initial_components(const std::vector<double>& sorted, int k,
                                          int restart, Rng& rng) {
  std::size_t n = sorted.size();
  double mean_all = 0.0;
  for (double x : sorted) mean_all += x;
  mean_all /= static_cast<double>(n);
  double var_all = 0.0;
  for (double x : sorted) var_all += (x - mean_all) * (x - mean_all);
  double sd_all = std::max(std::sqrt(var_all / static_cast<double>(n)), kStddevFloor);

  // quantile-spread means; restarts jitter the quantile positions
  std::vector<Component> comps(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    double q = (restart == 0) ? (2.0 * j + 1.0) / (2.0 * k)
                              : (static_cast<double>(j) + rng.next_unit()) / k;
    auto idx = static_cast<std::size_t>(q * static_cast<double>(n - 1));
    comps[static_cast<std::size_t>(j)] = {1.0 / k, sorted[idx], sd_all};
  }
  std::sort(comps.begin(), comps.end(),
            [](const Component& a, const Component& b) { return a.mean < b.mean; });

  // one k-means pass to sharpen the seeds
  std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
  std::vector<double> sumsq(static_cast<std::size_t>(k), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
  for (double x : sorted) {
    std::size_t best = 0;
    double best_d = std::abs(x - comps[0].mean);
    for (std::size_t j = 1; j < comps.size(); ++j) {
      double d = std::abs(x - comps[j].mean);
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    sum[best] += x;
    sumsq[best] += x * x;
    count[best]++;
  }
  for (std::size_t j = 0; j < comps.size(); ++j) {
    if (count[j] == 0) continue;  // keep the quantile seed
    double m = sum[j] / static_cast<double>(count[j]);
    double var = sumsq[j] / static_cast<double>(count[j]) - m * m;
    comps[j].mean = m;
    comps[j].stddev = std::max(std::sqrt(std::max(var, 0.0)), kStddevFloor);
    comps[j].weight = static_cast<double>(count[j]) / static_cast<double>(n);
  }
  double wsum = 0.0;
  for (const Component& c : comps) wsum += c.weight;
  for (Component& c : comps) c.weight /= wsum;
  return comps;
}

struct EmRun {
  std::vector<Component> comps;
  std::vector<double> ll;
  bool degenerate = false;
  bool converged = false;
};

EmRun run_em(const std::vector<double>& xs, std::vector<Component> comps, int max_iter,
             double tol) {
  EmRun run;
  auto n = static_cast<double>(xs.size());
  std::size_t k = comps.size();

  // one fused pass per iteration: the E-step accumulators also yield the
  // log-likelihood of the current parameters, recorded before the M-step
  std::vector<double> c0(k), inv_sd(k), logp(k);
  std::vector<double> nk(k), sx(k), sxx(k);
  for (int iter = 0;; ++iter) {
    for (std::size_t j = 0; j < k; ++j) {
      c0[j] = std::log(comps[j].weight) - std::log(comps[j].stddev) -
              0.5 * std::log(2.0 * std::numbers::pi);
      inv_sd[j] = 1.0 / comps[j].stddev;
    }
    std::fill(nk.begin(), nk.end(), 0.0);
    std::fill(sx.begin(), sx.end(), 0.0);
    std::fill(sxx.begin(), sxx.end(), 0.0);
    double ll = 0.0;
    for (double x : xs) {
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        double z = (x - comps[j].mean) * inv_sd[j];
        logp[j] = c0[j] - 0.5 * z * z;
        m = std::max(m, logp[j]);
      }
      double denom = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        logp[j] = std::exp(logp[j] - m);
        denom += logp[j];
      }
      ll += m + std::log(denom);
      for (std::size_t j = 0; j < k; ++j) {
        double r = logp[j] / denom;
        nk[j] += r;
        sx[j] += r * x;
        sxx[j] += r * x * x;
      }
    }
    if (!std::isfinite(ll)) {
      run.degenerate = true;
      return run;
    }
    double prev = run.ll.empty() ? -std::numeric_limits<double>::infinity() : run.ll.back();
    run.ll.push_back(ll);
    if (iter > 0 && ll - prev < tol) {
      run.converged = true;
      break;
    }
    if (iter == max_iter) break;

    for (std::size_t j = 0; j < k; ++j) {
      if (!(nk[j] > 1e-12 * n)) {
        run.degenerate = true;  // component lost all responsibility mass
        return run;
      }
      double mean = sx[j] / nk[j];
      double var = sxx[j] / nk[j] - mean * mean;
      comps[j].weight = nk[j] / n;
      comps[j].mean = mean;
      // constrained M-step: the floor keeps duplicated samples regular and
      // preserves the monotone log-likelihood argument
      comps[j].stddev = std::max(std::sqrt(std::max(var, 0.0)), kStddevFloor);
    }
  }
  run.comps = std::move(comps);
  return run;
}

}  // namespace

double MixtureModel::mean() const {
  double m = 0.0;
  for (const Component& c : components) m += c.weight * c.mean;
  return m;
}

double MixtureModel::cdf(double x) const {
  double p = 0.0;
  for (const Component& c : components) p += c.weight * normal_cdf(x, c.mean, c.stddev);
  return p;
}

FitResult fit_em(const Trace& trace, int k, std::uint64_t seed, int max_iter, double tol) {
  if (k < 1) raise(Errc::SchemaError, "component count must be >= 1");
  const std::vector<double>& xs = trace.samples;
  if (xs.size() < static_cast<std::size_t>(10 * k)) {
    raise(Errc::TooFewSamples,
          std::to_string(xs.size()) + " samples for k=" + std::to_string(k) +
              " (need >= " + std::to_string(10 * k) + ")");
  }

  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());

  Rng rng(Rng::stream_seed(seed, Rng::hash_id("fit_em")));
  std::optional<EmRun> best;
  int restarts_used = 0;
  // multi-start against EM local optima; k=1 has a unique optimum
  int attempts = k == 1 ? 1 : kRestarts;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) restarts_used = attempt;
    EmRun run = run_em(xs, initial_components(sorted, k, attempt, rng), max_iter, tol);
    if (run.degenerate) continue;
    if (!best || run.ll.back() > best->ll.back()) best = std::move(run);
  }
  if (!best) {
    raise(Errc::DegenerateComponent,
          "component collapsed in every restart (k=" + std::to_string(k) + ")");
  }

  MixtureModel model;
  model.load = trace.load;
  model.components = best->comps;
  std::sort(model.components.begin(), model.components.end(),
            [](const Component& a, const Component& b) { return a.mean < b.mean; });

  FitReport report;
  report.log_likelihood = best->ll;
  report.iterations = static_cast<int>(best->ll.size()) - 1;
  report.restarts_used = restarts_used;
  report.converged = best->converged;
  return {std::move(model), std::move(report)};
}

double sample_one(const MixtureModel& m, Rng& rng) {
  if (m.components.empty()) raise(Errc::InvalidDistribution, "mixture has no components");
  for (int attempt = 0; attempt < kMaxResample; ++attempt) {
    double u = rng.next_unit();
    double acc = 0.0;
    const Component* chosen = &m.components.back();
    for (const Component& c : m.components) {
      acc += c.weight;
      if (u < acc) {
        chosen = &c;
        break;
      }
    }
    double v = chosen->stddev == 0.0 ? chosen->mean
                                     : rng.next_normal(chosen->mean, chosen->stddev);
    if (v > 0.0) return v;
  }
  raise(Errc::InvalidDistribution, "mixture produces no positive samples");
}

std::vector<double> sample(const MixtureModel& m, std::size_t n, std::uint64_t seed) {
  Rng rng(Rng::stream_seed(seed, Rng::hash_id("mixture_sample")));
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_one(m, rng));
  return out;
}

double percentile(const MixtureModel& m, double p) {
  if (!(p > 0.0 && p < 1.0)) raise(Errc::SchemaError, "percentile needs 0 < p < 1");
  if (m.components.empty()) raise(Errc::InvalidDistribution, "mixture has no components");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const Component& c : m.components) {
    lo = std::min(lo, c.mean - 40.0 * c.stddev - 1.0);
    hi = std::max(hi, c.mean + 40.0 * c.stddev + 1.0);
  }
  while (m.cdf(lo) > p) lo -= (hi - lo);
  while (m.cdf(hi) < p) hi += (hi - lo);

  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    double c = m.cdf(mid);
    if (std::abs(c - p) <= 1e-9) return mid;
    if (c < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(hi))) break;
  }
  return hi;  // CDF(hi) >= p, interval collapsed
}

MixtureModel interpolate(const std::vector<MixtureModel>& models, double load) {
  if (models.size() < 2) {
    raise(Errc::SchemaError, "interpolation needs at least 2 fitted models");
  }
  std::vector<const MixtureModel*> sorted;
  sorted.reserve(models.size());
  for (const MixtureModel& m : models) sorted.push_back(&m);
  std::sort(sorted.begin(), sorted.end(),
            [](const MixtureModel* a, const MixtureModel* b) { return a->load < b->load; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->load == sorted[i - 1]->load) {
      raise(Errc::SchemaError, "fitted loads must be distinct");
    }
  }
  for (const MixtureModel* m : sorted) {
    if (m->load == load) return *m;
  }
  if (load < sorted.front()->load || load > sorted.back()->load) {
    raise(Errc::ExtrapolationRefused,
          "load " + std::to_string(load) + " outside fitted range [" +
              std::to_string(sorted.front()->load) + ", " + std::to_string(sorted.back()->load) +
              "]");
  }
  std::size_t hi_idx = 1;
  while (sorted[hi_idx]->load < load) ++hi_idx;
  const MixtureModel& a = *sorted[hi_idx - 1];
  const MixtureModel& b = *sorted[hi_idx];
  if (a.components.size() != b.components.size()) {
    raise(Errc::ComponentCountMismatch,
          "k=" + std::to_string(a.components.size()) + " at load " + std::to_string(a.load) +
              " vs k=" + std::to_string(b.components.size()) + " at load " +
              std::to_string(b.load));
  }

  auto by_mean = [](std::vector<Component> cs) {
    std::sort(cs.begin(), cs.end(),
              [](const Component& x, const Component& y) { return x.mean < y.mean; });
    return cs;
  };
  std::vector<Component> ca = by_mean(a.components);
  std::vector<Component> cb = by_mean(b.components);

  double t = (load - a.load) / (b.load - a.load);
  MixtureModel out;
  out.load = load;
  out.components.reserve(ca.size());
  double wsum = 0.0;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    Component c;
    c.weight = ca[i].weight + t * (cb[i].weight - ca[i].weight);
    c.mean = ca[i].mean + t * (cb[i].mean - ca[i].mean);
    c.stddev = ca[i].stddev + t * (cb[i].stddev - ca[i].stddev);
    wsum += c.weight;
    out.components.push_back(c);
  }
  for (Component& c : out.components) c.weight /= wsum;
  return out;
}

std::vector<Trace> traces_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) raise(Errc::SchemaError, "empty trace CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "load_rps,response_ms") {
    raise(Errc::SchemaError, "trace CSV header must be 'load_rps,response_ms'");
  }
  std::map<double, std::vector<double>> by_load;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) {
      raise(Errc::SchemaError, "trace CSV row " + std::to_string(row) + ": missing comma");
    }
    try {
      double load = std::stod(line.substr(0, comma));
      double ms = std::stod(line.substr(comma + 1));
      if (!(ms > 0.0)) {
        raise(Errc::SchemaError,
              "trace CSV row " + std::to_string(row) + ": response must be > 0");
      }
      by_load[load].push_back(ms);
    } catch (const std::invalid_argument&) {
      raise(Errc::SchemaError, "trace CSV row " + std::to_string(row) + ": not a number");
    }
  }
  std::vector<Trace> out;
  out.reserve(by_load.size());
  for (auto& [load, samples] : by_load) out.push_back({load, std::move(samples)});
  return out;
}

std::string to_json(const MixtureModel& m) {
  nlohmann::ordered_json j;
  j["load"] = m.load;
  j["components"] = nlohmann::ordered_json::array();
  for (const Component& c : m.components) {
    nlohmann::ordered_json jc;
    jc["w"] = c.weight;
    jc["mu"] = c.mean;
    jc["sigma"] = c.stddev;
    j["components"].push_back(jc);
  }
  return j.dump();
}

MixtureModel model_from_json(const std::string& text) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    raise(Errc::SchemaError, std::string("invalid model JSON: ") + e.what());
  }
  MixtureModel m;
  if (!j.is_object() || !j.contains("load") || !j.contains("components")) {
    raise(Errc::SchemaError, "model JSON needs {load, components}");
  }
  m.load = j["load"].get<double>();
  for (const auto& jc : j["components"]) {
    Component c;
    c.weight = jc.at("w").get<double>();
    c.mean = jc.at("mu").get<double>();
    c.stddev = jc.at("sigma").get<double>();
    if (!(c.weight > 0.0)) raise(Errc::SchemaError, "component weights must be > 0");
    if (c.stddev < 0.0) raise(Errc::SchemaError, "component sigma must be >= 0");
    m.components.push_back(c);
  }
  if (m.components.empty()) raise(Errc::SchemaError, "model needs >= 1 component");
  double wsum = 0.0;
  for (const Component& c : m.components) wsum += c.weight;
  if (std::abs(wsum - 1.0) > 1e-9) raise(Errc::SchemaError, "component weights must sum to 1");
  return m;
}

}  // namespace twinsim::mixture
