#pragma once

/**
 * @file sim.hpp
 * @brief Monte Carlo scenarios for the GPD estimators: contamination and
 * misspecification settings, per-replicate fits, summaries and L1 distances
 * between fitted and true densities.
 */

#include "lmdiv/distributions.hpp"
#include "lmdiv/estimator.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lmdiv {

// ---------------------------------------------------------------------------
// Summaries

struct Summary {
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;
  std::size_t count = 0;
  bool degenerate = false;  ///< a single value: std is reported as 0
};

/// Mean, lower median and (n - 1) standard deviation.
inline Summary summarize(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("summarize: empty input");
  Summary s;
  s.count = v.size();
  double sum = 0.0;
  for (double a : v) sum += a;
  s.mean = sum / static_cast<double>(v.size());
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  s.median = *mid;
  if (v.size() == 1) {
    s.degenerate = true;
    return s;
  }
  double ss = 0.0;
  for (double a : v) ss += (a - s.mean) * (a - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return s;
}

// ---------------------------------------------------------------------------
// L1 distance between densities

struct L1Config {
  int grid_points = 4000;  ///< candidate points per law when bracketing density crossings
};

namespace detail {

/// Sorted candidate abscissae: quantiles of both laws plus a geometric grid near 0.
inline std::vector<double> crossing_grid(const ParametricFamily& a, const ParametricFamily& b, int m) {
  std::vector<double> g;
  g.reserve(static_cast<std::size_t>(3 * m + 4));
  for (const auto* law : {&a, &b}) {
    for (int i = 1; i < m; ++i) {
      const double u = static_cast<double>(i) / m;
      g.push_back(law->quantile(u, 1.0 - u));
    }
    for (int k = 1; k <= 12; ++k) {
      const double t = std::pow(10.0, -k);
      g.push_back(law->quantile(1.0 - t, t));
    }
  }
  const double top = std::max(g.empty() ? 1.0 : *std::max_element(g.begin(), g.end()), 1.0);
  for (int i = 0; i < m; ++i) g.push_back(top * std::pow(10.0, -30.0 + 30.0 * i / m));
  for (double e : {a.upper_bound(), b.upper_bound()}) {
    if (std::isfinite(e)) g.push_back(e);
  }
  g.erase(std::remove_if(g.begin(), g.end(), [](double x) { return !(x > 0.0) || !std::isfinite(x); }), g.end());
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

}  // namespace detail

/**
 * int_0^inf |f_1 - f_2| dx. The density difference is bracketed for sign
 * changes on a quantile grid, each crossing is refined by bisection and the
 * integral between crossings is the exact difference of distribution
 * functions, taken from the survival side for accuracy in the tails.
 */
inline double l1_density_distance(const ParametricFamily& a, const ParametricFamily& b, const L1Config& cfg = {}) {
  const auto grid = detail::crossing_grid(a, b, cfg.grid_points);
  auto diff = [&](double x) {
    const double fa = a.density(x), fb = b.density(x);
    if (std::isinf(fa) && std::isinf(fb)) return 0.0;
    return fa - fb;
  };
  auto sgn = [](double v) { return (v > 0.0) - (v < 0.0); };

  std::vector<double> cuts{0.0};
  int prev_sign = 0;
  double prev_x = 0.0;
  for (double x : grid) {
    const int s = sgn(diff(x));
    if (s != 0 && prev_sign != 0 && s != prev_sign) {
      double lo = prev_x, hi = x;
      const bool lo_pos = prev_sign > 0;
      for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        ((diff(mid) > 0.0) == lo_pos ? lo : hi) = mid;
      }
      cuts.push_back(0.5 * (lo + hi));
    }
    if (s != 0) {
      prev_sign = s;
      prev_x = x;
    }
  }
  cuts.push_back(std::numeric_limits<double>::infinity());

  auto surv = [](const ParametricFamily& f, double x) { return std::isinf(x) ? 0.0 : f.survival(x); };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double ma = surv(a, cuts[i]) - surv(a, cuts[i + 1]);
    const double mb = surv(b, cuts[i]) - surv(b, cuts[i + 1]);
    total += std::abs(ma - mb);
  }
  return std::min(total, 2.0);
}

// ---------------------------------------------------------------------------
// Scenarios

struct ScenarioConfig {
  int scenario = 1;
  FamilyKind family = FamilyKind::gpd;
  double sigma = 3.0;
  double nu = 0.7;
  std::size_t n = 100;
  double contamination = 0.0;
  double outlier = 0.0;
  std::size_t replicates = 500;
  std::uint64_t seed = 1;
  std::vector<std::string> estimators{"chi2", "klm", "lmom", "moment", "mle"};
  unsigned threads = 0;  ///< 0 = hardware concurrency

  std::size_t outlier_count() const {
    return static_cast<std::size_t>(std::floor(contamination * static_cast<double>(n) + 1e-9));
  }
  ParametricFamily truth() const { return {family, sigma, nu}; }
  void validate() const;
};

inline bool is_classical_estimator(const std::string& e) { return e == "lmom" || e == "moment" || e == "mle"; }

inline void ScenarioConfig::validate() const {
  (void)truth();
  if (n < 5) throw std::invalid_argument("scenario: n must be at least 5");
  if (!(contamination >= 0.0 && contamination < 1.0)) {
    throw std::invalid_argument("scenario: contamination must lie in [0, 1)");
  }
  if (contamination > 0.0 && !std::isfinite(outlier)) throw std::invalid_argument("scenario: outlier must be finite");
  if (n - outlier_count() < 5) throw std::invalid_argument("scenario: too few clean points");
  if (estimators.empty()) throw std::invalid_argument("scenario: no estimators");
  for (const auto& e : estimators) {
    if (is_classical_estimator(e) || e == "wasserstein") continue;
    (void)Divergence::parse(e);
  }
}

/// The four reference settings: GPD(3, 0.7); with 10% at 300; GPD(3, 0.1) with 10% at 30; Weibull(3, 0.4).
inline ScenarioConfig scenario_preset(int id, std::size_t n = 100) {
  ScenarioConfig c;
  c.scenario = id;
  c.n = n;
  switch (id) {
    case 1: break;
    case 2:
      c.contamination = 0.1;
      c.outlier = 300.0;
      break;
    case 3:
      c.nu = 0.1;
      c.contamination = 0.1;
      c.outlier = 30.0;
      break;
    case 4:
      c.family = FamilyKind::weibull;
      c.nu = 0.4;
      break;
    default: throw std::invalid_argument("scenario id must be 1, 2, 3 or 4");
  }
  return c;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of replicate i: independent of thread layout.
inline std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t i) {
  return splitmix64(master ^ splitmix64(i + 1));
}

/// Clean draws followed by the outlier atoms, sorted.
inline SortedSample draw_scenario_sample(const ScenarioConfig& c, std::mt19937_64& rng) {
  const std::size_t out = c.outlier_count();
  std::vector<double> v = c.truth().sample(c.n - out, rng);
  v.insert(v.end(), out, c.outlier);
  return SortedSample(std::move(v));
}

struct GpdEstimate {
  Eigen::Vector2d theta;
  bool boundary = false;
};

/// Runs one named estimator in the GPD model; throws on failure.
inline GpdEstimate estimate_gpd(const std::string& name, const SortedSample& x, const FitConfig& fit = {}) {
  if (name == "lmom") return {fit_lmoment_method_gpd(x).theta, false};
  if (name == "moment") return {fit_moment_method_gpd(x).theta, false};
  if (name == "mle") {
    const auto r = fit_mle_gpd(x);
    return {r.theta, r.boundary};
  }
  const auto model = gpd_l234_model();
  if (name == "wasserstein") {
    const auto r = fit_transport(x, model, fit);
    if (r.failed) throw EstimationError("transport fit failed");
    return {Eigen::Vector2d(r.theta), model.box().near_boundary(r.theta)[1]};
  }
  const auto r = fit_divergence(x, model, Divergence::parse(name), fit);
  if (r.failed) throw EstimationError(r.message);
  return {Eigen::Vector2d(r.theta), r.on_boundary()};
}

struct ReplicateRecord {
  std::size_t replicate = 0;
  std::string estimator;
  bool failed = false;
  std::string message;
  double sigma = std::numeric_limits<double>::quiet_NaN();
  double nu = std::numeric_limits<double>::quiet_NaN();
  double l1 = std::numeric_limits<double>::quiet_NaN();
  bool boundary = false;
};

struct EstimatorSummary {
  std::string estimator;
  std::optional<Summary> sigma;
  std::optional<Summary> nu;
  std::optional<double> mean_l1;
  std::size_t failures = 0;
  std::size_t boundary = 0;
};

struct SimSummary {
  ScenarioConfig config;
  std::vector<EstimatorSummary> estimators;
  std::vector<ReplicateRecord> records;  ///< replicate-major, estimators in config order

  const EstimatorSummary& at(const std::string& name) const {
    for (const auto& e : estimators) {
      if (e.estimator == name) return e;
    }
    throw std::out_of_range("no estimator '" + name + "' in summary");
  }
};

inline SimSummary summarize_records(const ScenarioConfig& c, std::vector<ReplicateRecord> records) {
  SimSummary out;
  out.config = c;
  for (const auto& name : c.estimators) {
    EstimatorSummary es;
    es.estimator = name;
    std::vector<double> s, v, l;
    for (const auto& r : records) {
      if (r.estimator != name) continue;
      if (r.failed) {
        ++es.failures;
        continue;
      }
      if (r.boundary) ++es.boundary;
      s.push_back(r.sigma);
      v.push_back(r.nu);
      l.push_back(r.l1);
    }
    if (!s.empty()) {
      es.sigma = summarize(s);
      es.nu = summarize(v);
      es.mean_l1 = summarize(l).mean;
    }
    out.estimators.push_back(std::move(es));
  }
  out.records = std::move(records);
  return out;
}

/**
 * Replicates are spread over worker threads by an atomic counter; each
 * replicate draws from its own seeded stream and writes its own slots, so the
 * result does not depend on the thread count.
 */
inline SimSummary run_scenario(const ScenarioConfig& c, const FitConfig& fit = {}) {
  c.validate();
  const std::size_t ne = c.estimators.size();
  std::vector<ReplicateRecord> records(c.replicates * ne);
  const ParametricFamily truth = c.truth();

  auto work = [&](std::size_t i) {
    std::mt19937_64 rng(replicate_seed(c.seed, i));
    const SortedSample x = draw_scenario_sample(c, rng);
    for (std::size_t k = 0; k < ne; ++k) {
      ReplicateRecord& r = records[i * ne + k];
      r.replicate = i;
      r.estimator = c.estimators[k];
      try {
        const auto e = estimate_gpd(c.estimators[k], x, fit);
        r.sigma = e.theta[0];
        r.nu = e.theta[1];
        r.boundary = e.boundary;
        r.l1 = l1_density_distance(ParametricFamily::gpd(r.sigma, r.nu), truth);
      } catch (const std::exception& ex) {
        r.failed = true;
        r.message = ex.what();
      }
    }
  };

  unsigned threads = c.threads != 0 ? c.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(c.replicates, 1)));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < c.replicates; i = next++) work(i);
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return summarize_records(c, std::move(records));
}

// ---------------------------------------------------------------------------
// Output

inline void write_replicates_csv(std::ostream& os, const SimSummary& s) {
  const auto old = os.precision(17);
  os << "replicate,estimator,sigma,nu,l1,failed,boundary,message\n";
  for (const auto& r : s.records) {
    std::string msg = r.message;
    std::replace(msg.begin(), msg.end(), '"', '\'');
    os << r.replicate << ',' << r.estimator << ',';
    if (r.failed) {
      os << ",,";
    } else {
      os << r.sigma << ',' << r.nu << ',' << r.l1;
    }
    os << ',' << (r.failed ? 1 : 0) << ',' << (r.boundary ? 1 : 0) << ",\"" << msg << "\"\n";
  }
  os.precision(old);
}

struct DensityCurve {
  std::string label;  ///< estimator name, or "truth"
  std::vector<double> x;
  std::vector<double> density;
};

/// Densities on a geometric grid over [Q(0.001), Q(0.999)] of the true law: truth and each estimator's mean fit.
inline std::vector<DensityCurve> density_curves(const SimSummary& s, int points = 200) {
  const ParametricFamily truth = s.config.truth();
  const double lo = truth.quantile(0.001), hi = truth.quantile(0.999);
  std::vector<double> xs(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    xs[static_cast<std::size_t>(i)] = lo > 0.0 ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t;
  }
  std::vector<DensityCurve> out;
  auto add = [&](const std::string& label, const ParametricFamily& law) {
    DensityCurve c{label, xs, {}};
    for (double x : xs) c.density.push_back(law.density(x));
    out.push_back(std::move(c));
  };
  add("truth", truth);
  for (const auto& e : s.estimators) {
    if (!e.sigma) continue;
    try {
      add(e.estimator, ParametricFamily::gpd(e.sigma->mean, e.nu->mean));
    } catch (const std::invalid_argument&) {
    }
  }
  return out;
}

}  // namespace lmdiv
