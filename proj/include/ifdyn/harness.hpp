#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ifdyn/coupling.hpp"
#include "ifdyn/lattice.hpp"

namespace ifdyn {

enum class ExperimentKind { simulate, coalesce, cftp, gap_exact, tv_exact, schedule, monitor, fluctuations };
std::string to_string(ExperimentKind k);
ExperimentKind parse_experiment(const std::string& s);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::coalesce;
  Model model = Model::sos;
  std::vector<int> Ls{8};       // SOS length or surface side N
  int h = 0;
  std::optional<int> M;         // SOS window half-width
  bool wall = false;
  std::array<double, 3> slope{1.0, 1.0, 1.0};  // normalized on use
  double C = 1.0;
  std::string profile = "asymptotic";
  double alpha1 = 17.0;
  std::uint64_t replicas = 0;
  std::uint64_t seed = 0;
  double horizon = 1e6;
  std::vector<double> times;       // tv-exact / simulate checkpoints
  std::vector<double> thresholds;  // fluctuations: multiples a of the scale
  std::string out = "results";

  nlohmann::json to_json() const;
};

/// Validates a JSON document; errors name the offending field path.
ExperimentConfig config_from_json(const nlohmann::json& j);
/// Canonical hash (hex) of the validated configuration.
std::string config_hash(const ExperimentConfig& c);
std::string build_describe();

/// Worker count from IFDYN_WORKERS (default: hardware concurrency, at least 1).
unsigned worker_count();
/// Runs fn(i) for i in [0, n) on the worker pool; results are indexed, so the
/// outcome never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

struct ScalingFit {
  std::vector<std::pair<double, double>> points;
  double z = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // root mean square of log residuals
  double lo = 0.0;
  double hi = 0.0;        // bootstrap percentile band for z
};

/// Least squares of ln value against ln L with a pairs-bootstrap band.
ScalingFit fit_scaling(const std::vector<std::pair<double, double>>& points, int bootstrap = 1000,
                       std::uint64_t seed = 1, double level = 0.95);

struct TailRow {
  double threshold = 0.0;
  std::size_t exceed = 0;
  std::size_t samples = 0;
  double p = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval for k successes in n trials.
std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double z = 1.959963984540054);

/// Empirical P(max_i |x_i - ref_i| > H) per threshold with Wilson intervals.
std::vector<TailRow> fluctuation_stats(const std::vector<std::vector<int>>& samples, const std::vector<double>& reference,
                                       const std::vector<double>& thresholds);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct RateEstimate {
  double rate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t lags = 0;
};

/// Exponential decay rate of the autocovariance of a series sampled every
/// dt, fitted on lags 1..window where the autocovariance stays above 5% of
/// the variance; the band comes from ten contiguous batches.
RateEstimate autocorr_gap_estimate(const std::vector<double>& series, double dt, std::size_t window);

/// Observable sampled every dt along an SOS trajectory started from `start`.
std::vector<double> sos_observable_series(const SosPath& start, std::uint64_t seed, double dt, std::size_t count,
                                          const std::function<double(const SosPath&)>& observable);

struct ExperimentReport {
  std::vector<std::string> files;
  nlohmann::json summary;
};

/// Writes <out>/<experiment>.csv and <out>/<experiment>.json.
ExperimentReport run_experiment(const ExperimentConfig& c);

}  // namespace ifdyn
