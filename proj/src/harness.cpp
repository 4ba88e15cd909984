#include "ifdyn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "ifdyn/error.hpp"
#include "ifdyn/rng.hpp"
#include "ifdyn/schedule.hpp"
#include "ifdyn/sos.hpp"
#include "ifdyn/spectral.hpp"
#include "ifdyn/surface.hpp"

#ifndef IFDYN_GIT_DESCRIBE
#define IFDYN_GIT_DESCRIBE "unknown"
#endif

namespace ifdyn {

using nlohmann::json;

namespace {
const std::map<std::string, ExperimentKind> kKinds{
    {"simulate", ExperimentKind::simulate},   {"coalesce", ExperimentKind::coalesce},
    {"cftp", ExperimentKind::cftp},           {"gap-exact", ExperimentKind::gap_exact},
    {"tv-exact", ExperimentKind::tv_exact},   {"schedule", ExperimentKind::schedule},
    {"monitor", ExperimentKind::monitor},     {"fluctuations", ExperimentKind::fluctuations}};
}  // namespace

std::string to_string(ExperimentKind k) {
  for (const auto& [name, kind] : kKinds)
    if (kind == k) return name;
  return "?";
}

ExperimentKind parse_experiment(const std::string& s) {
  const auto it = kKinds.find(s);
  if (it == kKinds.end()) throw Error(Errc::invalid_config, "experiment: unknown kind '" + s + "'");
  return it->second;
}

json ExperimentConfig::to_json() const {
  json j;
  j["experiment"] = to_string(kind);
  j["model"] = ifdyn::to_string(model);
  j["L"] = Ls;
  j["h"] = h;
  if (M) j["M"] = *M;
  j["wall"] = wall;
  j["slope"] = slope;
  j["C"] = C;
  j["profile"] = profile;
  j["alpha1"] = alpha1;
  j["replicas"] = replicas;
  j["seed"] = seed;
  j["horizon"] = horizon;
  j["times"] = times;
  j["thresholds"] = thresholds;
  j["out"] = out;
  return j;
}

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw Error(Errc::invalid_config, path + ": " + what);
}

template <class T>
T get_as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    bad(path, "wrong type");
  }
}

long get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) bad(path, "expected an integer");
  return j.get<long>();
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  return j.get<double>();
}

std::vector<double> get_numbers(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of numbers");
  std::vector<double> v;
  for (std::size_t k = 0; k < j.size(); ++k) v.push_back(get_number(j[k], path + "[" + std::to_string(k) + "]"));
  return v;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) bad("config", "expected an object");
  static const std::vector<std::string> known{"experiment", "model",    "L",     "h",       "M",     "wall",
                                              "slope",      "C",        "profile", "alpha1", "replicas", "seed",
                                              "horizon",    "times",    "thresholds", "out"};
  for (const auto& [key, value] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) bad("config." + key, "unknown field");

  ExperimentConfig c;
  if (j.contains("experiment")) {
    if (!j["experiment"].is_string()) bad("config.experiment", "expected a string");
    try {
      c.kind = parse_experiment(j["experiment"].get<std::string>());
    } catch (const Error&) {
      bad("config.experiment", "unknown kind '" + j["experiment"].get<std::string>() + "'");
    }
  }
  if (j.contains("model")) {
    if (!j["model"].is_string()) bad("config.model", "expected a string");
    try {
      c.model = parse_model(j["model"].get<std::string>());
    } catch (const Error&) {
      bad("config.model", "unknown model '" + j["model"].get<std::string>() + "'");
    }
  }
  if (j.contains("L")) {
    c.Ls.clear();
    if (j["L"].is_array()) {
      for (std::size_t k = 0; k < j["L"].size(); ++k)
        c.Ls.push_back(static_cast<int>(get_int(j["L"][k], "config.L[" + std::to_string(k) + "]")));
    } else {
      c.Ls.push_back(static_cast<int>(get_int(j["L"], "config.L")));
    }
    if (c.Ls.empty()) bad("config.L", "at least one size required");
  }
  for (std::size_t k = 0; k < c.Ls.size(); ++k)
    if (c.Ls[k] < 1) bad("config.L[" + std::to_string(k) + "]", "must be at least 1");
  if (j.contains("h")) c.h = static_cast<int>(get_int(j["h"], "config.h"));
  if (c.model == Model::sos)
    for (int L : c.Ls)
      if (c.h < 0 || c.h > L) bad("config.h", "must lie in [0, L] for every L");
  if (j.contains("M") && !j["M"].is_null()) {
    c.M = static_cast<int>(get_int(j["M"], "config.M"));
    if (*c.M < 0) bad("config.M", "must be nonnegative");
  }
  if (j.contains("wall")) {
    if (!j["wall"].is_boolean()) bad("config.wall", "expected a boolean");
    c.wall = j["wall"].get<bool>();
  }
  if (j.contains("slope")) {
    const auto v = get_numbers(j["slope"], "config.slope");
    if (v.size() != 3) bad("config.slope", "expected three components");
    for (int k = 0; k < 3; ++k) {
      if (!(v[static_cast<std::size_t>(k)] > 0.0)) bad("config.slope[" + std::to_string(k) + "]", "must be positive");
      c.slope[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(k)];
    }
  }
  if (j.contains("C")) {
    c.C = get_number(j["C"], "config.C");
    if (!(c.C > 0.0)) bad("config.C", "must be positive");
  }
  if (j.contains("profile")) {
    c.profile = get_as<std::string>(j["profile"], "config.profile");
    if (c.profile != "asymptotic" && c.profile != "scaled") bad("config.profile", "must be 'asymptotic' or 'scaled'");
  }
  if (j.contains("alpha1")) c.alpha1 = get_number(j["alpha1"], "config.alpha1");
  if (j.contains("replicas")) {
    const long r = get_int(j["replicas"], "config.replicas");
    if (r < 0) bad("config.replicas", "must be nonnegative");
    c.replicas = static_cast<std::uint64_t>(r);
  }
  if (!j.contains("seed")) bad("config.seed", "required (no clock seeding)");
  if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long>() >= 0))
    bad("config.seed", "expected a nonnegative integer");
  c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("horizon")) {
    c.horizon = get_number(j["horizon"], "config.horizon");
    if (!(c.horizon > 0.0)) bad("config.horizon", "must be positive");
  }
  if (j.contains("times")) {
    c.times = get_numbers(j["times"], "config.times");
    for (std::size_t k = 0; k < c.times.size(); ++k) {
      if (c.times[k] < 0.0) bad("config.times[" + std::to_string(k) + "]", "must be nonnegative");
      if (k > 0 && c.times[k] < c.times[k - 1]) bad("config.times", "must be sorted");
    }
  }
  if (j.contains("thresholds")) {
    c.thresholds = get_numbers(j["thresholds"], "config.thresholds");
    for (std::size_t k = 0; k < c.thresholds.size(); ++k)
      if (!(c.thresholds[k] > 0.0)) bad("config.thresholds[" + std::to_string(k) + "]", "must be positive");
  }
  if (j.contains("out")) c.out = get_as<std::string>(j["out"], "config.out");

  if (c.kind == ExperimentKind::schedule || c.kind == ExperimentKind::monitor)
    for (int L : c.Ls)
      if (L < 8) bad("config.L", "schedules need L >= 8");
  if (c.kind == ExperimentKind::monitor && c.model != Model::sos) bad("config.model", "monitor runs support sos only");
  return c;
}

std::string config_hash(const ExperimentConfig& c) {
  const std::string s = c.to_json().dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string build_describe() { return IFDYN_GIT_DESCRIBE; }

unsigned worker_count() {
  if (const char* env = std::getenv("IFDYN_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const unsigned w = static_cast<unsigned>(std::min<std::size_t>(worker_count(), n));
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (unsigned k = 0; k < w; ++k)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(Errc::invalid_data, "line fit needs two or more points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (sxx == 0.0) throw Error(Errc::invalid_data, "line fit needs distinct abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  return f;
}

ScalingFit fit_scaling(const std::vector<std::pair<double, double>>& points, int bootstrap, std::uint64_t seed,
                       double level) {
  if (points.size() < 3) throw Error(Errc::invalid_data, "scaling fit needs at least three points");
  std::vector<double> x, y;
  for (const auto& [L, v] : points) {
    if (!(L > 0.0) || !(v > 0.0)) throw Error(Errc::invalid_data, "scaling fit needs positive sizes and values");
    x.push_back(std::log(L));
    y.push_back(std::log(v));
  }
  const auto f = fit_line(x, y);
  ScalingFit out;
  out.points = points;
  out.z = f.slope;
  out.intercept = f.intercept;
  double ss = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) ss += std::pow(y[k] - f.intercept - f.slope * x[k], 2);
  out.residual = std::sqrt(ss / static_cast<double>(x.size()));
  std::vector<double> zs;
  CounterRng rng = CounterRng::stream(seed, 0x666974);
  for (int b = 0; b < bootstrap; ++b) {
    std::vector<double> bx, by;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const auto i = static_cast<std::size_t>(rng.below(x.size()));
      bx.push_back(x[i]);
      by.push_back(y[i]);
    }
    if (std::all_of(bx.begin(), bx.end(), [&](double v) { return v == bx[0]; })) continue;
    zs.push_back(fit_line(bx, by).slope);
  }
  if (zs.empty()) {
    out.lo = out.hi = out.z;
  } else {
    std::sort(zs.begin(), zs.end());
    const double a = 0.5 * (1.0 - level);
    auto q = [&](double p) { return zs[std::min(zs.size() - 1, static_cast<std::size_t>(p * static_cast<double>(zs.size())))]; };
    out.lo = q(a);
    out.hi = q(1.0 - a);
  }
  return out;
}

std::pair<double, double> wilson_interval(std::size_t k, std::size_t n, double z) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n), p = static_cast<double>(k) / nn;
  const double den = 1.0 + z * z / nn;
  const double mid = (p + z * z / (2 * nn)) / den;
  const double half = z * std::sqrt(p * (1 - p) / nn + z * z / (4 * nn * nn)) / den;
  return {k == 0 ? 0.0 : std::max(0.0, mid - half), k == n ? 1.0 : std::min(1.0, mid + half)};
}

std::vector<TailRow> fluctuation_stats(const std::vector<std::vector<int>>& samples, const std::vector<double>& reference,
                                       const std::vector<double>& thresholds) {
  if (samples.size() < 1000) throw Error(Errc::invalid_data, "fluctuation statistics need at least 1000 samples");
  std::vector<double> dev;
  dev.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.size() != reference.size()) throw Error(Errc::invalid_data, "sample length differs from the reference");
    double m = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) m = std::max(m, std::abs(s[i] - reference[i]));
    dev.push_back(m);
  }
  std::vector<TailRow> rows;
  for (double H : thresholds) {
    TailRow r;
    r.threshold = H;
    r.samples = dev.size();
    r.exceed = static_cast<std::size_t>(std::count_if(dev.begin(), dev.end(), [&](double d) { return d > H; }));
    r.p = static_cast<double>(r.exceed) / static_cast<double>(r.samples);
    std::tie(r.lo, r.hi) = wilson_interval(r.exceed, r.samples);
    rows.push_back(r);
  }
  return rows;
}

namespace {

double decay_rate(const std::vector<double>& s, double dt, std::size_t window, std::size_t* used = nullptr) {
  const std::size_t n = s.size();
  if (n < 4) throw Error(Errc::undefined_estimate, "series too short");
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n);
  auto cov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t k = 0; k + lag < n; ++k) acc += (s[k] - mean) * (s[k + lag] - mean);
    return acc / static_cast<double>(n - lag);
  };
  const double c0 = cov(0);
  if (!(c0 > 1e-300)) throw Error(Errc::undefined_estimate, "observable has zero variance");
  std::vector<double> x{0.0}, y{0.0};
  for (std::size_t lag = 1; lag <= window && lag < n / 2; ++lag) {
    const double c = cov(lag) / c0;
    if (!(c > 0.05)) break;
    x.push_back(static_cast<double>(lag) * dt);
    y.push_back(std::log(c));
  }
  if (x.size() < 2) throw Error(Errc::undefined_estimate, "no positive autocovariance within the window");
  if (used) *used = x.size() - 1;
  // fit through the origin: ln rho(t) = -rate t
  double sxy = 0, sxx = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += x[k] * y[k];
    sxx += x[k] * x[k];
  }
  return -sxy / sxx;
}

}  // namespace

RateEstimate autocorr_gap_estimate(const std::vector<double>& series, double dt, std::size_t window) {
  if (window == 0) throw Error(Errc::undefined_estimate, "autocovariance window must be positive");
  RateEstimate r;
  r.rate = decay_rate(series, dt, window, &r.lags);
  const std::size_t B = 10, len = series.size() / B;
  std::vector<double> est;
  for (std::size_t b = 0; b < B && len >= 4; ++b) {
    try {
      est.push_back(decay_rate(std::vector<double>(series.begin() + static_cast<std::ptrdiff_t>(b * len),
                                                   series.begin() + static_cast<std::ptrdiff_t>((b + 1) * len)),
                               dt, window));
    } catch (const Error&) {
    }
  }
  if (est.size() >= 2) {
    const double m = std::accumulate(est.begin(), est.end(), 0.0) / static_cast<double>(est.size());
    double v = 0.0;
    for (double e : est) v += (e - m) * (e - m);
    const double se = std::sqrt(v / static_cast<double>(est.size() - 1) / static_cast<double>(est.size()));
    r.lo = r.rate - 2.0 * se;
    r.hi = r.rate + 2.0 * se;
  } else {
    r.lo = r.hi = r.rate;
  }
  return r;
}

std::vector<double> sos_observable_series(const SosPath& start, std::uint64_t seed, double dt, std::size_t count,
                                          const std::function<double(const SosPath&)>& observable) {
  SosChain chain(start);
  EventStream ev(seed, 0x6f6273, static_cast<std::size_t>(start.L()));
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    const double t = static_cast<double>(k) * dt;
    while (ev.peek().time <= t) chain.step(ev.next());
    out.push_back(observable(chain.state()));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

class Csv {
 public:
  Csv(const std::filesystem::path& p, const std::string& header) : os_(p, std::ios::binary) {
    if (!os_) throw Error(Errc::invalid_config, "out: cannot write " + p.string());
    os_ << header << '\n';
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) os_ << (k ? "," : "") << cells[k];
    os_ << '\n';
  }

 private:
  std::ofstream os_;
};

SosModel sos_model(const ExperimentConfig& c, int L) { return {L, c.h, c.M, c.wall}; }
SurfaceModel surface_model(const ExperimentConfig& c, int N) {
  return {N, SlopeVector::normalized(c.slope[0], c.slope[1], c.slope[2]), 0};
}

std::vector<double> flat_reference(int L, int h) {
  std::vector<double> r(static_cast<std::size_t>(L));
  for (int i = 1; i <= L; ++i) r[static_cast<std::size_t>(i - 1)] = static_cast<double>(i) * h / (L + 1);
  return r;
}

std::string join(std::span<const int> v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ";" : "") + std::to_string(v[k]);
  return s;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct Task {
  std::size_t li;
  std::uint64_t replica;
};

std::vector<Task> tasks(const ExperimentConfig& c) {
  std::vector<Task> t;
  for (std::size_t li = 0; li < c.Ls.size(); ++li)
    for (std::uint64_t r = 0; r < c.replicas; ++r) t.push_back({li, r});
  return t;
}

json fit_json(const ScalingFit& f) {
  return {{"z", f.z}, {"intercept", f.intercept}, {"residual", f.residual}, {"band", {f.lo, f.hi}}};
}

StateSpace exact_space(const ExperimentConfig& c, int L, std::string& window) {
  if (c.model == Model::sos) {
    const auto like = sos_model(c, L).bottom();
    window = std::to_string(like.lower(1)) + ":" + std::to_string(std::max(like.upper(1), like.upper(static_cast<std::size_t>(L))));
    return enumerate_states(like);
  }
  window = "-";
  return enumerate_states(surface_model(c, L).plane());
}

void run_simulate(const ExperimentConfig& c, const std::filesystem::path& out, ExperimentReport& rep) {
  std::vector<double> checkpoints = c.times;
  if (checkpoints.empty())
    for (int k = 0; k <= 10; ++k) checkpoints.push_back(c.horizon * k / 10.0);
  const auto ts = tasks(c);
  std::vector<Trajectory> results(ts.size());
  parallel_for(ts.size(), [&](std::size_t i) {
    const int L = c.Ls[ts[i].li];
    const CounterRng rng = CounterRng::stream(c.seed, 0x73696d, static_cast<std::uint64_t>(L), ts[i].replica);
    if (c.model == Model::sos) {
      SosChain chain(sos_model(c, L).top());
      EventStream ev(rng, static_cast<std::size_t>(L));
      results[i] = chain.run(c.horizon, ev, checkpoints);
    } else {
      SurfaceChain chain(surface_model(c, L).top());
      EventStream ev(rng, static_cast<std::size_t>(L) * static_cast<std::size_t>(L));
      results[i] = chain.run(c.horizon, ev, checkpoints);
    }
  });
  Csv csv(out, "model,L,h,replica,t,site,height");
  for (std::size_t i = 0; i < ts.size(); ++i)
    for (std::size_t k = 0; k < results[i].times.size(); ++k)
      for (std::size_t s = 0; s < results[i].states[k].size(); ++s)
        csv.row({ifdyn::to_string(c.model), std::to_string(c.Ls[ts[i].li]), std::to_string(c.h),
                 std::to_string(ts[i].replica), num(results[i].times[k]), std::to_string(s),
                 std::to_string(results[i].states[k][s])});
  rep.summary["checkpoints"] = checkpoints;
}

void run_coalesce(const ExperimentConfig& c, const std::filesystem::path& out, ExperimentReport& rep) {
  const auto ts = tasks(c);
  std::vector<CoalescenceRecord> rec(ts.size());
  parallel_for(ts.size(), [&](std::size_t i) {
    const int L = c.Ls[ts[i].li];
    rec[i] = c.model == Model::sos ? coalescence_time(sos_model(c, L), c.seed, ts[i].replica, c.horizon)
                                   : coalescence_time(surface_model(c, L), c.seed, ts[i].replica, c.horizon);
  });
  Csv csv(out, "model,L,h,seed,replica,coalescence_time,events,censored");
  for (const auto& r : rec)
    csv.row({ifdyn::to_string(r.model), std::to_string(r.L), std::to_string(r.h), std::to_string(r.seed),
             std::to_string(r.replica), num(r.time), std::to_string(r.events), r.censored ? "1" : "0"});
  json per = json::array();
  std::vector<std::pair<double, double>> medians;
  for (std::size_t li = 0; li < c.Ls.size() && c.replicas > 0; ++li) {
    std::vector<CoalescenceRecord> mine;
    std::vector<double> times;
    for (std::size_t i = 0; i < ts.size(); ++i)
      if (ts[i].li == li) {
        mine.push_back(rec[i]);
        times.push_back(rec[i].time);
      }
    json e{{"L", c.Ls[li]}, {"median", median(times)}};
    e["censored"] = std::count_if(mine.begin(), mine.end(), [](const auto& r) { return r.censored; });
    if (mine.size() >= 30) {
      try {
        const auto t = tmix_upper_from_coalescence(mine, 200, c.seed);
        e["tmix_upper"] = {{"estimate", t.estimate}, {"band", {t.lo, t.hi}}};
      } catch (const Error& err) {
        e["tmix_upper"] = err.what();
      }
    }
    medians.emplace_back(c.Ls[li], median(times));
    per.push_back(e);
  }
  rep.summary["per_size"] = per;
  if (medians.size() >= 3) {
    const auto f = fit_scaling(medians, 1000, c.seed);
    rep.summary["fit_median"] = fit_json(f);
    const double lo = 1.7, hi = c.model == Model::sos ? 2.6 : 2.7;
    rep.summary["assertions"] = {{{"name", "median coalescence exponent"},
                                  {"range", {lo, hi}},
                                  {"value", f.z},
                                  {"pass", f.z >= lo && f.z <= hi}}};
  }
}

void run_cftp(const ExperimentConfig& c, const std::filesystem::path& out, ExperimentReport& rep) {
  const auto ts = tasks(c);
  std::vector<CftpResult> res(ts.size());
  parallel_for(ts.size(), [&](std::size_t i) {
    const int L = c.Ls[ts[i].li];
    res[i] = c.model == Model::sos ? cftp_sample(sos_model(c, L), c.seed, ts[i].replica)
                                   : cftp_sample(surface_model(c, L), c.seed, ts[i].replica);
  });
  Csv csv(out, "model,L,h,seed,replica,T,doublings,heights");
  for (std::size_t i = 0; i < ts.size(); ++i)
    csv.row({ifdyn::to_string(c.model), std::to_string(c.Ls[ts[i].li]), std::to_string(c.h), std::to_string(c.seed),
             std::to_string(ts[i].replica), num(res[i].T), std::to_string(res[i].doublings), join(res[i].state)});
  rep.summary["samples"] = ts.size();
}

void run_gap(const ExperimentConfig& c, const std::filesystem::path& out, ExperimentReport& rep) {
  Csv csv(out, "model,L,h,window,states,gap,method,residual");
  std::vector<std::pair<double, double>> relax;
  for (int L : c.Ls) {
    std::string window;
    const auto space = exact_space(c, L, window);
    const auto g = exact_gap(build_generator(space));
    csv.row({ifdyn::to_string(c.model), std::to_string(L), std::to_string(c.h), window, std::to_string(space.size()),
             num(g.gap), g.method, num(g.residual)});
    relax.emplace_back(L, 1.0 / g.gap);
  }
  if (relax.size() >= 3) rep.summary["fit_relaxation_time"] = fit_json(fit_scaling(relax, 1000, c.seed));
}

void run_tv(const ExperimentConfig& c, const std::filesystem::path& out, ExperimentReport& rep) {
  Csv csv(out, "model,L,h,window,t,sup_tv,bound");
  json per = json::array();
  for (int L : c.Ls) {
    std::string window;
    const auto space = exact_space(c, L, window);
    const auto q = build_generator(space);
    TmixOptions opt;
    opt.hints = extremal_states(space);
    const auto report = mixing_law_report(q, 5, opt);
    per.push_back({{"L", L}, {"tmix", report.tm.tmix}, {"worst_excess", report.worst_excess}, {"law_holds", report.ok}});
    if (c.times.empty()) {
      for (const auto& chk : report.checks)
        csv.row({ifdyn::to_string(c.model), std::to_string(L), std::to_string(c.h), window, num(chk.t), num(chk.sup_tv),
                 num(chk.bound)});
    } else {
      const WorstCaseTv sup(q, 0.0, {});
      for (double t : c.times)
        csv.row({ifdyn::to_string(c.model), std::to_string(L), std::to_string(c.h), window, num(t), num(sup(t)),
                 num(std::exp(-std::floor(t / report.tm.tmix)))});
    }
  }
  rep.summary["per_size"] = per;
}

void run_schedule(const ExperimentConfig& c, const std::filesystem::path& out, ExperimentReport& rep) {
  Csv csv(out, "L,n,u_n,R_n,t_n");
  json per = json::array();
  for (int L : c.Ls) {
    const auto s = c.model == Model::sos ? schedule_sos(L, sos_profile(c.profile, c.alpha1))
                                         : schedule_surface(L, surface_profile(c.profile));
    for (std::size_t n = 0; n < s.u.size(); ++n)
      csv.row({std::to_string(L), std::to_string(n), num(s.u[n]), num(s.R[n]), num(s.t[n])});
    per.push_back({{"L", L},
                   {"M", s.M()},
                   {"t_M", s.t_M()},
                   {"bound_log", s.bound_log},
                   {"bound_ratio", s.bound_ratio},
                   {"bound_K", s.bound_K},
                   {"bound_ok", s.bound_ok},
                   {"half_steps_ok", s.half_steps_ok}});
  }
  rep.summary["profile"] = c.profile;
  rep.summary["per_size"] = per;
}

void run_monitor(const ExperimentConfig& c, const std::filesystem::path& out, ExperimentReport& rep) {
  const auto ts = tasks(c);
  std::vector<MonitorReport> res(ts.size());
  parallel_for(ts.size(), [&](std::size_t i) {
    const int L = c.Ls[ts[i].li];
    const auto s = schedule_sos(L, sos_profile(c.profile, c.alpha1));
    SosChain chain(SosModel{L, c.h, c.M, true}.top());
    EventStream ev(CounterRng::stream(c.seed, 0x6d6f6e, static_cast<std::uint64_t>(L), ts[i].replica),
                   static_cast<std::size_t>(L));
    const auto tr = chain.run(s.t_M(), ev, s.t);
    res[i] = domination_monitor(tr, s, flat_reference(L, c.h));
  });
  Csv csv(out, "L,replica,n,t_n,u_n,satisfied,max_violation");
  json per = json::array();
  for (std::size_t li = 0; li < c.Ls.size(); ++li) {
    std::size_t inside = 0, flat = 0, runs = 0;
    const int L = c.Ls[li];
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (ts[i].li != li) continue;
      ++runs;
      for (const auto& row : res[i].rows)
        csv.row({std::to_string(L), std::to_string(ts[i].replica), std::to_string(row.n), num(row.t), num(row.u),
                 row.satisfied ? "1" : "0", num(row.max_violation)});
      inside += res[i].all_satisfied;
      flat += res[i].final_deviation <= 4.0 * std::sqrt(static_cast<double>(L));
    }
    per.push_back({{"L", L}, {"runs", runs}, {"all_checkpoints_inside", inside}, {"final_deviation_within_4sqrtL", flat}});
  }
  rep.summary["profile"] = c.profile;
  rep.summary["per_size"] = per;
}

void run_fluctuations(const ExperimentConfig& c, const std::filesystem::path& out, ExperimentReport& rep) {
  Csv csv(out, "L,h,threshold,tail_prob,ci_lo,ci_hi");
  std::vector<double> as = c.thresholds;
  if (as.empty()) as = {1.0, 1.5, 2.0, 2.5, 3.0};
  json per = json::array();
  for (int L : c.Ls) {
    if (c.replicas == 0) continue;
    std::vector<std::vector<int>> samples(c.replicas);
    std::vector<double> reference, thresholds;
    double scale = 0.0;
    if (c.model == Model::sos) {
      const SosExactSampler gibbs(sos_model(c, L).bottom());
      parallel_for(samples.size(), [&](std::size_t r) {
        CounterRng rng = CounterRng::stream(c.seed, 0x666c75, static_cast<std::uint64_t>(L), r);
        const auto p = gibbs.sample(rng);
        samples[r].assign(p.interior().begin(), p.interior().end());
      });
      reference = flat_reference(L, c.h);
      scale = std::sqrt(static_cast<double>(L));
    } else {
      const auto m = surface_model(c, L);
      parallel_for(samples.size(), [&](std::size_t r) { samples[r] = cftp_sample(m, c.seed, r).state; });
      const auto plane = m.plane().interior();
      reference.assign(plane.begin(), plane.end());
      scale = std::pow(std::log(static_cast<double>(L)), 1.5);
    }
    for (double a : as) thresholds.push_back(a * scale);
    const auto rows = fluctuation_stats(samples, reference, thresholds);
    std::vector<double> x, y;
    bool monotone = true;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      csv.row({std::to_string(L), std::to_string(c.h), num(rows[k].threshold), num(rows[k].p), num(rows[k].lo),
               num(rows[k].hi)});
      if (k > 0 && rows[k].p > rows[k - 1].p) monotone = false;
      if (rows[k].p > 0.0) {
        x.push_back(as[k] * as[k]);
        y.push_back(std::log(rows[k].p));
      }
    }
    json e{{"L", L}, {"scale", scale}, {"monotone", monotone}};
    if (x.size() >= 2) {
      const auto f = fit_line(x, y);
      e["log_tail_vs_a2"] = {{"slope", f.slope}, {"r2", f.r2}};
    }
    per.push_back(e);
  }
  rep.summary["per_size"] = per;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& c) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw Error(Errc::invalid_config, "out: " + ec.message() + " (" + c.out + ")");
  const std::string name = to_string(c.kind);
  const fs::path csv = fs::path(c.out) / (name + ".csv");
  ExperimentReport rep;
  rep.summary = {{"experiment", name},
                 {"config", c.to_json()},
                 {"config_hash", config_hash(c)},
                 {"seed", c.seed},
                 {"build", build_describe()}};
  switch (c.kind) {
    case ExperimentKind::simulate: run_simulate(c, csv, rep); break;
    case ExperimentKind::coalesce: run_coalesce(c, csv, rep); break;
    case ExperimentKind::cftp: run_cftp(c, csv, rep); break;
    case ExperimentKind::gap_exact: run_gap(c, csv, rep); break;
    case ExperimentKind::tv_exact: run_tv(c, csv, rep); break;
    case ExperimentKind::schedule: run_schedule(c, csv, rep); break;
    case ExperimentKind::monitor: run_monitor(c, csv, rep); break;
    case ExperimentKind::fluctuations: run_fluctuations(c, csv, rep); break;
  }
  const fs::path side = fs::path(c.out) / (name + ".json");
  std::ofstream(side, std::ios::binary) << rep.summary.dump(2) << '\n';
  rep.files = {csv.string(), side.string()};
  return rep;
}

}  // namespace ifdyn
