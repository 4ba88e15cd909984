#include "ifdyn/sos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ifdyn/error.hpp"

namespace ifdyn {

namespace {

const double kE2 = std::exp(-2.0);
const double kSuppressed = kE2 / (1.0 + kE2);
const double kFavored = 1.0 / (1.0 + kE2);
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) noexcept {
  if (a < b) std::swap(a, b);
  if (b == kNegInf) return a;
  return a + std::log1p(std::exp(b - a));
}

}  // namespace

double rate_value(RateCase c) noexcept {
  switch (c) {
    case RateCase::suppressed:
      return kSuppressed;
    case RateCase::neutral:
      return 0.5;
    case RateCase::favored:
      return kFavored;
  }
  return 0.0;
}

SosRates glauber_rates(int left, int eta, int right) noexcept {
  const int a = std::min(left, right), b = std::max(left, right);
  RateCase dn, up;
  if (eta <= a)
    dn = RateCase::suppressed;
  else if (eta <= b)
    dn = RateCase::neutral;
  else
    dn = RateCase::favored;
  if (eta >= b)
    up = RateCase::suppressed;
  else if (eta >= a)
    up = RateCase::neutral;
  else
    up = RateCase::favored;
  return {dn, up, rate_value(dn), rate_value(up)};
}

SosRates glauber_rates(const SosPath& eta, std::size_t i) {
  if (i < 1 || i > static_cast<std::size_t>(eta.L()))
    throw Error(Errc::invalid_parameters, "site " + std::to_string(i) + " is not in 1..L");
  return glauber_rates(eta[i - 1], eta[i], eta[i + 1]);
}

bool glauber_step(SosPath& eta, std::size_t i, double u) noexcept {
  const SosRates r = glauber_rates(eta[i - 1], eta[i], eta[i + 1]);
  const int v = eta[i];
  if (u < r.up) {
    if (v + 1 > eta.upper(i)) return false;
    eta.set(i, v + 1);
    return true;
  }
  if (u > 1.0 - r.down) {
    if (v - 1 < eta.lower(i)) return false;
    eta.set(i, v - 1);
    return true;
  }
  return false;
}

// The conditional weight is r^{d(k)} with r = e^{-2} and d(k) the distance
// from k to [a, b]. On [lo, hi] that is a decreasing geometric run left of a,
// a flat run on [a, b] and a decreasing run right of b; each has a
// closed-form CDF. Weights are scaled so the heaviest point weighs 1.
int site_conditional_sample(int left, int right, int lo, int hi, double u) {
  if (lo > hi) throw Error(Errc::invalid_range, "empty support [" + std::to_string(lo) + "," + std::to_string(hi) + "]");
  if (lo == hi) return lo;
  const int a = std::min(left, right), b = std::max(left, right);
  const double r = kE2;
  const double one_minus_r = -std::expm1(-2.0);

  long dmin = 0;
  if (hi < a) dmin = a - hi;
  if (lo > b) dmin = lo - b;

  // left run: k in [lo, le], weight r^{(a-k) - dmin}, largest at k = le
  const int le = std::min(a - 1, hi);
  const long nl = le >= lo ? static_cast<long>(le) - lo + 1 : 0;
  const double wl = nl ? std::pow(r, static_cast<double>(a - le - dmin)) : 0.0;
  // flat run
  const int ms = std::max(a, lo), me = std::min(b, hi);
  const long nm = me >= ms ? static_cast<long>(me) - ms + 1 : 0;
  // right run: k in [rs, hi], weight r^{(k-b) - dmin}, largest at k = rs
  const int rs = std::max(b + 1, lo);
  const long nr = hi >= rs ? static_cast<long>(hi) - rs + 1 : 0;
  const double wr = nr ? std::pow(r, static_cast<double>(rs - b - dmin)) : 0.0;

  const double sl = nl ? wl * -std::expm1(nl * -2.0) / one_minus_r : 0.0;
  const double sm = static_cast<double>(nm);
  const double sr = nr ? wr * -std::expm1(nr * -2.0) / one_minus_r : 0.0;
  const double z = sl + sm + sr;

  // unnormalized CDF
  auto cdf = [&](int k) -> double {
    if (k < lo) return 0.0;
    if (k >= hi) return z;
    if (nl && k <= le) return wl * (std::pow(r, static_cast<double>(le - k)) - std::pow(r, static_cast<double>(nl))) / one_minus_r;
    if (nm && k <= me) return sl + static_cast<double>(k - ms + 1);
    return sl + sm + wr * -std::expm1((k - rs + 1) * -2.0) / one_minus_r;
  };

  const double target = u * z;
  int k;
  if (target < sl) {
    // wl (r^J - r^nl)/(1-r) > target with J = le - k
    const double x = target * one_minus_r / wl + std::pow(r, static_cast<double>(nl));
    const double J = std::log(x) / -2.0;
    k = le - static_cast<int>(std::clamp(std::floor(J), 0.0, static_cast<double>(nl - 1)));
  } else if (target < sl + sm) {
    k = ms + static_cast<int>(std::floor(target - sl));
  } else {
    const double y = 1.0 - (target - sl - sm) * one_minus_r / wr;
    const double n = y > 0.0 ? std::log(y) / -2.0 : static_cast<double>(nr);
    k = rs + static_cast<int>(std::clamp(std::floor(n), 0.0, static_cast<double>(nr - 1)));
  }
  k = std::clamp(k, lo, hi);
  while (k > lo && cdf(k - 1) > target) --k;
  while (k < hi && cdf(k) <= target) ++k;
  return k;
}

void column_sweep(SosPath& eta, Parity parity, std::span<const double> u) {
  if (u.size() < static_cast<std::size_t>(eta.L())) throw Error(Errc::invalid_parameters, "need one uniform per site");
  const std::size_t first = parity == Parity::odd ? 1 : 2;
  for (std::size_t i = first; i <= static_cast<std::size_t>(eta.L()); i += 2)
    eta.set(i, site_conditional_sample(eta[i - 1], eta[i + 1], eta.lower(i), eta.upper(i), u[i - 1]));
}

void column_sweep(SosPath& eta, Parity parity, CounterRng& rng) {
  std::vector<double> u(static_cast<std::size_t>(eta.L()));
  for (auto& x : u) x = rng.uniform();
  column_sweep(eta, parity, u);
}

CensorSchedule::CensorSchedule(double half_epoch, double total) : T(half_epoch), horizon(total) {
  if (!(half_epoch > 0.0)) throw Error(Errc::invalid_parameters, "epoch half-length must be positive");
  if (total < 0.0) throw Error(Errc::invalid_parameters, "negative horizon");
}

Parity CensorSchedule::frozen_parity(double t) const noexcept {
  const double s = std::fmod(t, 2.0 * T);
  return s < T ? Parity::odd : Parity::even;
}

bool CensorSchedule::frozen(std::size_t site, double t) const noexcept {
  if (t > horizon) return false;
  return (site % 2 == 1) == (frozen_parity(t) == Parity::odd);
}

template <typename Filter>
Trajectory SosChain::run_filtered(double horizon, EventStream& events, std::span<const double> checkpoints,
                                  Filter keep) {
  Trajectory tr;
  auto record = [&](double t) {
    tr.times.push_back(t);
    auto in = state_.interior();
    tr.states.emplace_back(in.begin(), in.end());
  };
  std::size_t c = 0;
  while (c < checkpoints.size() && checkpoints[c] < time_) ++c;
  while (events.peek().time <= horizon) {
    const double t = events.peek().time;
    for (; c < checkpoints.size() && checkpoints[c] <= t; ++c) record(checkpoints[c]);
    const Event e = events.next();
    if (keep(e)) {
      step(e);
    } else {
      time_ = e.time;
      ++events_;
    }
    ++tr.events;
  }
  for (; c < checkpoints.size() && checkpoints[c] <= horizon; ++c) record(checkpoints[c]);
  time_ = std::max(time_, horizon);
  tr.end_time = time_;
  return tr;
}

Trajectory SosChain::run(double horizon, EventStream& events, std::span<const double> checkpoints) {
  return run_filtered(horizon, events, checkpoints, [](const Event&) { return true; });
}

Trajectory SosChain::censored_run(const CensorSchedule& schedule, double horizon, EventStream& events,
                                  std::span<const double> checkpoints) {
  if (schedule.horizon < horizon) throw Error(Errc::invalid_parameters, "censoring schedule ends before the run");
  return run_filtered(horizon, events, checkpoints,
                      [&](const Event& e) { return !schedule.frozen(e.site + 1, e.time); });
}

// ---------------------------------------------------------------------------

SosExactSampler::SosExactSampler(const SosPath& like) : proto_(like) {
  const int L = like.L();
  sites_.resize(static_cast<std::size_t>(L));
  for (int i = 1; i <= L; ++i) {
    auto& s = sites_[i - 1];
    s.lo = like.lower(i);
    s.hi = like.upper(i);
    if (s.lo > s.hi) throw Error(Errc::empty_support, "walls leave no admissible height at site " + std::to_string(i));
    const std::size_t w = static_cast<std::size_t>(s.hi - s.lo + 1);
    s.g.resize(w);
    s.lp.resize(w);
    s.ls.resize(w);
  }

  const int h = like.h();
  for (int i = L; i >= 1; --i) {
    auto& s = sites_[i - 1];
    for (int k = s.lo; k <= s.hi; ++k) {
      double g;
      if (i == L) {
        g = -std::abs(h - k);
      } else {
        const auto& nx = sites_[i];
        g = log_add(log_left(nx, k), log_right(nx, k));
      }
      s.g[k - s.lo] = g;
    }
    double acc = kNegInf;
    for (int k = s.lo; k <= s.hi; ++k) {
      acc = log_add(acc, k + s.g[k - s.lo]);
      s.lp[k - s.lo] = acc;
    }
    acc = kNegInf;
    for (int k = s.hi; k >= s.lo; --k) {
      acc = log_add(acc, -k + s.g[k - s.lo]);
      s.ls[k - s.lo] = acc;
    }
  }
  const auto& s1 = sites_.front();
  log_z_ = log_add(log_left(s1, 0), log_right(s1, 0));
}

// log sum_{k' <= k} exp(-(k - k') + g(k'))
double SosExactSampler::log_left(const Site& s, int k) const noexcept {
  if (k < s.lo) return kNegInf;
  const int j = std::min(k, s.hi);
  return -k + s.lp[j - s.lo];
}

// log sum_{k' > k} exp(-(k' - k) + g(k'))
double SosExactSampler::log_right(const Site& s, int k) const noexcept {
  if (k >= s.hi) return kNegInf;
  const int j = std::max(k + 1, s.lo);
  return k + s.ls[j - s.lo];
}

int SosExactSampler::draw_next(const Site& s, int k, CounterRng& rng) const {
  const double left = log_left(s, k), right = log_right(s, k);
  const double total = log_add(left, right);
  if (std::log(rng.uniform_open()) + total < left) {
    // smallest j <= k with lp(j) - k > log(v) + left
    const double t = std::log(rng.uniform_open()) + left + k;
    const int jmax = std::min(k, s.hi);
    auto first = s.lp.begin(), last = s.lp.begin() + (jmax - s.lo + 1);
    auto it = std::upper_bound(first, last, t);
    if (it == last) --it;
    return s.lo + static_cast<int>(it - s.lp.begin());
  }
  // largest j > k with ls(j) + k > log(v) + right
  const double t = std::log(rng.uniform_open()) + right - k;
  const int jmin = std::max(k + 1, s.lo);
  // ls is nonincreasing; find the first index with ls <= t, step back one
  auto first = s.ls.begin() + (jmin - s.lo), last = s.ls.end();
  auto it = std::partition_point(first, last, [t](double x) { return x > t; });
  if (it == first) ++it;
  return s.lo + static_cast<int>(it - s.ls.begin()) - 1;
}

void SosExactSampler::sample_into(SosPath& out, CounterRng& rng) const {
  int prev = 0;
  for (std::size_t i = 0; i < sites_.size(); ++i) {
    prev = draw_next(sites_[i], prev, rng);
    out.set(i + 1, prev);
  }
}

SosPath SosExactSampler::sample(CounterRng& rng) const {
  SosPath out = proto_;
  sample_into(out, rng);
  return out;
}

double SosExactSampler::log_prob(std::span<const int> interior) const {
  if (interior.size() != sites_.size()) throw Error(Errc::incompatible_configurations, "length mismatch");
  for (std::size_t i = 0; i < sites_.size(); ++i)
    if (interior[i] < sites_[i].lo || interior[i] > sites_[i].hi) return kNegInf;
  return -static_cast<double>(sos_energy(interior, proto_.h())) - log_z_;
}

std::vector<double> SosExactSampler::first_site_marginal() const {
  const auto& s = sites_.front();
  std::vector<double> p(s.g.size());
  for (int k = s.lo; k <= s.hi; ++k) p[k - s.lo] = std::exp(-std::abs(k) + s.g[k - s.lo] - log_z_);
  return p;
}

SosPath exact_sample(const SosPath& like, CounterRng& rng) { return SosExactSampler(like).sample(rng); }

}  // namespace ifdyn
