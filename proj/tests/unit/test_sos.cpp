#include <cmath>
#include <map>
#include <numeric>

#include "doctest.h"
#include "ifdyn/error.hpp"
#include "ifdyn/sos.hpp"

using namespace ifdyn;

namespace {
const double E2 = std::exp(-2.0);

std::vector<double> brute_conditional(int left, int right, int lo, int hi) {
  std::vector<double> w;
  for (int k = lo; k <= hi; ++k) w.push_back(std::exp(-std::abs(k - left) - std::abs(k - right)));
  const double z = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= z;
  return w;
}

// all interior configurations of a bounded path, in lexicographic order
std::vector<std::vector<int>> all_paths(const SosPath& like) {
  std::vector<std::vector<int>> out;
  std::vector<int> v(static_cast<std::size_t>(like.L()));
  for (int i = 1; i <= like.L(); ++i) v[i - 1] = like.lower(i);
  while (true) {
    out.push_back(v);
    int i = like.L();
    while (i >= 1 && v[i - 1] == like.upper(i)) {
      v[i - 1] = like.lower(i);
      --i;
    }
    if (i == 0) break;
    ++v[i - 1];
  }
  return out;
}

double chi2_crit99(double k) {
  const double z = 2.3263478740408408;
  const double a = 2.0 / (9.0 * k);
  return k * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}
}  // namespace

TEST_CASE("rates: three cases") {
  auto r = glauber_rates(2, 3, 5);
  CHECK(r.down == 0.5);
  CHECK(r.up == 0.5);
  r = glauber_rates(2, 2, 5);
  CHECK(r.down == doctest::Approx(0.119203).epsilon(1e-6));
  CHECK(r.down == E2 / (1 + E2));
  CHECK(r.up == 0.5);
  r = glauber_rates(5, 6, 2);
  CHECK(r.down == doctest::Approx(0.880797).epsilon(1e-6));
  CHECK(r.up == E2 / (1 + E2));
  CHECK(r.up_case == RateCase::suppressed);
  CHECK(r.down_case == RateCase::favored);
}

TEST_CASE("rates: monotone in neighbors and sum at most one") {
  for (int a = -4; a <= 4; ++a)
    for (int b = -4; b <= 4; ++b)
      for (int e = -4; e <= 4; ++e) {
        const auto r = glauber_rates(a, e, b);
        CHECK(r.up + r.down <= 1.0 + 1e-15);
        if (a < 4) {
          const auto s = glauber_rates(a + 1, e, b);
          CHECK(s.up >= r.up);
          CHECK(s.down <= r.down);
        }
      }
}

TEST_CASE("rates satisfy detailed balance against Gibbs weights") {
  for (int a = -4; a <= 4; ++a)
    for (int b = -4; b <= 4; ++b)
      for (int e = -4; e < 4; ++e) {
        const double w0 = std::exp(-std::abs(e - a) - std::abs(e - b));
        const double w1 = std::exp(-std::abs(e + 1 - a) - std::abs(e + 1 - b));
        CHECK(std::abs(w0 * glauber_rates(a, e, b).up - w1 * glauber_rates(a, e + 1, b).down) < 1e-15);
      }
}

TEST_CASE("step interval layout, clamps and walls") {
  auto p = SosPath::constant(SosGeometry::bounded(1, 0), 0);
  CHECK_FALSE(glauber_step(p, 1, 0.5));
  CHECK(p[1] == 0);
  CHECK(glauber_step(p, 1, 0.01));
  CHECK(p[1] == 1);
  CHECK_FALSE(glauber_step(p, 1, 0.01));  // window top: clamp
  CHECK(p[1] == 1);

  auto w = SosPath::constant(SosGeometry::bounded(5, 2), 0);
  w.set_floor(wall_profile(5, 2).values);
  w.fill_lower();
  for (int i = 1; i <= 5; ++i) {
    CHECK_FALSE(glauber_step(w, static_cast<std::size_t>(i), 0.9999));
    CHECK(w[static_cast<std::size_t>(i)] == w.lower(static_cast<std::size_t>(i)));
  }
}

TEST_CASE("site conditional sample: examples") {
  CHECK(site_conditional_sample(0, 0, -1, 1, 0.5) == 0);
  const double p0 = 1.0 / (1.0 + 2.0 * E2);
  CHECK(p0 == doctest::Approx(0.786987).epsilon(1e-6));
  const double p_low = E2 / (1.0 + 2.0 * E2);
  CHECK(site_conditional_sample(0, 0, -1, 1, p_low - 1e-9) == -1);
  CHECK(site_conditional_sample(0, 0, -1, 1, p_low + 1e-9) == 0);
  CHECK(site_conditional_sample(0, 0, -1, 1, p_low + p0 + 1e-9) == 1);
  for (double u : {0.0, 0.3, 0.999}) CHECK(site_conditional_sample(3, -2, 7, 7, u) == 7);
  for (int k = 0; k < 5; ++k) CHECK(site_conditional_sample(0, 4, 0, 4, (k + 0.5) / 5.0) == k);
  CHECK_THROWS_AS(site_conditional_sample(0, 0, 2, 1, 0.5), Error);
}

TEST_CASE("site conditional sample matches brute force exhaustively") {
  for (int lo = -6; lo <= 6; ++lo)
    for (int hi = lo; hi <= lo + 12 && hi <= 8; ++hi)
      for (int left = -8; left <= 8; left += 2)
        for (int right = -7; right <= 8; right += 3) {
          const auto p = brute_conditional(left, right, lo, hi);
          double c = 0.0;
          for (int k = lo; k <= hi; ++k) {
            const double prev = c;
            c += p[k - lo];
            if (p[k - lo] < 1e-9) continue;
            // interior points of each CDF step map to k
            CHECK(site_conditional_sample(left, right, lo, hi, prev + 0.25 * p[k - lo]) == k);
            CHECK(site_conditional_sample(left, right, lo, hi, prev + 0.75 * p[k - lo]) == k);
          }
        }
}

TEST_CASE("quantile coupling is monotone in the neighbors") {
  for (int left = -3; left <= 3; ++left)
    for (int right = -3; right <= 3; ++right)
      for (int j = 0; j < 50; ++j) {
        const double u = (j + 0.5) / 50.0;
        CHECK(site_conditional_sample(left, right, -5, 5, u) <= site_conditional_sample(left + 1, right, -5, 5, u));
      }
}

TEST_CASE("column sweep resamples L=1 from equilibrium") {
  auto p = SosPath::constant(SosGeometry::bounded(1, 0), 1);
  const double us[] = {0.05};
  column_sweep(p, Parity::odd, std::span<const double>(us, 1));
  CHECK(p[1] == -1);
  // flat path with median quantiles stays flat
  auto f = SosPath::constant(SosGeometry::bounded(6, 0), 0);
  const std::vector<double> half(6, 0.5);
  column_sweep(f, Parity::even, half);
  column_sweep(f, Parity::odd, half);
  for (int i = 1; i <= 6; ++i) CHECK(f[static_cast<std::size_t>(i)] == 0);
}

TEST_CASE("column sweep uses the neighbor conditional at each site") {
  auto p = SosPath(SosGeometry::window(5, 1, -2, 2), {2, -1, 0, 1, -2});
  const std::vector<double> u{0.1, 0.2, 0.3, 0.4, 0.9};
  auto q = p;
  column_sweep(q, Parity::odd, u);
  for (std::size_t i : {1u, 3u, 5u}) CHECK(q[i] == site_conditional_sample(p[i - 1], p[i + 1], -2, 2, u[i - 1]));
  for (std::size_t i : {2u, 4u}) CHECK(q[i] == p[i]);
}

TEST_CASE("half sweeps are reversible and the composed sweep is stationary on L=3") {
  const auto like = SosPath::constant(SosGeometry::window(3, 0, -2, 2), 0);
  const auto states = all_paths(like);
  const std::size_t n = states.size();
  std::map<std::vector<int>, std::size_t> index;
  for (std::size_t s = 0; s < n; ++s) index[states[s]] = s;
  std::vector<double> pi(n);
  for (std::size_t s = 0; s < n; ++s) pi[s] = std::exp(-static_cast<double>(sos_energy(std::span<const int>(states[s]), 0)));
  const double z = std::accumulate(pi.begin(), pi.end(), 0.0);
  for (auto& x : pi) x /= z;

  auto half_kernel = [&](Parity par) {
    std::vector<double> K(n * n, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      const auto& v = states[s];
      auto full = [&](std::size_t i) { return i == 0 ? 0 : (i == 4 ? 0 : v[i - 1]); };
      std::vector<std::vector<double>> marg(3);
      for (std::size_t i = 1; i <= 3; ++i) {
        if ((i % 2 == 1) == (par == Parity::odd))
          marg[i - 1] = brute_conditional(full(i - 1), full(i + 1), -2, 2);
        else
          marg[i - 1].assign(5, 0.0), marg[i - 1][static_cast<std::size_t>(v[i - 1] + 2)] = 1.0;
      }
      for (std::size_t t = 0; t < n; ++t) {
        double p = 1.0;
        for (std::size_t i = 0; i < 3; ++i) p *= marg[i][static_cast<std::size_t>(states[t][i] + 2)];
        K[s * n + t] = p;
      }
    }
    return K;
  };
  const auto Ke = half_kernel(Parity::even), Ko = half_kernel(Parity::odd);
  double rev = 0.0;
  for (const auto* K : {&Ke, &Ko})
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = 0; t < n; ++t) rev = std::max(rev, std::abs(pi[s] * (*K)[s * n + t] - pi[t] * (*K)[t * n + s]));
  CHECK(rev < 1e-12);
  std::vector<double> a(n, 0.0), b(n, 0.0);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = 0; t < n; ++t) a[t] += pi[s] * Ke[s * n + t];
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = 0; t < n; ++t) b[t] += a[s] * Ko[s * n + t];
  double err = 0.0;
  for (std::size_t s = 0; s < n; ++s) err = std::max(err, std::abs(b[s] - pi[s]));
  CHECK(err < 1e-12);
}

TEST_CASE("censor schedule freezes one parity at a time") {
  CensorSchedule cs(0.5, 10.0);
  CHECK(cs.frozen(1, 0.1));
  CHECK_FALSE(cs.frozen(2, 0.1));
  CHECK(cs.frozen(2, 0.6));
  CHECK_FALSE(cs.frozen(1, 0.6));
  CHECK_FALSE(cs.frozen(1, 10.5));

  const auto start = SosPath::constant(SosGeometry::bounded(8, 0), 3);
  SosChain ch(start);
  EventStream ev(11, 0, 8);
  CensorSchedule first(5.0, 5.0);
  ch.censored_run(first, 4.99, ev);
  for (std::size_t i = 1; i <= 8; i += 2) CHECK(ch.state()[i] == 3);
  CHECK(ch.events() > 0);
  CHECK_THROWS_AS(ch.censored_run(first, 6.0, ev), Error);
}

TEST_CASE("censored run never moves frozen sites") {
  CensorSchedule cs(0.3, 50.0);
  SosChain ch(SosPath::maximal(SosGeometry::bounded(6, 2)));
  EventStream ev(5, 2, 6);
  auto prev = ch.state();
  while (ev.peek().time < 50.0) {
    const Event e = ev.peek();
    ch.censored_run(cs, e.time, ev);
    for (std::size_t i = 1; i <= 6; ++i)
      if (cs.frozen(i, e.time)) CHECK(ch.state()[i] == prev[i]);
    prev = ch.state();
  }
}

TEST_CASE("fast alternation halves each site's clock") {
  // with T -> 0 each site runs half the time, so the censored law at time 2t
  // matches the uncensored law at time t
  auto run = [](bool censor) {
    double acc = 0.0;
    for (int rep = 0; rep < 4000; ++rep) {
      SosChain ch(SosPath::maximal(SosGeometry::bounded(4, 0)));
      EventStream ev(99, static_cast<std::uint64_t>(rep), 4);
      if (censor)
        ch.censored_run(CensorSchedule(1e-4, 2.0), 2.0, ev);
      else
        ch.run(1.0, ev);
      for (int v : ch.state().interior()) acc += v;
    }
    return acc / 4000.0;
  };
  CHECK(std::abs(run(false) - run(true)) < 0.2);
}

TEST_CASE("empty censoring horizon reproduces the uncensored path") {
  SosChain a(SosPath::maximal(SosGeometry::bounded(6, 1)));
  EventStream ea(8, 0, 6);
  a.run(20.0, ea);
  SosChain c(SosPath::maximal(SosGeometry::bounded(6, 1)));
  EventStream ec(8, 0, 6);
  // schedule horizon 0: nothing frozen after t = 0
  CensorSchedule none(0.5, 20.0);
  none.horizon = 0.0;
  while (ec.peek().time <= 20.0) {
    const Event e = ec.next();
    if (!none.frozen(e.site + 1, e.time)) c.step(e);
  }
  CHECK(a.state().same_heights(c.state()));
}

TEST_CASE("exact sampler: partition function and marginals") {
  SosExactSampler s1(SosPath::constant(SosGeometry::window(1, 0, -1, 1), 0));
  const auto m = s1.first_site_marginal();
  CHECK(m[1] == doctest::Approx(1.0 / (1.0 + 2.0 * E2)).epsilon(1e-14));
  CHECK(m[0] == doctest::Approx(m[2]).epsilon(1e-14));

  for (int h : {0, 1, 2}) {
    auto like = SosPath::constant(SosGeometry::bounded(4, h), 0);
    if (h == 2) like.set_floor(wall_profile(4, 2).values);
    SosExactSampler s(like);
    double z = 0.0;
    for (const auto& v : all_paths(like)) z += std::exp(-static_cast<double>(sos_energy(std::span<const int>(v), h)));
    CHECK(s.log_partition() == doctest::Approx(std::log(z)).epsilon(1e-13));
  }

  auto bad = SosPath::constant(SosGeometry::bounded(3, 0), 0);
  bad.set_floor({0, 2, 0});
  bad.set_ceiling({0, 1, 0});
  CHECK_THROWS_AS(SosExactSampler{bad}, Error);
}

TEST_CASE("exact sampler: chi-square on L=4 and sign symmetry") {
  const auto like = SosPath::constant(SosGeometry::bounded(4, 0), 0);
  SosExactSampler s(like);
  const auto states = all_paths(like);
  std::map<std::vector<int>, std::size_t> counts;
  CounterRng rng = CounterRng::stream(2024, 1);
  const int N = 100000;
  long sum_sign = 0;
  for (int k = 0; k < N; ++k) {
    const auto p = s.sample(rng);
    auto in = p.interior();
    std::vector<int> v(in.begin(), in.end());
    ++counts[v];
    sum_sign += v[1] > 0 ? 1 : (v[1] < 0 ? -1 : 0);
  }
  double chi2 = 0.0, pooled_obs = 0.0, pooled_exp = 0.0;
  int bins = 0;
  for (const auto& v : states) {
    const double e = N * std::exp(s.log_prob(v));
    const double o = counts.count(v) ? static_cast<double>(counts[v]) : 0.0;
    if (e < 5.0) {
      pooled_obs += o;
      pooled_exp += e;
      continue;
    }
    chi2 += (o - e) * (o - e) / e;
    ++bins;
  }
  chi2 += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
  ++bins;
  CHECK(chi2 < chi2_crit99(bins - 1));
  CHECK(std::abs(static_cast<double>(sum_sign)) < 4.0 * std::sqrt(static_cast<double>(N)));
}

TEST_CASE("exact sampler respects walls") {
  auto like = SosPath::constant(SosGeometry::bounded(30, 7), 0);
  like.set_floor(wall_profile(30, 7).values);
  SosExactSampler s(like);
  CounterRng rng(3);
  for (int k = 0; k < 200; ++k) CHECK(s.sample(rng).is_valid());
}
