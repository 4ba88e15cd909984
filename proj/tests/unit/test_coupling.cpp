#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "doctest.h"
#include "ifdyn/coupling.hpp"

using namespace ifdyn;

namespace {

// Exact mean coalescence time of the coupled L=1, window [-1,1] chain from
// (bottom, top) = (-1, 1). Transition probabilities of the pair are obtained
// by integrating the shared uniform over the breakpoints of both chains.
double exact_mean_coalescence_L1() {
  auto move = [](int eta, double u) {
    const auto r = glauber_rates(0, eta, 0);
    if (u < r.up) return std::min(eta + 1, 1);
    if (u > 1.0 - r.down) return std::max(eta - 1, -1);
    return eta;
  };
  std::vector<std::pair<int, int>> states{{-1, 0}, {0, 1}, {-1, 1}};
  auto idx = [&](std::pair<int, int> s) -> int {
    for (int k = 0; k < 3; ++k)
      if (states[k] == s) return k;
    return -1;  // coalesced
  };
  double A[3][4] = {};
  for (int k = 0; k < 3; ++k) {
    auto [x, y] = states[k];
    std::vector<double> cuts{0.0, 1.0};
    for (int v : {x, y}) {
      const auto r = glauber_rates(0, v, 0);
      cuts.push_back(r.up);
      cuts.push_back(1.0 - r.down);
    }
    std::sort(cuts.begin(), cuts.end());
    A[k][k] += 1.0;
    A[k][3] = 1.0;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      const double w = cuts[c + 1] - cuts[c];
      if (w <= 0) continue;
      const double mid = 0.5 * (cuts[c] + cuts[c + 1]);
      const int j = idx({move(x, mid), move(y, mid)});
      if (j >= 0) A[k][j] -= w;
    }
  }
  // Gaussian elimination
  for (int c = 0; c < 3; ++c) {
    for (int r = c + 1; r < 3; ++r) {
      const double f = A[r][c] / A[c][c];
      for (int k = c; k < 4; ++k) A[r][k] -= f * A[c][k];
    }
  }
  double x[3];
  for (int r = 2; r >= 0; --r) {
    double s = A[r][3];
    for (int k = r + 1; k < 3; ++k) s -= A[r][k] * x[k];
    x[r] = s / A[r][r];
  }
  return x[2];
}

}  // namespace

TEST_CASE("shared events keep equal chains equal") {
  SosModel m{6, 2};
  auto s = m.top();
  CoupledEnsemble<SosPath> ens({s, s, s});
  EventStream ev(1, 0, 6);
  ens.run(50.0, ev);
  CHECK(ens.chains()[0].same_heights(ens.chains()[2]));
  CHECK(ens.certified_time() > 0.0);
}

TEST_CASE("L=1 extremes under a low uniform") {
  const SosModel m{1, 0, 1};
  CoupledEnsemble<SosPath> ens({m.bottom(), m.top()});
  ens.step(Event{0.1, 0, 0.05});
  CHECK(ens.chains()[0][1] == 0);
  CHECK(ens.chains()[1][1] == 1);
}

TEST_CASE("order violation is detected") {
  const SosModel m{3, 0};
  CHECK_THROWS_AS(CoupledEnsemble<SosPath>({m.top(), m.bottom()}), Error);
}

TEST_CASE("surface extremes stay ordered on 3x3 over 1e5 events") {
  SurfaceModel m;
  m.N = 3;
  const auto plane = m.plane();
  CoupledEnsemble<HeightField> ens({minimal_surface(plane), plane, maximal_surface(plane)});
  EventStream ev(42, 0, plane.size());
  for (int k = 0; k < 100000; ++k) ens.step(ev.next());
  CHECK(ens.events() == 100000);
  ens.verify();
}

TEST_CASE("random SOS ensembles with walls stay ordered") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SosModel m{10, 3, std::nullopt, seed % 2 == 0};
    auto mid = m.bottom();
    CounterRng rng(seed);
    for (int i = 1; i <= 10; ++i) mid.set(static_cast<std::size_t>(i), mid.lower(static_cast<std::size_t>(i)) + static_cast<int>(rng.below(static_cast<std::uint64_t>(mid.upper(static_cast<std::size_t>(i)) - mid.lower(static_cast<std::size_t>(i)) + 1))));
    CoupledEnsemble<SosPath> ens({m.bottom(), mid, m.top()});
    EventStream ev(seed, 1, 10);
    ens.run(200.0, ev);
    ens.verify();
  }
}

TEST_CASE("identical starts coalesce at time zero") {
  SosModel m{4, 0};
  EventStream ev(1, 0, 4);
  const auto rec = coalesce_pair(m.top(), m.top(), ev, 10.0);
  CHECK(rec.time == 0.0);
  CHECK(rec.events == 0);
}

TEST_CASE("L=1 mean coalescence time matches the exact product-chain value") {
  const double exact = exact_mean_coalescence_L1();
  const SosModel m{1, 0, 1};
  const int n = 10000;
  double sum = 0.0, sum2 = 0.0;
  for (int r = 0; r < n; ++r) {
    const auto rec = coalescence_time(m, 77, static_cast<std::uint64_t>(r), 1e6);
    REQUIRE_FALSE(rec.censored);
    sum += rec.time;
    sum2 += rec.time * rec.time;
  }
  const double mean = sum / n, sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(std::abs(mean - exact) < 3.0 * sd / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("median coalescence grows superlinearly in L") {
  std::vector<double> med;
  for (int L : {8, 16, 32}) {
    std::vector<double> t;
    for (int r = 0; r < 21; ++r) t.push_back(coalescence_time(SosModel{L, 0}, 5, static_cast<std::uint64_t>(r), 1e7).time);
    std::nth_element(t.begin(), t.begin() + 10, t.end());
    med.push_back(t[10]);
  }
  CHECK(med[1] / med[0] > 2.0);
  CHECK(med[2] / med[1] > 2.0);
}

TEST_CASE("censored coalescence records") {
  const auto rec = coalescence_time(SosModel{32, 0}, 1, 0, 1.0);
  CHECK(rec.censored);
  CHECK(rec.time == 1.0);
}

TEST_CASE("cftp on a single-state space returns immediately") {
  auto p = SosPath::constant(SosGeometry::window(3, 0, 0, 0), 0);
  const auto r = cftp(p, p, 1, 0);
  CHECK(r.doublings == 0);
  CHECK(r.state == std::vector<int>{0, 0, 0});
}

TEST_CASE("cftp is reproducible and valid") {
  SosModel m{4, 1};
  const auto a = cftp_sample(m, 9, 3), b = cftp_sample(m, 9, 3);
  CHECK(a.state == b.state);
  CHECK(a.T == b.T);
  SurfaceModel s;
  s.N = 3;
  const auto c = cftp_sample(s, 9, 4);
  auto f = s.plane();
  for (std::size_t i = 0; i < c.state.size(); ++i) f.set(i, c.state[i]);
  CHECK(f.is_valid());
  CHECK_THROWS_AS(cftp_sample(SosModel{30, 0}, 1, 0, 1e-3, 2), Error);
}

TEST_CASE("cftp marginal at L=1 matches equilibrium") {
  const SosModel m{1, 0, 1};
  int zero = 0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) zero += cftp_sample(m, 31, static_cast<std::uint64_t>(k)).state[0] == 0;
  const double p = 1.0 / (1.0 + 2.0 * std::exp(-2.0));
  CHECK(std::abs(zero / static_cast<double>(n) - p) < 4.0 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("kaplan-meier and tmix estimate") {
  std::vector<CoalescenceRecord> recs(40);
  for (auto& r : recs) r.time = 3.5;
  auto est = tmix_upper_from_coalescence(recs);
  CHECK(est.estimate == 3.5);
  CHECK(est.lo == 3.5);
  CHECK(est.hi == 3.5);

  recs.resize(10);
  CHECK_THROWS_AS(tmix_upper_from_coalescence(recs), Error);
  std::vector<CoalescenceRecord> cens(40);
  for (auto& r : cens) r.censored = true, r.time = 1.0;
  try {
    tmix_upper_from_coalescence(cens);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::undefined_estimate);
  }

  // one censored observation beyond the crossing does not move it
  std::vector<CoalescenceRecord> mixed(100);
  for (std::size_t k = 0; k < 100; ++k) mixed[k].time = static_cast<double>(k + 1);
  mixed[99].censored = true;
  const auto curve = survival_curve(mixed);
  CHECK(curve[1].second == doctest::Approx(0.99));
  const double thr = 1.0 / (2.0 * std::exp(1.0));
  est = tmix_upper_from_coalescence(mixed);
  CHECK(est.estimate == std::ceil(100.0 * (1.0 - thr)));
  CHECK(est.lo <= est.estimate);
  CHECK(est.hi >= est.estimate);
}
