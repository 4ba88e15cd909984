#include <cmath>
#include <memory>

#include "doctest.h"
#include "ifdyn/coupling.hpp"
#include "ifdyn/error.hpp"
#include "ifdyn/schedule.hpp"
#include "ifdyn/sos.hpp"

using namespace ifdyn;

TEST_CASE("segment radius") {
  CHECK(segment_radius(4.0, 4.0) == 4.0);
  CHECK(segment_radius(2.0, 4.0) == 5.0);
  CHECK((2 * 5.0 - 2.0) * 2.0 == 16.0);
  CHECK(segment_radius(0.5, 4.0) > segment_radius(1.0, 4.0));
  CHECK_THROWS_AS(segment_radius(0.0, 4.0), Error);
  try {
    segment_radius(-1.0, 4.0);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_height);
  }
}

TEST_CASE("segment height: apex, base ends, concavity, outside") {
  const auto g = make_segment(3.0, 4.0, 2.0);
  CHECK(segment_height(g, 3.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(std::abs(segment_height(g, -1.0)) < 1e-12);
  CHECK(std::abs(segment_height(g, 7.0)) < 1e-12);
  for (double a = -1.0; a < 7.0; a += 0.37)
    for (double b = a + 0.1; b <= 7.0; b += 0.53)
      CHECK(segment_height(g, 0.5 * (a + b)) >= 0.5 * (segment_height(g, a) + segment_height(g, b)) - 1e-12);
  try {
    segment_height(g, 7.5);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::outside_base);
  }
}

TEST_CASE("cap membership and height agree") {
  const auto n = SlopeVector::normalized(1, 1, 1);
  const auto g = make_cap(n, {1.0, -2.0, 3.0}, 20.0, 4.0);
  const Vec3 apex{1.0 + 4.0 * n.n1(), -2.0 + 4.0 * n.n2(), 3.0 + 4.0 * n.n3()};
  CHECK(cap_membership(g, apex));
  CHECK(cap_membership(g, g.w0));
  const double eps = 1e-3;
  CHECK(!cap_membership(g, {1.0 - eps * n.n1(), -2.0 - eps * n.n2(), 3.0 - eps * n.n3()}));
  for (double x = -10; x <= 10; x += 1.5)
    for (double y = -10; y <= 10; y += 1.5) {
      const auto z = cap_height(g, x, y);
      if (!z) continue;
      CHECK(cap_membership(g, {x, y, *z}));
      CHECK(!cap_membership(g, {x, y, *z + 1e-6 * g.R}));
    }
  CHECK(!cap_height(g, 200.0, 0.0));
}

TEST_CASE("surface cap over a region records its clearance") {
  const auto n = SlopeVector::normalized(1, 1, 1);
  const Region r = Region::rectangle(32, 32);
  const auto g = surface_cap(r, n, 1.0, 64.0);
  CHECK(g.rho == doctest::Approx(r.diameter() * std::log(r.diameter())));
  CHECK(g.clearance > 0.0);
  for (const auto& p : r.sites()) CHECK(cap_height(g, p.x1, p.x2).has_value());
}

TEST_CASE("caps are nested as the height decreases") {
  const auto s = schedule_surface(64);
  for (std::size_t k = 0; k + 1 < s.u.size(); k += 7) {
    const auto a = sos_segment(64, s.u[k]), b = sos_segment(64, s.u[k + 1]);
    for (double x = 1; x <= 64; x += 3) CHECK(segment_height(b, x) <= segment_height(a, x) + 1e-12);
  }
}

TEST_CASE("surface schedule invariants and bound over the sweep") {
  double prev_step = 1e9;
  for (int e = 6; e <= 12; ++e) {
    const int L = 1 << e;
    const auto s = schedule_surface(L);
    const double lnL = std::log(static_cast<double>(L));
    CHECK(s.u[0] == 2.0 * L);
    CHECK(s.t[0] == 0.0);
    CHECK(s.M() == static_cast<std::size_t>(std::ceil(2.0 * L - std::pow(lnL, 1.25))));
    double worst = 0.0;
    for (std::size_t k = 0; k < s.u.size(); ++k) {
      CHECK((2 * s.R[k] - s.u[k]) * s.u[k] == doctest::Approx(s.rho * s.rho).epsilon(1e-9));
      if (k > 0) {
        CHECK(s.u[k] == s.u[k - 1] - 1.0);
        CHECK(s.t[k] > s.t[k - 1]);
        worst = std::max(worst, s.R[k] / s.R[k - 1] - 1.0);
      }
    }
    CHECK(s.bound_ok);
    CHECK(s.bound_ratio <= kSurfaceScheduleK);
    CHECK(worst < prev_step);
    prev_step = worst;
  }
}

TEST_CASE("surface radii: first and last against their leading-order forms") {
  const int L = 1 << 10;
  const auto s = schedule_surface(L);
  const double lnL = std::log(static_cast<double>(L));
  CHECK(s.R.front() / (L * lnL * lnL / 4.0) == doctest::Approx(1.0).epsilon(0.2));
  // R_M = rho^2 / (2 u_M) (1 + o(1)) with u_M ~ (ln L)^{5/4}
  CHECK(s.R.back() / (static_cast<double>(L) * L * std::pow(lnL, 0.75) / 2.0) == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("SOS schedule: default exponents and scaled profile") {
  for (int e = 6; e <= 12; ++e) {
    const int L = 1 << e;
    const auto s = schedule_sos(L);
    CHECK(s.u[0] == 2.0 * L);
    CHECK(s.t[0] == 0.0);
    CHECK(s.bound_ok);
    CHECK(s.half_steps_ok);
    // 2L is already below sqrt(L)(ln L)^4 at these sizes
    CHECK(s.M() == 0);
  }
  const auto s = schedule_sos(64, sos_profile("scaled"));
  CHECK(s.profile.name == "scaled");
  CHECK(s.M() > 3);
  CHECK(s.half_steps_ok);
  CHECK(s.u.back() <= std::sqrt(64.0) * std::log(64.0));
  CHECK(s.u[s.M() - 1] > std::sqrt(64.0) * std::log(64.0));
  for (std::size_t k = 1; k < s.u.size(); ++k) {
    CHECK(s.u[k] < s.u[k - 1]);
    CHECK(s.t[k] > s.t[k - 1]);
    CHECK((2 * s.R[k] - s.u[k]) * s.u[k] == doctest::Approx(s.rho * s.rho).epsilon(1e-9));
  }
  CHECK_THROWS_AS(sos_profile("other"), Error);
}

TEST_CASE("generic schedule reproduces both recursions") {
  try {
    generic_schedule(64, 1.0);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unsupported_exponent);
  }
  const auto g0 = generic_schedule(128, 0.0, {0.0, 0.0, 1.25});
  for (std::size_t k = 0; k < g0.u.size(); ++k) CHECK(g0.u[k] == doctest::Approx(256.0 - static_cast<double>(k)));
  const auto sur = schedule_surface(128);
  CHECK(g0.M() + 1 >= sur.M());
  CHECK(g0.M() <= sur.M() + 1);

  const auto g5 = generic_schedule(64, 0.5, {0.0, 0.0, 1.0});
  const auto sos = schedule_sos(64, sos_profile("scaled"));
  REQUIRE(g5.u.size() == sos.u.size());
  for (std::size_t k = 0; k < sos.u.size(); ++k) {
    CHECK(g5.u[k] == doctest::Approx(sos.u[k]).epsilon(1e-14));
    CHECK(g5.t[k] == doctest::Approx(sos.t[k]).epsilon(1e-14));
  }
}

TEST_CASE("generic sweep: number of steps and polylogarithmic time") {
  const std::vector<int> Ls{64, 128, 256, 512, 1024, 2048, 4096};
  for (double gamma : {0.0, 0.5}) {
    const auto sw = generic_sweep(gamma, Ls);
    CHECK(sw.slope_M == doctest::Approx((2 - 2 * gamma) / (2 - gamma)).epsilon(0.15));
    CHECK(sw.polylog_exponent < 5.0);
    CHECK(sw.slope_t < 1.0);
  }
}

TEST_CASE("domination monitor") {
  const int L = 64;
  const auto sched = schedule_sos(L, sos_profile("scaled"));
  std::vector<double> flat(L, 0.0);

  // flat trajectory is always inside
  Trajectory tr;
  for (double t : sched.t) {
    tr.times.push_back(t);
    tr.states.push_back(std::vector<int>(L, 0));
  }
  const auto rep = domination_monitor(tr, sched, flat);
  CHECK(rep.all_satisfied);
  CHECK(rep.rows.size() == sched.u.size());
  CHECK(rep.final_deviation == 0.0);

  // a maximal start is inside the first cap
  const SosModel m{L, 0, std::nullopt, true};
  SosChain chain(m.top());
  EventStream ev(5, 0, L);
  const auto run = chain.run(sched.t[2], ev, std::span<const double>(sched.t.data(), 3));
  auto short_sched = sched;
  short_sched.u.resize(3);
  short_sched.R.resize(3);
  short_sched.t.resize(3);
  const auto r2 = domination_monitor(run, short_sched, flat);
  CHECK(r2.rows[0].satisfied);

  Trajectory missing = tr;
  missing.times.pop_back();
  missing.states.pop_back();
  try {
    domination_monitor(missing, sched, flat);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::incomplete_trajectory);
  }
}
