#include "ifdyn/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ifdyn/error.hpp"

namespace ifdyn {

double segment_radius(double u, double rho) {
  if (!(u > 0.0)) throw Error(Errc::invalid_height, "cap height must be positive");
  if (!(rho > 0.0)) throw Error(Errc::invalid_parameters, "base radius must be positive");
  if (u > rho * (1.0 + 1e-12)) throw Error(Errc::invalid_height, "cap taller than a hemisphere");
  return (rho * rho + u * u) / (2.0 * u);
}

SegmentGeometry make_segment(double center, double rho, double u) { return {center, rho, u, segment_radius(u, rho)}; }

SegmentGeometry sos_segment(int L, double u) {
  return make_segment(0.5 * L, L * std::log(static_cast<double>(L)), u);
}

double segment_height(const SegmentGeometry& g, double x) {
  const double dx = x - g.center;
  if (std::abs(dx) > g.rho * (1.0 + 1e-12)) throw Error(Errc::outside_base, "point outside the segment base");
  return (g.u - g.R) + std::sqrt(std::max(0.0, g.R * g.R - dx * dx));
}

bool segment_contains(const SegmentGeometry& g, const SosPath& path) {
  for (int i = 1; i <= path.L(); ++i)
    if (path[static_cast<std::size_t>(i)] < 0 || path[static_cast<std::size_t>(i)] > segment_height(g, i)) return false;
  return true;
}

namespace {
double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
}  // namespace

CapGeometry make_cap(const SlopeVector& n, const Vec3& w0, double rho, double u) {
  CapGeometry g;
  g.normal = {n.n1(), n.n2(), n.n3()};
  g.w0 = w0;
  g.rho = rho;
  g.u = u;
  g.R = segment_radius(u, rho);
  for (int k = 0; k < 3; ++k) g.sphere_center[k] = w0[k] - (g.R - u) * g.normal[k];
  return g;
}

CapGeometry surface_cap(const Region& region, const SlopeVector& n, double C, double u) {
  double cx = 0.0, cy = 0.0;
  for (const auto& p : region.sites()) {
    cx += p.x1;
    cy += p.x2;
  }
  cx /= static_cast<double>(region.size());
  cy /= static_cast<double>(region.size());
  const double L = std::max(region.diameter(), 1.0);
  const double lnL = std::log(std::max(L, 2.0));
  const double rho = L * lnL;
  const double z0 = -(cx * n.n1() + cy * n.n2()) / n.n3() + C * lnL;
  CapGeometry g = make_cap(n, {cx, cy, z0}, rho, u);
  // the projected disk is an ellipse with minor semi-axis rho n3
  double reach = 0.0;
  for (const auto& p : region.sites()) reach = std::max(reach, std::hypot(p.x1 - cx, p.x2 - cy));
  g.clearance = rho * n.n3() - reach;
  return g;
}

bool cap_membership(const CapGeometry& g, const Vec3& p) {
  Vec3 d{p[0] - g.sphere_center[0], p[1] - g.sphere_center[1], p[2] - g.sphere_center[2]};
  Vec3 e{p[0] - g.w0[0], p[1] - g.w0[1], p[2] - g.w0[2]};
  const double tol = 1e-12 * g.R;
  return std::sqrt(dot3(d, d)) <= g.R + tol && dot3(e, g.normal) >= -tol;
}

std::optional<double> cap_height(const CapGeometry& g, double x1, double x2) {
  const double dx = x1 - g.sphere_center[0], dy = x2 - g.sphere_center[1];
  const double disc = g.R * g.R - dx * dx - dy * dy;
  if (disc < 0.0) return std::nullopt;
  const double z = g.sphere_center[2] + std::sqrt(disc);
  const double plane = g.w0[2] - (g.normal[0] * (x1 - g.w0[0]) + g.normal[1] * (x2 - g.w0[1])) / g.normal[2];
  if (z < plane) return std::nullopt;
  return z;
}

ScheduleProfile surface_profile(const std::string& name) {
  if (name == "asymptotic") return {"asymptotic", 0.0, 8.5, 1.25};
  if (name == "scaled") return {"scaled", 0.0, 1.5, 1.25};
  throw Error(Errc::invalid_parameters, "unknown schedule profile '" + name + "'");
}

ScheduleProfile sos_profile(const std::string& name, double alpha1) {
  if (name == "asymptotic") return {"asymptotic", 2.0, 3.0 + alpha1, 4.0};
  if (name == "scaled") return {"scaled", 0.0, 0.0, 1.0};
  throw Error(Errc::invalid_parameters, "unknown schedule profile '" + name + "'");
}

std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::surface: return "surface";
    case ScheduleKind::sos: return "sos";
    case ScheduleKind::generic: return "generic";
  }
  return "?";
}

namespace {

void finish_bound(CapSchedule& s, double K) {
  const double lnL = std::log(static_cast<double>(s.L));
  s.bound_K = K;
  s.bound_ratio = s.t_M() / (static_cast<double>(s.L) * s.L * std::pow(lnL, s.bound_log));
  s.bound_ok = s.bound_ratio <= K;
  for (std::size_t k = 1; k < s.u.size(); ++k)
    if (s.u[k] < 0.5 * s.u[k - 1]) s.half_steps_ok = false;
}

// u-recursion shared by the SOS and generic schedules
CapSchedule real_schedule(ScheduleKind kind, int L, double step_exp, double time_exp, double step_log, double time_log,
                          double stop) {
  CapSchedule s;
  s.kind = kind;
  s.L = L;
  const double lnL = std::log(static_cast<double>(L));
  s.rho = L * lnL;
  const double rho2 = s.rho * s.rho;
  double u = 2.0 * L, t = 0.0;
  for (;;) {
    s.u.push_back(u);
    s.R.push_back(segment_radius(u, s.rho));
    s.t.push_back(t);
    if (u <= stop) break;
    const double x = rho2 / u;
    const double next = u - std::pow(x, step_exp) * std::pow(lnL, step_log);
    if (!(next > 0.0)) throw Error(Errc::invalid_parameters, "schedule step overshoots zero");
    t += std::pow(x, time_exp) * std::pow(lnL, time_log);
    u = next;
    if (s.u.size() > 50'000'000) throw Error(Errc::iteration_cap, "schedule too long");
  }
  return s;
}

}  // namespace

CapSchedule schedule_surface(int L, const ScheduleProfile& profile) {
  if (L < 8) throw Error(Errc::invalid_parameters, "schedules need L >= 8");
  CapSchedule s;
  s.kind = ScheduleKind::surface;
  s.L = L;
  s.profile = profile;
  const double lnL = std::log(static_cast<double>(L));
  s.rho = L * lnL;
  const auto M = static_cast<long>(std::ceil(2.0 * L - std::pow(lnL, profile.stop_log)));
  double t = 0.0;
  for (long n = 0; n <= M; ++n) {
    const double u = 2.0 * L - static_cast<double>(n);
    const double R = segment_radius(u, s.rho);
    if (n > 0) t += R * std::pow(lnL, profile.time_log);
    s.u.push_back(u);
    s.R.push_back(R);
    s.t.push_back(t);
  }
  s.bound_log = profile.time_log + 3.0;
  finish_bound(s, kSurfaceScheduleK);
  return s;
}

CapSchedule schedule_sos(int L, const ScheduleProfile& profile) {
  if (L < 8) throw Error(Errc::invalid_parameters, "schedules need L >= 8");
  const double lnL = std::log(static_cast<double>(L));
  auto s = real_schedule(ScheduleKind::sos, L, 1.0 / 3.0, 4.0 / 3.0, profile.step_log, profile.time_log,
                         std::sqrt(static_cast<double>(L)) * std::pow(lnL, profile.stop_log));
  s.profile = profile;
  s.gamma = 0.5;
  s.bound_log = profile.time_log + 1.0;
  finish_bound(s, 1.0);
  return s;
}

CapSchedule generic_schedule(int L, double gamma, const GenericExponents& e) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(Errc::unsupported_exponent, "fluctuation exponent must lie in [0, 1)");
  if (L < 8) throw Error(Errc::invalid_parameters, "schedules need L >= 8");
  const double lnL = std::log(static_cast<double>(L));
  auto s = real_schedule(ScheduleKind::generic, L, gamma / (2.0 - gamma), 2.0 / (2.0 - gamma), e.c1, e.c2,
                         std::pow(static_cast<double>(L), gamma) * std::pow(lnL, e.c3));
  s.profile = {"generic", e.c1, e.c2, e.c3};
  s.gamma = gamma;
  s.bound_log = e.c2 + 1.0;
  finish_bound(s, std::numeric_limits<double>::infinity());
  return s;
}

namespace {
double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}
}  // namespace

GenericSweep generic_sweep(double gamma, const std::vector<int>& Ls, const GenericExponents& e) {
  GenericSweep out;
  std::vector<double> lx, llx, lt, lm;
  for (int L : Ls) {
    const auto s = generic_schedule(L, gamma, e);
    const double r = s.t_M() / (static_cast<double>(L) * L);
    out.rows.push_back({L, s.M(), s.t_M(), r});
    if (s.M() == 0) continue;  // degenerate: 2L already below the stopping threshold
    lx.push_back(std::log(static_cast<double>(L)));
    llx.push_back(std::log(lx.back()));
    lt.push_back(std::log(r));
    lm.push_back(std::log(static_cast<double>(s.M())));
  }
  if (lx.size() >= 2) {
    out.slope_t = ls_slope(lx, lt);
    out.polylog_exponent = ls_slope(llx, lt);
    out.slope_M = ls_slope(lx, lm);
  }
  return out;
}

namespace {

std::vector<std::size_t> checkpoint_rows(const Trajectory& tr, const CapSchedule& s) {
  std::vector<std::size_t> idx;
  for (double tn : s.t) {
    const auto it = std::find_if(tr.times.begin(), tr.times.end(),
                                 [&](double x) { return std::abs(x - tn) <= 1e-9 * std::max(1.0, tn); });
    if (it == tr.times.end())
      throw Error(Errc::incomplete_trajectory, "no checkpoint at schedule time " + std::to_string(tn));
    idx.push_back(static_cast<std::size_t>(it - tr.times.begin()));
  }
  return idx;
}

template <class Violation>
MonitorReport monitor(const Trajectory& tr, const CapSchedule& s, const std::vector<double>& reference,
                      Violation violation) {
  const auto idx = checkpoint_rows(tr, s);
  MonitorReport rep;
  rep.all_satisfied = true;
  for (std::size_t n = 0; n < s.u.size(); ++n) {
    MonitorRow row{n, s.t[n], s.u[n]};
    row.max_violation = violation(tr.states[idx[n]], s.u[n]);
    row.satisfied = row.max_violation <= 0.0;
    for (std::size_t k = idx[n] + 1; k < tr.states.size(); ++k)
      if (violation(tr.states[k], s.u[n]) > 0.0) row.later_satisfied = false;
    row.max_violation = std::max(row.max_violation, 0.0);
    rep.all_satisfied = rep.all_satisfied && row.satisfied;
    rep.rows.push_back(row);
  }
  const auto& last = tr.states[idx.back()];
  if (reference.size() != last.size()) throw Error(Errc::invalid_parameters, "reference profile length mismatch");
  rep.final_deviation = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < last.size(); ++i) rep.final_deviation = std::max(rep.final_deviation, last[i] - reference[i]);
  return rep;
}

}  // namespace

MonitorReport domination_monitor(const Trajectory& tr, const CapSchedule& s, const std::vector<double>& reference) {
  return monitor(tr, s, reference, [&](const std::vector<int>& eta, double u) {
    const auto g = sos_segment(s.L, u);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < eta.size(); ++i) {
      const double psi = segment_height(g, static_cast<double>(i + 1));
      worst = std::max({worst, eta[i] - psi, -static_cast<double>(eta[i])});
    }
    return worst;
  });
}

MonitorReport domination_monitor(const Trajectory& tr, const CapSchedule& s, const std::vector<double>& reference,
                                 const Region& region, const SlopeVector& n, double C) {
  return monitor(tr, s, reference, [&](const std::vector<int>& phi, double u) {
    const auto g = surface_cap(region, n, C, u);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < phi.size(); ++i) {
      const auto p = region.sites()[i];
      const auto psi = cap_height(g, p.x1, p.x2);
      if (!psi) return std::numeric_limits<double>::infinity();
      worst = std::max(worst, phi[i] - *psi);
    }
    return worst;
  });
}

}  // namespace ifdyn
