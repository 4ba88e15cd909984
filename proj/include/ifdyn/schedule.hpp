#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ifdyn/events.hpp"
#include "ifdyn/lattice.hpp"

namespace ifdyn {

/// R solving (2R - u) u = rho^2.
double segment_radius(double u, double rho);

/// Circular segment of height u over [center - rho, center + rho].
struct SegmentGeometry {
  double center = 0.0;
  double rho = 0.0;
  double u = 0.0;
  double R = 0.0;
};

SegmentGeometry make_segment(double center, double rho, double u);
/// Segment over the SOS base: center L/2, rho = L ln L.
SegmentGeometry sos_segment(int L, double u);
/// psi_u(x) = (u - R) + sqrt(R^2 - (x - center)^2); throws outside-base.
double segment_height(const SegmentGeometry& g, double x);
/// 0 <= eta_i <= psi_u(i) for i = 1..L.
bool segment_contains(const SegmentGeometry& g, const SosPath& path);

using Vec3 = std::array<double, 3>;

/// Spherical cap of height u over the disk of radius rho centered at w0 on a
/// plane with unit normal n: {p : |p - c| <= R, (p - w0).n >= 0} with
/// c = w0 - (R - u) n.
struct CapGeometry {
  Vec3 normal{};
  Vec3 w0{};
  Vec3 sphere_center{};
  double rho = 0.0;
  double u = 0.0;
  double R = 0.0;
  double clearance = 0.0;  // distance from the region to the edge of the projected disk
};

CapGeometry make_cap(const SlopeVector& n, const Vec3& w0, double rho, double u);
/// Cap over a region: base disk of radius L ln L centered above the region's
/// centroid on the plane translated up by C ln L (L = region diameter).
CapGeometry surface_cap(const Region& region, const SlopeVector& n, double C, double u);
bool cap_membership(const CapGeometry& g, const Vec3& p);
/// Highest z with (x1, x2, z) in the cap, or nullopt when the line misses it.
std::optional<double> cap_height(const CapGeometry& g, double x1, double x2);

/// Log exponents of the schedule recursions. Defaults are the asymptotic
/// values; `scaled` profiles replace them for desk-scale runs.
struct ScheduleProfile {
  std::string name = "asymptotic";
  double step_log = 0.0;   // u-step factor (ln L)^step_log
  double time_log = 8.5;   // t-step factor (ln L)^time_log
  double stop_log = 1.25;  // stopping threshold factor (ln L)^stop_log
};

ScheduleProfile surface_profile(const std::string& name = "asymptotic");
ScheduleProfile sos_profile(const std::string& name = "asymptotic", double alpha1 = 17.0);

enum class ScheduleKind { surface, sos, generic };
std::string to_string(ScheduleKind k);

struct CapSchedule {
  ScheduleKind kind = ScheduleKind::surface;
  int L = 0;
  double rho = 0.0;
  double gamma = 0.0;
  ScheduleProfile profile;
  std::vector<double> u, R, t;

  std::size_t M() const noexcept { return u.empty() ? 0 : u.size() - 1; }
  double t_M() const noexcept { return t.empty() ? 0.0 : t.back(); }

  // bound check t_M <= K L^2 (ln L)^bound_log
  double bound_log = 0.0;
  double bound_K = 1.0;
  double bound_ratio = 0.0;  // t_M / (L^2 (ln L)^bound_log)
  bool bound_ok = false;
  bool half_steps_ok = true;  // u_{n+1} >= u_n / 2 throughout
};

inline constexpr double kSurfaceScheduleK = 1.0;

/// u_n = 2L - n for n = 0..M, M = ceil(2L - (ln L)^stop_log),
/// t_n = t_{n-1} + R_n (ln L)^time_log.
CapSchedule schedule_surface(int L, const ScheduleProfile& profile = surface_profile());

/// u_{n+1} = u_n - (rho^2/u_n)^{1/3} (ln L)^step_log,
/// t_{n+1} = t_n + (rho^2/u_n)^{4/3} (ln L)^time_log, stopped at the first n
/// with u_n <= sqrt(L) (ln L)^stop_log.
CapSchedule schedule_sos(int L, const ScheduleProfile& profile = sos_profile());

struct GenericExponents {
  double c1 = 0.0;  // u-step log exponent
  double c2 = 0.0;  // t-step log exponent
  double c3 = 1.0;  // stop at u <= L^gamma (ln L)^c3
};

/// Steps (rho^2/u)^{gamma/(2-gamma)} (ln L)^c1 and (rho^2/u)^{2/(2-gamma)}
/// (ln L)^c2; throws unsupported-exponent unless 0 <= gamma < 1.
CapSchedule generic_schedule(int L, double gamma, const GenericExponents& e = {});

struct SweepRow {
  int L = 0;
  std::size_t M = 0;
  double t_M = 0.0;
  double t_over_L2 = 0.0;
};

struct GenericSweep {
  std::vector<SweepRow> rows;
  double slope_t = 0.0;          // least-squares slope of ln(t_M / L^2) against ln L
  double polylog_exponent = 0.0; // slope of ln(t_M / L^2) against ln ln L
  double slope_M = 0.0;          // slope of ln M against ln L
};

GenericSweep generic_sweep(double gamma, const std::vector<int>& Ls, const GenericExponents& e = {});

struct MonitorRow {
  std::size_t n = 0;
  double t = 0.0;
  double u = 0.0;
  bool satisfied = false;        // state at t_n inside the cap
  bool later_satisfied = true;   // every later checkpoint inside the same cap
  double max_violation = 0.0;    // max over sites of height - psi (0 when inside)
};

struct MonitorReport {
  std::vector<MonitorRow> rows;
  bool all_satisfied = false;
  double final_deviation = 0.0;  // max_i (eta_i(t_M) - reference_i)
};

/// SOS monitor: the trajectory must hold a checkpoint at every t_n.
MonitorReport domination_monitor(const Trajectory& tr, const CapSchedule& s, const std::vector<double>& reference);
/// Surface monitor against caps over `region` (heights measured from the
/// horizontal plane, reference typically the planar profile).
MonitorReport domination_monitor(const Trajectory& tr, const CapSchedule& s, const std::vector<double>& reference,
                                 const Region& region, const SlopeVector& n, double C);

}  // namespace ifdyn
