#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ifdyn/error.hpp"
#include "ifdyn/events.hpp"
#include "ifdyn/lattice.hpp"
#include "ifdyn/sos.hpp"
#include "ifdyn/surface.hpp"

namespace ifdyn {

enum class Model { sos, surface };

const char* to_string(Model m) noexcept;
Model parse_model(const std::string& name);

// Event application shared by all coupled drivers.
inline bool apply_event(SosPath& s, const Event& e) noexcept { return glauber_step(s, e.site + 1, e.u); }
inline bool apply_event(HeightField& s, const Event& e) noexcept { return apply_surface_move(s, e.site, e.up()); }
inline std::size_t num_sites(const SosPath& s) noexcept { return static_cast<std::size_t>(s.L()); }
inline std::size_t num_sites(const HeightField& s) noexcept { return s.size(); }
inline int site_value(const SosPath& s, std::size_t site) noexcept { return s[site + 1]; }
inline int site_value(const HeightField& s, std::size_t site) noexcept { return s[site]; }

/// Chains ordered from bottom to top, driven by one event stream.
template <typename State>
class CoupledEnsemble {
 public:
  explicit CoupledEnsemble(std::vector<State> chains, bool check_order = true, double time = 0.0)
      : chains_(std::move(chains)), check_(check_order), time_(time) {
    if (chains_.empty()) throw Error(Errc::invalid_parameters, "empty ensemble");
    verify();
  }

  void step(const Event& e) {
    for (auto& c : chains_) apply_event(c, e);
    time_ = e.time;
    ++events_;
    if (check_) {
      for (std::size_t k = 1; k < chains_.size(); ++k)
        if (site_value(chains_[k - 1], e.site) > site_value(chains_[k], e.site))
          throw Error(Errc::coupling_violation, "order broken at site " + std::to_string(e.site) + ", t = " + std::to_string(e.time));
      certified_ = time_;
    }
  }

  void run(double horizon, EventStream& events) {
    while (events.peek().time <= horizon) step(events.next());
    time_ = std::max(time_, horizon);
  }

  /// Full pairwise order check; throws coupling-violation.
  void verify() {
    for (std::size_t k = 1; k < chains_.size(); ++k)
      if (!partial_order_leq(chains_[k - 1], chains_[k]))
        throw Error(Errc::coupling_violation, "ensemble is not ordered");
    certified_ = time_;
  }

  const std::vector<State>& chains() const noexcept { return chains_; }
  double time() const noexcept { return time_; }
  double certified_time() const noexcept { return certified_; }
  std::uint64_t events() const noexcept { return events_; }

 private:
  std::vector<State> chains_;
  bool check_;
  double time_;
  double certified_ = 0.0;
  std::uint64_t events_ = 0;
};

struct CoalescenceRecord {
  Model model = Model::sos;
  int L = 0;
  int h = 0;
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;
  double time = 0.0;  // coalescence time, or the horizon when censored
  std::uint64_t events = 0;
  bool censored = false;
};

/// Runs the top and bottom chains under the shared stream until they agree.
/// Equality is tracked by an exact count of differing sites, so the recorded
/// time is the event time at which the last difference vanished.
template <typename State>
CoalescenceRecord coalesce_pair(State top, State bottom, EventStream& events, double horizon) {
  const std::size_t n = num_sites(top);
  std::size_t diff = 0;
  for (std::size_t s = 0; s < n; ++s) diff += site_value(top, s) != site_value(bottom, s);
  CoalescenceRecord rec;
  if (diff == 0) return rec;
  while (events.peek().time <= horizon) {
    const Event e = events.next();
    ++rec.events;
    const bool was = site_value(top, e.site) != site_value(bottom, e.site);
    apply_event(top, e);
    apply_event(bottom, e);
    const bool now = site_value(top, e.site) != site_value(bottom, e.site);
    diff = diff - was + now;
    if (diff == 0) {
      rec.time = e.time;
      return rec;
    }
  }
  rec.time = horizon;
  rec.censored = true;
  return rec;
}

struct SosModel {
  int L = 8;
  int h = 0;
  std::optional<int> M;
  bool wall = false;  // floor at the wall profile

  SosPath top() const;
  SosPath bottom() const;
};

struct SurfaceModel {
  int N = 8;  // N x N square
  SlopeVector n = SlopeVector::normalized(1, 1, 1);
  int offset = 0;

  HeightField top() const;
  HeightField bottom() const;
  HeightField plane() const;
};

CoalescenceRecord coalescence_time(const SosModel& m, std::uint64_t seed, std::uint64_t replica, double horizon);
CoalescenceRecord coalescence_time(const SurfaceModel& m, std::uint64_t seed, std::uint64_t replica, double horizon);

struct CftpResult {
  std::vector<int> state;  // interior heights
  double T = 0.0;          // start time -T that coalesced
  int doublings = 0;
};

/// Monotone coupling from the past with doubling start times. Randomness for
/// the window [-T0 2^j, -T0 2^{j-1}] (block j >= 1) and [-T0, 0] (block 0)
/// is keyed by (seed, sample, j), so every restart replays the same events.
template <typename State>
CftpResult cftp(const State& top, const State& bottom, std::uint64_t seed, std::uint64_t sample, double T0 = 1.0,
                int max_doublings = 40) {
  if (!(T0 > 0.0)) throw Error(Errc::invalid_parameters, "T0 must be positive");
  const std::size_t n = num_sites(top);
  for (int J = 0; J <= max_doublings; ++J) {
    State hi = top, lo = bottom;
    for (int j = J; j >= 0; --j) {
      const double start = -T0 * std::ldexp(1.0, j);
      const double end = j == 0 ? 0.0 : -T0 * std::ldexp(1.0, j - 1);
      EventStream ev(CounterRng::stream(seed, sample, static_cast<std::uint64_t>(j)), n, start);
      while (ev.peek().time <= end) {
        const Event e = ev.next();
        apply_event(hi, e);
        apply_event(lo, e);
      }
    }
    bool same = true;
    for (std::size_t s = 0; s < n && same; ++s) same = site_value(hi, s) == site_value(lo, s);
    if (same) {
      CftpResult r;
      r.state.resize(n);
      for (std::size_t s = 0; s < n; ++s) r.state[s] = site_value(hi, s);
      r.T = T0 * std::ldexp(1.0, J);
      r.doublings = J;
      return r;
    }
  }
  throw Error(Errc::iteration_cap, "no coalescence after " + std::to_string(max_doublings) + " doublings");
}

CftpResult cftp_sample(const SosModel& m, std::uint64_t seed, std::uint64_t sample, double T0 = 1.0, int max_doublings = 40);
CftpResult cftp_sample(const SurfaceModel& m, std::uint64_t seed, std::uint64_t sample, double T0 = 1.0,
                       int max_doublings = 40);

/// Kaplan-Meier survival of the coalescence time: pairs (t, S(t)) at each
/// observed coalescence, starting from (0, 1).
std::vector<std::pair<double, double>> survival_curve(const std::vector<CoalescenceRecord>& records);

struct TmixEstimate {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t records = 0;
  std::size_t censored = 0;
};

/// First t with survival <= 1/(2e), plus a percentile bootstrap band.
TmixEstimate tmix_upper_from_coalescence(const std::vector<CoalescenceRecord>& records, int bootstrap = 200,
                                         std::uint64_t seed = 1, double level = 0.95);

}  // namespace ifdyn
