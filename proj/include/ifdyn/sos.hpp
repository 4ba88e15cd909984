#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ifdyn/events.hpp"
#include "ifdyn/lattice.hpp"
#include "ifdyn/rng.hpp"

namespace ifdyn {

/// e^{-2}/(1+e^{-2}), 1/2 and 1/(1+e^{-2}): the only values a single-site
/// jump probability can take.
enum class RateCase : unsigned char { suppressed, neutral, favored };

double rate_value(RateCase c) noexcept;

struct SosRates {
  RateCase down_case;
  RateCase up_case;
  double down;
  double up;
};

/// Jump probabilities at site i given its neighbors; a = min and b = max of
/// the neighbor heights.
SosRates glauber_rates(int left, int eta, int right) noexcept;
SosRates glauber_rates(const SosPath& eta, std::size_t i);

/// One clock ring at site i (1-based) with shared uniform u. Up on
/// u < p+, down on u > 1 - p-. Moves leaving the window or crossing a wall
/// are self-loops. Returns true when the height changed.
bool glauber_step(SosPath& eta, std::size_t i, double u) noexcept;

/// u-quantile of P(k) ~ exp(-|k-left| - |k-right|) on [lo, hi], i.e. the
/// smallest k with CDF(k) > u.
int site_conditional_sample(int left, int right, int lo, int hi, double u);

enum class Parity : unsigned char { even = 0, odd = 1 };

/// Resamples every site of the given parity from its exact conditional law.
/// `u` is indexed by site - 1 (only entries of the given parity are read).
void column_sweep(SosPath& eta, Parity parity, std::span<const double> u);
void column_sweep(SosPath& eta, Parity parity, CounterRng& rng);

/// Alternating freeze pattern: in each epoch [2kT, 2(k+1)T) the odd sites
/// are frozen during the first half and the even sites during the second.
/// Nothing is frozen after `horizon`.
struct CensorSchedule {
  double T = 1.0;
  double horizon = 0.0;

  CensorSchedule(double half_epoch, double total);

  bool frozen(std::size_t site, double t) const noexcept;
  /// Parity class frozen at time t.
  Parity frozen_parity(double t) const noexcept;
};

class SosChain {
 public:
  explicit SosChain(SosPath state, double time = 0.0) : state_(std::move(state)), time_(time) {}

  const SosPath& state() const noexcept { return state_; }
  SosPath& state() noexcept { return state_; }
  double time() const noexcept { return time_; }
  std::uint64_t events() const noexcept { return events_; }

  /// Event sites are 0-based; SOS sites are 1-based.
  void step(const Event& e) noexcept {
    glauber_step(state_, e.site + 1, e.u);
    time_ = e.time;
    ++events_;
  }

  Trajectory run(double horizon, EventStream& events, std::span<const double> checkpoints = {});
  /// Same as run, except events at frozen sites are self-loops.
  Trajectory censored_run(const CensorSchedule& schedule, double horizon, EventStream& events,
                          std::span<const double> checkpoints = {});

 private:
  template <typename Filter>
  Trajectory run_filtered(double horizon, EventStream& events, std::span<const double> checkpoints, Filter keep);

  SosPath state_;
  double time_;
  std::uint64_t events_ = 0;
};

/// Exact equilibrium sampler for the SOS measure on a window with optional
/// walls, by a transfer recursion kept in the log domain.
///
/// g_i(k) is the log of the summed weight of sites i+1..L+1 given eta_i = k.
/// Prefix and suffix log-sum-exp tables of k' + g(k') and -k' + g(k') make
/// each recursion step O(width) and each sampling step O(log width). All
/// quantities are sums of positive terms, so the relative error of every
/// probability is bounded by a few ulps times L * width.
class SosExactSampler {
 public:
  /// Uses the window and walls of `like`.
  explicit SosExactSampler(const SosPath& like);

  SosPath sample(CounterRng& rng) const;
  void sample_into(SosPath& out, CounterRng& rng) const;

  double log_partition() const noexcept { return log_z_; }
  double log_prob(std::span<const int> interior) const;

  /// Marginal law of eta_1 (index 0 is height lower(1)).
  std::vector<double> first_site_marginal() const;

 private:
  struct Site {
    int lo = 0, hi = 0;
    std::vector<double> g;   // g(k)
    std::vector<double> lp;  // log sum_{k' <= k} exp(k' + g(k'))
    std::vector<double> ls;  // log sum_{k' >= k} exp(-k' + g(k'))
  };

  double log_left(const Site& s, int k) const noexcept;
  double log_right(const Site& s, int k) const noexcept;
  int draw_next(const Site& s, int k, CounterRng& rng) const;

  SosPath proto_;
  std::vector<Site> sites_;  // sites_[i-1]
  double log_z_ = 0.0;
};

SosPath exact_sample(const SosPath& like, CounterRng& rng);

}  // namespace ifdyn
