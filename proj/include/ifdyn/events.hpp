#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ifdyn/rng.hpp"

namespace ifdyn {

/// One ring of a site clock. `u` drives the move: surfaces read it as a fair
/// coin (u < 1/2 is the up move), the SOS chain uses it as the shared uniform.
struct Event {
  double time = 0.0;
  std::size_t site = 0;  // 0-based site index
  double u = 0.0;

  bool up() const noexcept { return u < 0.5; }
};

/// Superposition of independent rate-1 site clocks, generated as one Poisson
/// process of rate `num_sites` with a uniform site mark. Coupled chains that
/// consume the same stream see identical events.
class EventStream {
 public:
  EventStream(std::uint64_t seed, std::uint64_t stream_id, std::size_t num_sites, double start_time = 0.0)
      : EventStream(CounterRng::stream(seed, stream_id), num_sites, start_time) {}

  EventStream(CounterRng rng, std::size_t num_sites, double start_time = 0.0)
      : rng_(rng), n_(num_sites), rate_(static_cast<double>(num_sites)) {
    pending_.time = start_time;
    advance();
  }

  const Event& peek() const noexcept { return pending_; }

  Event next() noexcept {
    Event e = pending_;
    advance();
    return e;
  }

  std::size_t num_sites() const noexcept { return n_; }

 private:
  void advance() noexcept {
    pending_.time += rng_.exponential(rate_);
    pending_.site = static_cast<std::size_t>(rng_.below(n_));
    pending_.u = rng_.uniform();
  }

  CounterRng rng_;
  std::size_t n_;
  double rate_;
  Event pending_;
};

/// States recorded at requested times. A checkpoint at time c holds the
/// state in force at c, i.e. before the first event with time >= c.
struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<int>> states;
  std::uint64_t events = 0;
  double end_time = 0.0;
};

}  // namespace ifdyn
