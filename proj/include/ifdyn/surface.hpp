#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ifdyn/events.hpp"
#include "ifdyn/lattice.hpp"

namespace ifdyn {

/// Value taken by site `site` under the up move: min of phi+1, the west and
/// south neighbors and the ceiling.
int up_target(const HeightField& phi, std::size_t site) noexcept;
/// Mirror: max of phi-1, the east and north neighbors and the floor.
int down_target(const HeightField& phi, std::size_t site) noexcept;

/// In-place move; returns true when the height changed.
bool apply_surface_move(HeightField& phi, std::size_t site, bool up) noexcept;

/// Copying forms. Throw not-updatable unless x is an interior site.
HeightField up_move(const HeightField& phi, Point x);
HeightField down_move(const HeightField& phi, Point x);

/// Maximal and minimal elements of the space of monotone surfaces with the
/// boundary (and walls) of `like`. Throws empty-support when the space is
/// empty.
HeightField maximal_surface(const HeightField& like);
HeightField minimal_surface(const HeightField& like);

/// Surface on `region` with boundary equal to the discrete plane of slope n
/// (shifted by `offset`), interior initialized to the plane as well.
HeightField planar_surface(RegionPtr region, const SlopeVector& n, int offset = 0);

class SurfaceChain {
 public:
  explicit SurfaceChain(HeightField state, double time = 0.0) : state_(std::move(state)), time_(time) {}

  const HeightField& state() const noexcept { return state_; }
  HeightField& state() noexcept { return state_; }
  double time() const noexcept { return time_; }
  std::uint64_t events() const noexcept { return events_; }

  void step(const Event& e) noexcept {
    apply_surface_move(state_, e.site, e.up());
    time_ = e.time;
    ++events_;
  }

  /// Consumes events up to `horizon`; `checkpoints` must be sorted.
  Trajectory run(double horizon, EventStream& events, std::span<const double> checkpoints = {});

 private:
  HeightField state_;
  double time_;
  std::uint64_t events_ = 0;
};

}  // namespace ifdyn
