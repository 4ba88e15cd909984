#include "ifdyn/surface.hpp"

#include <algorithm>
#include <numeric>

#include "ifdyn/error.hpp"

namespace ifdyn {

int up_target(const HeightField& phi, std::size_t site) noexcept {
  const Region& r = phi.region();
  int v = std::min({phi[site] + 1, phi.cell(r.west(site)), phi.cell(r.south(site))});
  if (phi.has_ceiling()) v = std::min(v, phi.ceiling()[site]);
  return std::max(v, phi[site]);
}

int down_target(const HeightField& phi, std::size_t site) noexcept {
  const Region& r = phi.region();
  int v = std::max({phi[site] - 1, phi.cell(r.east(site)), phi.cell(r.north(site))});
  if (phi.has_floor()) v = std::max(v, phi.floor()[site]);
  return std::min(v, phi[site]);
}

bool apply_surface_move(HeightField& phi, std::size_t site, bool up) noexcept {
  const int v = up ? up_target(phi, site) : down_target(phi, site);
  if (v == phi[site]) return false;
  phi.set(site, v);
  return true;
}

namespace {

std::size_t require_interior(const HeightField& phi, Point x) {
  const long s = phi.region().index_of(x);
  if (s < 0) throw Error(Errc::not_updatable, "site is not interior to the region");
  return static_cast<std::size_t>(s);
}

std::vector<std::size_t> diagonal_order(const Region& r) {
  std::vector<std::size_t> order(r.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return r.sites()[a].x1 + r.sites()[a].x2 < r.sites()[b].x1 + r.sites()[b].x2;
  });
  return order;
}

}  // namespace

HeightField up_move(const HeightField& phi, Point x) {
  HeightField out = phi;
  apply_surface_move(out, require_interior(phi, x), true);
  return out;
}

HeightField down_move(const HeightField& phi, Point x) {
  HeightField out = phi;
  apply_surface_move(out, require_interior(phi, x), false);
  return out;
}

HeightField maximal_surface(const HeightField& like) {
  HeightField out = like;
  const Region& r = like.region();
  for (std::size_t s : diagonal_order(r)) {
    int v = std::min(out.cell(r.west(s)), out.cell(r.south(s)));
    if (out.has_ceiling()) v = std::min(v, out.ceiling()[s]);
    out.set(s, v);
  }
  if (!out.is_valid()) throw Error(Errc::empty_support, "no monotone surface fits the boundary and walls");
  return out;
}

HeightField minimal_surface(const HeightField& like) {
  HeightField out = like;
  const Region& r = like.region();
  auto order = diagonal_order(r);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const std::size_t s = *it;
    int v = std::max(out.cell(r.east(s)), out.cell(r.north(s)));
    if (out.has_floor()) v = std::max(v, out.floor()[s]);
    out.set(s, v);
  }
  if (!out.is_valid()) throw Error(Errc::empty_support, "no monotone surface fits the boundary and walls");
  return out;
}

HeightField planar_surface(RegionPtr region, const SlopeVector& n, int offset) {
  const auto bd = planar_boundary(*region, n, offset);
  std::vector<int> in;
  in.reserve(region->size());
  for (const auto& p : region->sites()) in.push_back(planar_reference(n, p) + offset);
  return HeightField(std::move(region), bd, in);
}

Trajectory SurfaceChain::run(double horizon, EventStream& events, std::span<const double> checkpoints) {
  Trajectory tr;
  std::size_t c = 0;
  while (c < checkpoints.size() && checkpoints[c] < time_) ++c;
  while (events.peek().time <= horizon) {
    const double t = events.peek().time;
    for (; c < checkpoints.size() && checkpoints[c] <= t; ++c) {
      tr.times.push_back(checkpoints[c]);
      tr.states.push_back(state_.interior());
    }
    step(events.next());
    ++tr.events;
  }
  for (; c < checkpoints.size() && checkpoints[c] <= horizon; ++c) {
    tr.times.push_back(checkpoints[c]);
    tr.states.push_back(state_.interior());
  }
  time_ = std::max(time_, horizon);
  tr.end_time = time_;
  return tr;
}

}  // namespace ifdyn
