#include "ifdyn/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>
#include <string>

#include "ifdyn/error.hpp"

namespace ifdyn {

double Point::norm() const { return std::hypot(static_cast<double>(x1), static_cast<double>(x2)); }

SlopeVector::SlopeVector(double n1, double n2, double n3) : n_{n1, n2, n3} {
  const double len = std::sqrt(n1 * n1 + n2 * n2 + n3 * n3);
  if (!(n1 > 0.0 && n2 > 0.0 && n3 > 0.0)) throw Error(Errc::invalid_slope, "slope components must be positive");
  if (std::abs(len - 1.0) > 1e-12) throw Error(Errc::invalid_slope, "slope vector is not unit length");
}

SlopeVector SlopeVector::normalized(double a, double b, double c) {
  const double len = std::sqrt(a * a + b * b + c * c);
  if (!(len > 0.0) || !std::isfinite(len)) throw Error(Errc::invalid_slope, "zero or non-finite slope");
  return SlopeVector(a / len, b / len, c / len);
}

int planar_reference(const SlopeVector& n, Point x) {
  const double v = -(x.x1 * n.n1() + x.x2 * n.n2()) / n.n3();
  const double tol = 1e-9 * std::max(1.0, std::abs(v));
  return static_cast<int>(std::floor(v + tol));
}

// ---------------------------------------------------------------------------

Region Region::rectangle(int n1, int n2) {
  if (n1 < 1 || n2 < 1) throw Error(Errc::invalid_parameters, "rectangle sides must be positive");
  std::vector<Point> sites;
  sites.reserve(static_cast<std::size_t>(n1) * n2);
  const int o1 = n1 / 2, o2 = n2 / 2;
  for (int a = 0; a < n1; ++a)
    for (int b = 0; b < n2; ++b) sites.push_back({a - o1, b - o2});
  return Region(std::move(sites));
}

Region Region::from_sites(std::vector<Point> sites) { return Region(std::move(sites)); }

Region::Region(std::vector<Point> sites) : sites_(std::move(sites)) {
  std::sort(sites_.begin(), sites_.end());
  sites_.erase(std::unique(sites_.begin(), sites_.end()), sites_.end());
  if (sites_.empty()) throw Error(Errc::invalid_parameters, "region is empty");
  if (!std::binary_search(sites_.begin(), sites_.end(), Point{0, 0}))
    throw Error(Errc::invalid_parameters, "region must contain the origin");

  int max1 = sites_.front().x1, max2 = sites_.front().x2;
  min1_ = max1;
  min2_ = max2;
  for (const auto& p : sites_) {
    min1_ = std::min(min1_, p.x1);
    min2_ = std::min(min2_, p.x2);
    max1 = std::max(max1, p.x1);
    max2 = std::max(max2, p.x2);
  }
  // one cell of padding on each side holds dU
  min1_ -= 1;
  min2_ -= 1;
  width_ = max1 - min1_ + 2;
  height_ = max2 - min2_ + 2;
  cells_.assign(static_cast<std::size_t>(width_ * height_), Cell::outside);
  index_.assign(cells_.size(), -1);

  site_grid_.resize(sites_.size());
  for (std::size_t s = 0; s < sites_.size(); ++s) {
    const auto g = static_cast<std::size_t>(grid_index(sites_[s]));
    cells_[g] = Cell::interior;
    index_[g] = static_cast<long>(s);
    site_grid_[s] = g;
  }

  // connectivity by BFS over nearest neighbors
  std::vector<char> seen(sites_.size(), 0);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = 1;
  std::size_t reached = 1;
  const long steps[4] = {-1, 1, -width_, width_};
  while (!q.empty()) {
    const std::size_t s = q.front();
    q.pop();
    for (long d : steps) {
      const auto g = static_cast<std::size_t>(static_cast<long>(site_grid_[s]) + d);
      if (cells_[g] == Cell::interior && !seen[static_cast<std::size_t>(index_[g])]) {
        seen[static_cast<std::size_t>(index_[g])] = 1;
        ++reached;
        q.push(static_cast<std::size_t>(index_[g]));
      }
    }
  }
  if (reached != sites_.size()) throw Error(Errc::invalid_parameters, "region is not connected");

  std::set<Point> bd;
  for (const auto& p : sites_)
    for (Point q2 : {Point{p.x1 - 1, p.x2}, Point{p.x1 + 1, p.x2}, Point{p.x1, p.x2 - 1}, Point{p.x1, p.x2 + 1}})
      if (cells_[static_cast<std::size_t>(grid_index(q2))] != Cell::interior) bd.insert(q2);
  boundary_.assign(bd.begin(), bd.end());
  boundary_grid_.resize(boundary_.size());
  for (std::size_t b = 0; b < boundary_.size(); ++b) {
    const auto g = static_cast<std::size_t>(grid_index(boundary_[b]));
    cells_[g] = Cell::boundary;
    index_[g] = static_cast<long>(b);
    boundary_grid_[b] = g;
  }

  double d2 = 0.0;
  for (std::size_t a = 0; a < sites_.size(); ++a)
    for (std::size_t b = a + 1; b < sites_.size(); ++b) {
      const double dx = sites_[a].x1 - sites_[b].x1, dy = sites_[a].x2 - sites_[b].x2;
      d2 = std::max(d2, dx * dx + dy * dy);
    }
  diameter_ = std::sqrt(d2);
}

long Region::grid_index(Point p) const {
  const long a = p.x1 - min1_, b = p.x2 - min2_;
  if (a < 0 || b < 0 || a >= width_ || b >= height_) return -1;
  return b * width_ + a;
}

Point Region::grid_point(std::size_t g) const {
  const long a = static_cast<long>(g) % width_, b = static_cast<long>(g) / width_;
  return {static_cast<int>(a + min1_), static_cast<int>(b + min2_)};
}

bool Region::contains(Point p) const { return index_of(p) >= 0; }

long Region::index_of(Point p) const {
  const long g = grid_index(p);
  return (g >= 0 && cells_[static_cast<std::size_t>(g)] == Cell::interior) ? index_[static_cast<std::size_t>(g)] : -1;
}

long Region::boundary_index_of(Point p) const {
  const long g = grid_index(p);
  return (g >= 0 && cells_[static_cast<std::size_t>(g)] == Cell::boundary) ? index_[static_cast<std::size_t>(g)] : -1;
}

std::vector<int> planar_boundary(const Region& region, const SlopeVector& n, int offset) {
  std::vector<int> out;
  out.reserve(region.boundary().size());
  for (const auto& p : region.boundary()) out.push_back(planar_reference(n, p) + offset);
  return out;
}

// ---------------------------------------------------------------------------

HeightField::HeightField(RegionPtr region, std::span<const int> boundary, std::span<const int> interior)
    : region_(std::move(region)) {
  if (!region_) throw Error(Errc::invalid_parameters, "null region");
  if (boundary.size() != region_->boundary().size())
    throw Error(Errc::incomplete_boundary, "expected " + std::to_string(region_->boundary().size()) +
                                               " boundary heights, got " + std::to_string(boundary.size()));
  if (interior.size() != region_->size()) throw Error(Errc::incompatible_configurations, "interior size mismatch");
  cells_.assign(region_->grid_size(), 0);
  for (std::size_t b = 0; b < boundary.size(); ++b) cells_[region_->boundary_cell(b)] = boundary[b];
  for (std::size_t s = 0; s < interior.size(); ++s) cells_[region_->site_cell(s)] = interior[s];
}

int HeightField::at(Point p) const {
  const long g = region_->grid_index(p);
  if (g < 0 || region_->cell(static_cast<std::size_t>(g)) == Region::Cell::outside)
    throw Error(Errc::invalid_parameters, "point outside region and boundary");
  return cells_[static_cast<std::size_t>(g)];
}

std::vector<int> HeightField::interior() const {
  std::vector<int> out(size());
  for (std::size_t s = 0; s < out.size(); ++s) out[s] = (*this)[s];
  return out;
}

std::vector<int> HeightField::boundary_values() const {
  std::vector<int> out(region_->boundary().size());
  for (std::size_t b = 0; b < out.size(); ++b) out[b] = cells_[region_->boundary_cell(b)];
  return out;
}

void HeightField::set_floor(std::vector<int> floor) {
  if (!floor.empty() && floor.size() != size()) throw Error(Errc::incompatible_configurations, "floor size mismatch");
  floor_ = std::move(floor);
}

void HeightField::set_ceiling(std::vector<int> ceiling) {
  if (!ceiling.empty() && ceiling.size() != size())
    throw Error(Errc::incompatible_configurations, "ceiling size mismatch");
  ceiling_ = std::move(ceiling);
}

bool HeightField::is_valid() const {
  const Region& r = *region_;
  for (std::size_t s = 0; s < size(); ++s) {
    const int v = (*this)[s];
    for (std::size_t g : {r.west(s), r.south(s)})
      if (r.cell(g) != Region::Cell::outside && cells_[g] < v) return false;
    for (std::size_t g : {r.east(s), r.north(s)})
      if (r.cell(g) != Region::Cell::outside && cells_[g] > v) return false;
    if (!floor_.empty() && v < floor_[s]) return false;
    if (!ceiling_.empty() && v > ceiling_[s]) return false;
  }
  return true;
}

bool HeightField::same_interior(const HeightField& other) const {
  for (std::size_t s = 0; s < size(); ++s)
    if ((*this)[s] != other[s]) return false;
  return true;
}

// ---------------------------------------------------------------------------

GoodPlanarReport check_good_planar(const std::map<Point, int>& eta, const SlopeVector& n, double C,
                                   const Region& region, int halo) {
  if (!(C > 0.0)) throw Error(Errc::invalid_parameters, "C must be positive");
  if (halo < 0) throw Error(Errc::invalid_parameters, "halo must be nonnegative");

  std::vector<Point> tested = region.boundary();
  if (halo > 0) {
    int lo1 = region.sites().front().x1, hi1 = lo1, lo2 = region.sites().front().x2, hi2 = lo2;
    for (const auto& p : region.sites()) {
      lo1 = std::min(lo1, p.x1);
      hi1 = std::max(hi1, p.x1);
      lo2 = std::min(lo2, p.x2);
      hi2 = std::max(hi2, p.x2);
    }
    const int pad = halo + 1;
    const double r2 = static_cast<double>(pad) * pad;
    tested.clear();
    for (int a = lo1 - pad; a <= hi1 + pad; ++a)
      for (int b = lo2 - pad; b <= hi2 + pad; ++b) {
        const Point p{a, b};
        if (region.contains(p)) continue;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& s : region.sites()) {
          const double dx = a - s.x1, dy = b - s.x2;
          best = std::min(best, dx * dx + dy * dy);
        }
        if (best <= r2 + 1e-12) tested.push_back(p);
      }
  }

  GoodPlanarReport rep;
  for (const auto& p : tested) {
    const auto it = eta.find(p);
    if (it == eta.end())
      throw Error(Errc::incomplete_boundary,
                  "missing height at (" + std::to_string(p.x1) + "," + std::to_string(p.x2) + ")");
    const double dev = std::abs(static_cast<double>(it->second - planar_reference(n, p)));
    const double bound = C * std::log(p.norm() + 1.0);
    double ratio;
    if (bound > 0.0)
      ratio = dev / bound;
    else
      ratio = dev > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    if (dev > bound * (1.0 + 1e-12)) rep.ok = false;
    if (rep.tested == 0 || ratio > rep.worst_ratio) {
      rep.worst_ratio = ratio;
      rep.worst_site = p;
    }
    ++rep.tested;
  }
  return rep;
}

// ---------------------------------------------------------------------------

SosGeometry SosGeometry::bounded(int L, int h, std::optional<int> M) {
  if (L < 1) throw Error(Errc::invalid_parameters, "L must be at least 1");
  if (h < 0 || h > L) throw Error(Errc::invalid_parameters, "h must lie in [0, L]");
  const int m = M.value_or(L);
  if (m < 0) throw Error(Errc::invalid_parameters, "window half-width must be nonnegative");
  return {L, h, -m, m + h};
}

SosGeometry SosGeometry::window(int L, int h, int lo, int hi) {
  if (L < 1) throw Error(Errc::invalid_parameters, "L must be at least 1");
  if (lo > hi) throw Error(Errc::invalid_range, "empty height window");
  return {L, h, lo, hi};
}

SosPath::SosPath(SosGeometry geometry, std::vector<int> heights) : geom_(geometry) {
  if (heights.size() != static_cast<std::size_t>(geom_.L))
    throw Error(Errc::incompatible_configurations, "expected " + std::to_string(geom_.L) + " heights");
  eta_.resize(static_cast<std::size_t>(geom_.L) + 2);
  eta_.front() = 0;
  eta_.back() = geom_.h;
  std::copy(heights.begin(), heights.end(), eta_.begin() + 1);
  refresh_bounds();
  for (int i = 1; i <= geom_.L; ++i)
    if (eta_[i] < geom_.lo || eta_[i] > geom_.hi)
      throw Error(Errc::invalid_parameters, "height " + std::to_string(eta_[i]) + " outside the window");
}

SosPath SosPath::constant(SosGeometry geometry, int value) {
  return SosPath(geometry, std::vector<int>(static_cast<std::size_t>(geometry.L), value));
}

SosPath SosPath::maximal(SosGeometry geometry) { return constant(geometry, geometry.hi); }
SosPath SosPath::minimal(SosGeometry geometry) { return constant(geometry, geometry.lo); }

void SosPath::fill_upper() {
  for (int i = 1; i <= geom_.L; ++i) eta_[i] = upper_[i];
}

void SosPath::fill_lower() {
  for (int i = 1; i <= geom_.L; ++i) eta_[i] = lower_[i];
}

void SosPath::set_floor(std::vector<int> floor) {
  if (!floor.empty() && floor.size() != static_cast<std::size_t>(geom_.L))
    throw Error(Errc::incompatible_configurations, "floor size mismatch");
  floor_ = std::move(floor);
  refresh_bounds();
}

void SosPath::set_ceiling(std::vector<int> ceiling) {
  if (!ceiling.empty() && ceiling.size() != static_cast<std::size_t>(geom_.L))
    throw Error(Errc::incompatible_configurations, "ceiling size mismatch");
  ceiling_ = std::move(ceiling);
  refresh_bounds();
}

void SosPath::refresh_bounds() {
  const std::size_t n = static_cast<std::size_t>(geom_.L) + 2;
  lower_.assign(n, geom_.lo);
  upper_.assign(n, geom_.hi);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!floor_.empty()) lower_[i] = std::max(lower_[i], floor_[i - 1]);
    if (!ceiling_.empty()) upper_[i] = std::min(upper_[i], ceiling_[i - 1]);
  }
}

bool SosPath::is_valid() const {
  for (int i = 1; i <= geom_.L; ++i)
    if (eta_[i] < lower_[i] || eta_[i] > upper_[i]) return false;
  return eta_.front() == 0 && eta_.back() == geom_.h;
}

// ---------------------------------------------------------------------------

WallProfile wall_profile(int L, int h) {
  if (L < 1) throw Error(Errc::invalid_parameters, "L must be at least 1");
  if (h < 0 || h > L) throw Error(Errc::invalid_parameters, "h must lie in [0, L]");
  WallProfile w;
  w.values.resize(static_cast<std::size_t>(L));
  for (int i = 1; i <= L; ++i)
    w.values[i - 1] = static_cast<int>((static_cast<long long>(i) * h) / (L + 1));
  return w;
}

bool partial_order_leq(const HeightField& a, const HeightField& b) {
  if (a.region_ptr() != b.region_ptr() && !(a.region() == b.region()))
    throw Error(Errc::incompatible_configurations, "height fields live on different regions");
  for (std::size_t s = 0; s < a.size(); ++s)
    if (a[s] > b[s]) return false;
  return true;
}

bool partial_order_leq(const SosPath& a, const SosPath& b) {
  if (a.L() != b.L()) throw Error(Errc::incompatible_configurations, "paths have different lengths");
  for (int i = 1; i <= a.L(); ++i)
    if (a[i] > b[i]) return false;
  return true;
}

double sos_energy(const SosPath& eta) {
  long e = 0;
  for (int i = 0; i <= eta.L(); ++i) e += std::abs(eta[i + 1] - eta[i]);
  return static_cast<double>(e);
}

long sos_energy(std::span<const int> interior, int h) {
  long e = 0;
  int prev = 0;
  for (int v : interior) {
    e += std::abs(v - prev);
    prev = v;
  }
  return e + std::abs(h - prev);
}

}  // namespace ifdyn
