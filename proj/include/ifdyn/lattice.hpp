#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace ifdyn {

struct Point {
  int x1 = 0;
  int x2 = 0;

  friend auto operator<=>(const Point&, const Point&) = default;
  double norm() const;
};

/// Unit normal n = (n1, n2, n3) with all components strictly positive.
class SlopeVector {
 public:
  SlopeVector(double n1, double n2, double n3);

  /// Normalizes (a, b, c) before validating positivity.
  static SlopeVector normalized(double a, double b, double c);

  double n1() const noexcept { return n_[0]; }
  double n2() const noexcept { return n_[1]; }
  double n3() const noexcept { return n_[2]; }

 private:
  double n_[3];
};

/// Height of the discrete plane with normal `n` above `x`:
/// max{z : x1 n1 + x2 n2 + z n3 <= 0}. Points within 1e-9 (relative) of the
/// plane count as on it, so rational slopes give exact integer planes.
int planar_reference(const SlopeVector& n, Point x);

/// Finite connected set of lattice sites containing the origin, stored as a
/// site list plus a padded bounding-box grid. The grid covers the sites and
/// their outer boundary dU, so every neighbor of an interior site has a grid
/// cell.
class Region {
 public:
  enum class Cell : unsigned char { outside, interior, boundary };

  /// Rectangle of n1 x n2 sites containing the origin, x in
  /// [-(n1/2), n1-1-n1/2] x [-(n2/2), n2-1-n2/2].
  static Region rectangle(int n1, int n2);
  static Region from_sites(std::vector<Point> sites);

  std::size_t size() const noexcept { return sites_.size(); }
  const std::vector<Point>& sites() const noexcept { return sites_; }
  const std::vector<Point>& boundary() const noexcept { return boundary_; }
  double diameter() const noexcept { return diameter_; }

  bool contains(Point p) const;
  /// Site index of p, or -1 when p is not interior.
  long index_of(Point p) const;
  /// Boundary index of p, or -1 when p is not in dU.
  long boundary_index_of(Point p) const;

  // Grid access used by the dynamics.
  std::size_t grid_size() const noexcept { return cells_.size(); }
  long grid_index(Point p) const;
  Point grid_point(std::size_t g) const;
  Cell cell(std::size_t g) const noexcept { return cells_[g]; }
  std::size_t site_cell(std::size_t site) const noexcept { return site_grid_[site]; }
  std::size_t boundary_cell(std::size_t b) const noexcept { return boundary_grid_[b]; }
  long stride() const noexcept { return width_; }

  // Neighbor cells of interior site `site`: west = (x1-1, x2), south = (x1, x2-1),
  // east = (x1+1, x2), north = (x1, x2+1).
  std::size_t west(std::size_t site) const noexcept { return site_grid_[site] - 1; }
  std::size_t east(std::size_t site) const noexcept { return site_grid_[site] + 1; }
  std::size_t south(std::size_t site) const noexcept { return site_grid_[site] - width_; }
  std::size_t north(std::size_t site) const noexcept { return site_grid_[site] + width_; }

  friend bool operator==(const Region& a, const Region& b) { return a.sites_ == b.sites_; }

 private:
  explicit Region(std::vector<Point> sites);

  std::vector<Point> sites_;
  std::vector<Point> boundary_;
  double diameter_ = 0.0;
  int min1_ = 0, min2_ = 0;
  long width_ = 0, height_ = 0;
  std::vector<Cell> cells_;
  std::vector<long> index_;  // grid -> site or boundary index
  std::vector<std::size_t> site_grid_;
  std::vector<std::size_t> boundary_grid_;
};

using RegionPtr = std::shared_ptr<const Region>;

/// Boundary heights aligned with Region::boundary().
std::vector<int> planar_boundary(const Region& region, const SlopeVector& n, int offset = 0);

/// Height function on a region plus frozen boundary values. Heights live on
/// the region's padded grid so neighbor reads are single loads. Optional
/// floor / ceiling fields are indexed by interior site.
class HeightField {
 public:
  HeightField(RegionPtr region, std::span<const int> boundary, std::span<const int> interior);

  const Region& region() const noexcept { return *region_; }
  const RegionPtr& region_ptr() const noexcept { return region_; }
  std::size_t size() const noexcept { return region_->size(); }

  int operator[](std::size_t site) const noexcept { return cells_[region_->site_cell(site)]; }
  int at(Point p) const;
  int cell(std::size_t g) const noexcept { return cells_[g]; }
  void set(std::size_t site, int value) noexcept { cells_[region_->site_cell(site)] = value; }

  std::vector<int> interior() const;
  std::vector<int> boundary_values() const;

  void set_floor(std::vector<int> floor);
  void set_ceiling(std::vector<int> ceiling);
  bool has_floor() const noexcept { return !floor_.empty(); }
  bool has_ceiling() const noexcept { return !ceiling_.empty(); }
  const std::vector<int>& floor() const noexcept { return floor_; }
  const std::vector<int>& ceiling() const noexcept { return ceiling_; }

  /// Monotone (nonincreasing in both coordinates) across interior and
  /// boundary cells, and inside the floor/ceiling when present.
  bool is_valid() const;

  bool same_interior(const HeightField& other) const;

 private:
  RegionPtr region_;
  std::vector<int> cells_;
  std::vector<int> floor_;
  std::vector<int> ceiling_;
};

struct GoodPlanarReport {
  bool ok = true;
  double worst_ratio = 0.0;  // max |eta - phibar| / (C log(|x|+1)); +inf if violated at x = 0
  Point worst_site{};
  std::size_t tested = 0;
};

/// Tests |eta_x - phibar_x| <= C log(|x|+1) on dU plus every outside point
/// within Euclidean distance 1 + halo of the region.
GoodPlanarReport check_good_planar(const std::map<Point, int>& eta, const SlopeVector& n, double C,
                                   const Region& region, int halo = 0);

/// Sequence eta_1..eta_L with pinned ends eta_0 = 0, eta_{L+1} = h, confined
/// to [lo, hi] and optionally to a floor/ceiling. Heights are stored with the
/// two boundary values so index i in [0, L+1] reads directly.
struct SosGeometry {
  int L = 1;
  int h = 0;
  int lo = -1;
  int hi = 1;

  /// Bounded model: window [-M, M+h], M defaults to L, requires 0 <= h <= L.
  static SosGeometry bounded(int L, int h, std::optional<int> M = std::nullopt);
  /// General window [lo, hi] (used for rectangles with zero boundary).
  static SosGeometry window(int L, int h, int lo, int hi);

  int width() const noexcept { return hi - lo + 1; }
  friend bool operator==(const SosGeometry&, const SosGeometry&) = default;
};

class SosPath {
 public:
  SosPath(SosGeometry geometry, std::vector<int> heights);

  static SosPath constant(SosGeometry geometry, int value);
  static SosPath maximal(SosGeometry geometry);
  static SosPath minimal(SosGeometry geometry);

  /// Sets every site to its effective upper (lower) bound: the maximal
  /// (minimal) element of the constrained space.
  void fill_upper();
  void fill_lower();

  const SosGeometry& geometry() const noexcept { return geom_; }
  int L() const noexcept { return geom_.L; }
  int h() const noexcept { return geom_.h; }

  /// eta_i for i in [0, L+1].
  int operator[](std::size_t i) const noexcept { return eta_[i]; }
  void set(std::size_t i, int value) noexcept { eta_[i] = value; }
  std::span<const int> interior() const noexcept { return {eta_.data() + 1, static_cast<std::size_t>(geom_.L)}; }
  std::span<const int> all() const noexcept { return eta_; }

  /// Floor / ceiling over sites 1..L (vectors of length L).
  void set_floor(std::vector<int> floor);
  void set_ceiling(std::vector<int> ceiling);
  const std::vector<int>& floor() const noexcept { return floor_; }
  const std::vector<int>& ceiling() const noexcept { return ceiling_; }

  /// Effective bounds at site i (window intersected with the walls).
  int lower(std::size_t i) const noexcept { return lower_[i]; }
  int upper(std::size_t i) const noexcept { return upper_[i]; }

  bool is_valid() const;
  bool same_heights(const SosPath& other) const noexcept { return eta_ == other.eta_; }

 private:
  void refresh_bounds();

  SosGeometry geom_;
  std::vector<int> eta_;
  std::vector<int> floor_;
  std::vector<int> ceiling_;
  std::vector<int> lower_;
  std::vector<int> upper_;
};

struct WallProfile {
  std::vector<int> values;  // values[i-1] = floor(i h / (L+1))
};

WallProfile wall_profile(int L, int h);

bool partial_order_leq(const HeightField& a, const HeightField& b);
bool partial_order_leq(const SosPath& a, const SosPath& b);

/// Sum_{i=0}^{L} |eta_{i+1} - eta_i| including both pinned ends.
double sos_energy(const SosPath& eta);
long sos_energy(std::span<const int> interior, int h);

}  // namespace ifdyn
