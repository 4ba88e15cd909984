#include "ifdyn/block.hpp"

#include <algorithm>
#include <cmath>
#include <array>
#include <limits>
#include <map>
#include <optional>

#include "ifdyn/error.hpp"
#include "ifdyn/sos.hpp"

namespace ifdyn {

double level_height(int n) { return std::pow(1.5, n); }
double min_overlap(int n) { return std::pow(1.5, 0.75 * n); }
double split_count(int n) { return std::pow(1.5, n / 5.0); }
double recursion_delta(int n) { return std::pow(1.5, -n / 6.0); }

DecomposeResult decompose_with(const Rectangle& r, long max_height, long min_overlap_height, std::size_t min_count,
                               int n) {
  DecomposeResult out;
  if (r.height <= max_height) {
    out.diagnostic = "height " + std::to_string(r.height) + " already within " + std::to_string(max_height);
    return out;
  }
  const long need = std::max(1L, min_overlap_height);
  // Lambda_2 = [b, height] needs height - b <= max_height; Lambda_1 = [0, h1]
  // needs h1 <= max_height; overlaps [b, h1] are packed upward, disjoint.
  for (long b = r.height - max_height; b + need <= max_height; b += need + 1)
    out.splits.push_back({r, b + need, need, n});
  if (out.splits.size() < std::max<std::size_t>(min_count, 1)) {
    out.diagnostic = "only " + std::to_string(out.splits.size()) + " disjoint overlaps of height " +
                     std::to_string(need) + " fit (need " + std::to_string(std::max<std::size_t>(min_count, 1)) +
                     ") between " + std::to_string(r.height - max_height) + " and " + std::to_string(max_height);
    out.splits.clear();
  }
  return out;
}

DecomposeResult decompose(const Rectangle& r, int n) {
  if (n < 1) throw Error(Errc::invalid_parameters, "decomposition index must be positive");
  const auto max_height = static_cast<long>(std::floor(level_height(n - 1)));
  const auto overlap = static_cast<long>(std::ceil(min_overlap(n)));
  const auto count = static_cast<std::size_t>(std::floor(split_count(n)));
  return decompose_with(r, max_height, overlap, count, n);
}

bool valid_splits(std::span<const BlockSplit> splits, long max_height, long min_overlap_height) {
  for (std::size_t a = 0; a < splits.size(); ++a) {
    const auto& s = splits[a];
    const long b = s.floor_level();
    if (s.h1 > max_height || s.h2() > max_height) return false;  // (a)
    if (b < 0 || s.h1 > s.whole.height || b > s.h1) return false; // (b): same base, inside Lambda
    if (s.overlap < min_overlap_height || s.overlap < 1) return false;  // (c)
    for (std::size_t c = 0; c < a; ++c) {
      const auto& t = splits[c];
      if (!(t.h1 < b || s.h1 < t.floor_level())) return false;
    }
  }
  return true;
}

StateSpace rectangle_space(const Rectangle& r, std::size_t cap) {
  if (r.base < 1 || r.height < 0) throw Error(Errc::invalid_parameters, "rectangle needs base >= 1 and height >= 0");
  return enumerate_states(SosPath::minimal(SosGeometry::window(r.base, 0, 0, static_cast<int>(r.height))), cap);
}

namespace {

double run_log_weight(std::span<const int> x, int left, int right) {
  double e = std::abs(x.front() - left) + std::abs(x.back() - right);
  for (std::size_t k = 1; k < x.size(); ++k) e += std::abs(x[k] - x[k - 1]);
  return -e;
}

// Conditional law on a run of sites above the strip: every configuration in
// [lo, hi]^m with Gibbs weights given the two fixed neighbors.
std::vector<std::pair<std::vector<int>, double>> run_law(std::size_t m, int lo, int hi, int left, int right) {
  std::vector<std::pair<std::vector<int>, double>> out;
  std::vector<int> x(m, lo);
  for (;;) {
    out.emplace_back(x, run_log_weight(x, left, right));
    std::size_t i = m;
    while (i > 0 && x[i - 1] == hi) x[--i] = lo;
    if (i == 0) break;
    ++x[i - 1];
  }
  double top = -std::numeric_limits<double>::infinity();
  for (auto& [c, w] : out) top = std::max(top, w);
  double z = 0.0;
  for (auto& [c, w] : out) z += (w = std::exp(w - top));
  for (auto& [c, w] : out) w /= z;
  return out;
}

std::vector<int> strip_key(std::span<const int> c, int b) {
  std::vector<int> k(c.begin(), c.end());
  for (int& x : k) x = std::min(x, b + 1);
  return k;
}

void check_split(const StateSpace& space, const BlockSplit& split) {
  if (space.model() != Model::sos || static_cast<long>(space.dim()) != split.whole.base)
    throw Error(Errc::invalid_parameters, "state space does not match the split rectangle");
  if (split.overlap < 1 || split.floor_level() < 0 || split.h1 > split.whole.height)
    throw Error(Errc::invalid_parameters, "split is not inside the rectangle");
}

}  // namespace

RateMatrix block_generator(const StateSpace& space, const BlockSplit& split) {
  check_split(space, split);
  const std::size_t n = space.size(), d = space.dim();
  const int b = static_cast<int>(split.floor_level());
  const int top = static_cast<int>(split.whole.height);
  const int h1 = static_cast<int>(split.h1);

  const SosExactSampler gibbs(space.sos());
  std::vector<double> pi(n);
  for (std::size_t k = 0; k < n; ++k) pi[k] = std::exp(gibbs.log_prob(space.state(k)));

  std::vector<Triplet> entries;

  // Lambda_1 move: resample from the SOS law in [0, h1] when eta <= h1
  {
    const SosExactSampler lower(SosPath::minimal(SosGeometry::window(static_cast<int>(d), 0, 0, h1)));
    std::vector<std::pair<std::size_t, double>> targets;
    for (std::size_t k = 0; k < n; ++k) {
      const auto c = space.state(k);
      if (*std::max_element(c.begin(), c.end()) <= h1) targets.emplace_back(k, std::exp(lower.log_prob(c)));
    }
    for (const auto& [s, ps] : targets)
      for (const auto& [t, pt] : targets) entries.push_back({s, t, pt});
  }

  // Lambda_2 move: product of run laws above the strip, cached per strip key
  std::map<std::vector<int>, std::vector<std::pair<std::size_t, double>>> cache;
  for (std::size_t k = 0; k < n; ++k) {
    const auto c = space.state(k);
    auto key = strip_key(c, b);
    auto it = cache.find(key);
    if (it == cache.end()) {
      std::vector<std::pair<std::vector<int>, double>> law{{std::vector<int>(c.begin(), c.end()), 1.0}};
      for (std::size_t i = 0; i < d;) {
        if (c[i] <= b) {
          ++i;
          continue;
        }
        std::size_t j = i;
        while (j < d && c[j] > b) ++j;
        const int left = i == 0 ? 0 : c[i - 1];
        const int right = j == d ? 0 : c[j];
        const auto run = run_law(j - i, b + 1, top, left, right);
        std::vector<std::pair<std::vector<int>, double>> next;
        for (const auto& [cfg, p] : law)
          for (const auto& [x, q] : run) {
            auto y = cfg;
            std::copy(x.begin(), x.end(), y.begin() + static_cast<std::ptrdiff_t>(i));
            next.emplace_back(std::move(y), p * q);
          }
        law.swap(next);
        i = j;
      }
      std::vector<std::pair<std::size_t, double>> indexed;
      for (const auto& [cfg, p] : law) indexed.emplace_back(*space.find(cfg), p);
      it = cache.emplace(std::move(key), std::move(indexed)).first;
    }
    for (const auto& [t, p] : it->second) entries.push_back({k, t, p});
  }
  return RateMatrix::from_triplets(n, std::move(entries), std::move(pi));
}

double reference_gamma(const BlockSplit& split) {
  double gamma = 0.0;
  auto consider = [&](const SosPath& like) {
    const auto space = enumerate_states(like);
    if (space.size() < 2) return;
    gamma = std::max(gamma, 1.0 / exact_gap(build_generator(space)).gap);
  };
  const int base = split.whole.base;
  consider(SosPath::minimal(SosGeometry::window(base, 0, 0, static_cast<int>(split.h1))));
  // runs: boundary heights sit below the floor b+1, so the law and the rates
  // only see them through the constant offset; shift the floor to 1
  const int span = static_cast<int>(split.whole.height - split.floor_level());
  for (int m = 1; m <= base; ++m) consider(SosPath::minimal(SosGeometry::window(m, 0, 1, span)));
  return gamma;
}

namespace {

// site at which two single-move neighbors differ
std::size_t moved_site(std::span<const int> a, std::span<const int> b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return i;
  return a.size();
}

// pi-weighted conditional variance over the classes given by `cls`
template <class Key>
double class_variance(const StateSpace& space, std::span<const double> pi, std::span<const double> f, Key cls) {
  std::map<std::vector<int>, std::array<double, 3>> acc;  // mass, sum f, sum f^2
  for (std::size_t k = 0; k < space.size(); ++k) {
    const auto key = cls(space.state(k));
    if (!key) continue;
    auto& a = acc[*key];
    a[0] += pi[k];
    a[1] += pi[k] * f[k];
    a[2] += pi[k] * f[k] * f[k];
  }
  double total = 0.0;
  for (const auto& [key, a] : acc)
    if (a[0] > 0.0) total += a[2] - a[1] * a[1] / a[0];
  return std::max(total, 0.0);
}

}  // namespace

VarianceTerms variance_terms(const StateSpace& space, const RateMatrix& full, const BlockSplit& split,
                             std::span<const double> f) {
  check_split(space, split);
  const int b = static_cast<int>(split.floor_level());
  const int h1 = static_cast<int>(split.h1);
  const auto& pi = full.pi();
  VarianceTerms v;
  v.var = variance(pi, f);
  v.dirichlet = dirichlet_form(full, f);
  v.g_variance = class_variance(space, pi, f, [&](std::span<const int> c) -> std::optional<std::vector<int>> {
    if (*std::max_element(c.begin(), c.end()) > h1) return std::nullopt;
    return std::vector<int>{};
  });
  v.fiber_variance = class_variance(space, pi, f, [&](std::span<const int> c) -> std::optional<std::vector<int>> {
    return strip_key(c, b);
  });
  for (std::size_t s = 0; s < space.size(); ++s) {
    const auto cs = space.state(s);
    const auto cols = full.row_cols(s);
    const auto rates = full.row_rates(s);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const std::size_t i = moved_site(cs, space.state(cols[k]));
      const double e = 0.5 * pi[s] * rates[k] * (f[cols[k]] - f[s]) * (f[cols[k]] - f[s]);
      const bool below = cs[i] <= h1, above = cs[i] >= b;
      if (below) v.g_dirichlet += e;
      if (above) v.fiber_dirichlet += e;
      if (below && above) v.overlap_dirichlet += e;
    }
  }
  v.block_dirichlet = v.g_variance + v.fiber_variance;
  return v;
}

VarianceReport variance_decomposition_check(const Rectangle& r, const BlockSplit& split,
                                            std::span<const std::vector<double>> functions, double gamma_ref) {
  const auto space = rectangle_space(r);
  const auto full = build_generator(space);
  const auto block = block_generator(space, split);
  VarianceReport rep;
  rep.gamma_ref = gamma_ref;
  rep.block_gap = exact_gap(block).gap;
  rep.functions = functions.size();
  const double inf = std::numeric_limits<double>::infinity();
  rep.margin_g = rep.margin_fiber = rep.margin_block = rep.margin_combined = inf;
  for (const auto& f : functions) {
    const auto t = variance_terms(space, full, split, f);
    rep.margin_g = std::min(rep.margin_g, gamma_ref * t.g_dirichlet - t.g_variance);
    rep.margin_fiber = std::min(rep.margin_fiber, gamma_ref * t.fiber_dirichlet - t.fiber_variance);
    rep.margin_block = std::min(rep.margin_block, t.block_dirichlet / rep.block_gap - t.var);
    rep.margin_combined =
        std::min(rep.margin_combined, gamma_ref / rep.block_gap * (t.dirichlet + t.overlap_dirichlet) - t.var);
    if (t.block_dirichlet > 0.0) rep.worst_block_ratio = std::max(rep.worst_block_ratio, t.var / t.block_dirichlet);
  }
  const double tol = -1e-10;
  rep.ok = rep.margin_g >= tol && rep.margin_fiber >= tol && rep.margin_block >= tol && rep.margin_combined >= tol;
  return rep;
}

VarianceReport variance_decomposition_check(const Rectangle& r, const BlockSplit& split, std::size_t count,
                                            std::uint64_t seed) {
  const auto space = rectangle_space(r);
  const auto fs = random_test_functions(space, count, seed);
  return variance_decomposition_check(r, split, fs, reference_gamma(split));
}

std::vector<GammaRow> gamma_table(int L, int n_max, std::size_t cap) {
  std::vector<GammaRow> rows;
  for (int n = 0; n <= n_max; ++n) {
    GammaRow row;
    row.n = n;
    const auto hmax = static_cast<long>(std::floor(level_height(n)));
    for (int base = 1; base <= L; ++base)
      for (long h = 1; h <= hmax; ++h) {
        if (std::pow(static_cast<double>(h + 1), base) > static_cast<double>(cap)) break;
        const double g = 1.0 / exact_gap(build_generator(rectangle_space({base, h}))).gap;
        if (g > row.gamma) {
          row.gamma = g;
          row.argmax_base = base;
          row.argmax_height = h;
        }
      }
    row.allowed = 1.0 + recursion_delta(n);
    if (!rows.empty() && rows.back().gamma > 0.0) {
      row.ratio = row.gamma / rows.back().gamma;
      row.within = row.ratio <= row.allowed;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ifdyn
