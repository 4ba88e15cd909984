#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ifdyn/spectral.hpp"

namespace ifdyn {

/// SOS rectangle [1, base] x [0, height]: heights in {0..height}, zero
/// boundary values at both ends of the base.
struct Rectangle {
  int base = 1;
  long height = 0;
};

/// Lambda_1 = [0, h1], Lambda_2 = [h1 - overlap, height]; the overlap strip
/// I = [h1 - overlap, h1] has height `overlap`.
struct BlockSplit {
  Rectangle whole;
  long h1 = 0;
  long overlap = 0;
  int n = 0;

  long floor_level() const noexcept { return h1 - overlap; }  // b = h1 - h_I
  long h2() const noexcept { return whole.height - floor_level(); }
};

struct DecomposeResult {
  std::vector<BlockSplit> splits;
  std::string diagnostic;  // empty when enough splits were found
};

/// Height thresholds of the recursion at index n.
double level_height(int n);      // (3/2)^n
double min_overlap(int n);       // (3/2)^{3n/4}
double split_count(int n);       // (3/2)^{n/5}
double recursion_delta(int n);   // (3/2)^{-n/6}

/// Splits with both pieces no taller than floor((3/2)^{n-1}), overlap height
/// at least (3/2)^{3n/4}, and pairwise disjoint overlaps; at least
/// floor((3/2)^{n/5}) of them or an empty list with a diagnostic.
DecomposeResult decompose(const Rectangle& r, int n);

/// Same construction with explicit limits (for instances too small for the
/// asymptotic thresholds).
DecomposeResult decompose_with(const Rectangle& r, long max_height, long min_overlap_height, std::size_t min_count,
                               int n = 0);

/// Checks (a)-(c) and disjointness for a split list against the given limits.
bool valid_splits(std::span<const BlockSplit> splits, long max_height, long min_overlap_height);

StateSpace rectangle_space(const Rectangle& r, std::size_t cap = kDefaultStateCap);

/// Generator of the constrained block dynamics: rate-one resampling of
/// Lambda_2 from its conditional law given the strip below it (a product over
/// the maximal runs of sites above the strip), and rate-one resampling of
/// Lambda_1 whenever every height is at most h1.
RateMatrix block_generator(const StateSpace& space, const BlockSplit& split);

/// max over the sub-chains used by the split of 1/gap: the Lambda_1 chain and
/// the run chains on m = 1..base sites with heights in [b+1, height].
double reference_gamma(const BlockSplit& split);

struct VarianceTerms {
  double var = 0.0;             // Var_Lambda(f)
  double dirichlet = 0.0;       // E_Lambda(f, f)
  double g_variance = 0.0;      // pi(1_G Var_{Lambda_1}(f))
  double g_dirichlet = 0.0;     // restricted form with 1{eta_i <= h1}
  double fiber_variance = 0.0;  // pi(Var^eta_{Lambda_2}(f))
  double fiber_dirichlet = 0.0; // restricted form with 1{eta_i >= b}
  double overlap_dirichlet = 0.0;  // restricted form with 1{b <= eta_i <= h1}
  double block_dirichlet = 0.0;    // g_variance + fiber_variance
};

struct VarianceReport {
  double gamma_ref = 0.0;
  double block_gap = 0.0;
  std::size_t functions = 0;
  double margin_g = 0.0;      // min over f of gamma_ref * g_dirichlet - g_variance
  double margin_fiber = 0.0;  // min over f of gamma_ref * fiber_dirichlet - fiber_variance
  double margin_block = 0.0;  // min over f of block_dirichlet / block_gap - var
  double worst_block_ratio = 0.0;  // max over f of var / block_dirichlet
  double margin_combined = 0.0;    // min over f of (1/block_gap) gamma_ref (E + E^I) - var
  bool ok = false;
};

VarianceTerms variance_terms(const StateSpace& space, const RateMatrix& full, const BlockSplit& split,
                             std::span<const double> f);

VarianceReport variance_decomposition_check(const Rectangle& r, const BlockSplit& split,
                                            std::span<const std::vector<double>> functions, double gamma_ref);
VarianceReport variance_decomposition_check(const Rectangle& r, const BlockSplit& split, std::size_t count,
                                            std::uint64_t seed);

struct GammaRow {
  int n = 0;
  double gamma = 0.0;       // max 1/gap over enumerable rectangles with height <= (3/2)^n
  int argmax_base = 0;
  long argmax_height = 0;
  double ratio = 0.0;       // gamma(n) / gamma(n-1)
  double allowed = 0.0;     // 1 + (3/2)^{-n/6}
  bool within = true;
};

/// gamma(L, n) over bases 1..L and heights 1..floor((3/2)^n), restricted to
/// rectangles whose state count is at most `cap`.
std::vector<GammaRow> gamma_table(int L, int n_max, std::size_t cap = 20000);

}  // namespace ifdyn
