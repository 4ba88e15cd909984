#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ifdyn/coupling.hpp"
#include "ifdyn/lattice.hpp"

namespace ifdyn {

struct VectorHash {
  std::size_t operator()(const std::vector<int>& v) const noexcept;
};

/// Enumerated configurations. SOS spaces are a full product of per-site
/// ranges and use mixed-radix indexing (site 1 most significant); surface
/// spaces are listed in lexicographic order and indexed by a hash map.
class StateSpace {
 public:
  Model model() const noexcept { return model_; }
  std::size_t size() const noexcept { return n_; }
  std::size_t dim() const noexcept { return dim_; }
  std::span<const int> state(std::size_t k) const noexcept { return {data_.data() + k * dim_, dim_}; }
  std::optional<std::size_t> find(std::span<const int> config) const;

  const SosPath& sos() const { return *sos_; }
  const HeightField& surface() const { return *surface_; }

  friend StateSpace enumerate_states(const SosPath& like, std::size_t cap);
  friend StateSpace enumerate_states(const HeightField& like, std::size_t cap);

 private:
  Model model_ = Model::sos;
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  std::vector<int> data_;
  std::optional<SosPath> sos_;
  std::optional<HeightField> surface_;
  std::vector<int> lower_, upper_;
  std::vector<std::size_t> stride_;
  std::unordered_map<std::vector<int>, std::size_t, VectorHash> index_;
};

inline constexpr std::size_t kDefaultStateCap = 5'000'000;

/// Throws too-large when the predicted size exceeds `cap`.
StateSpace enumerate_states(const SosPath& like, std::size_t cap = kDefaultStateCap);
StateSpace enumerate_states(const HeightField& like, std::size_t cap = kDefaultStateCap);

struct Triplet {
  std::size_t row;
  std::size_t col;
  double rate;
};

/// Continuous-time generator in CSR form (off-diagonal rates only; the
/// diagonal is minus the row sum) with its stationary law.
class RateMatrix {
 public:
  RateMatrix() = default;
  /// Duplicate (row, col) entries are summed; diagonal entries are dropped.
  static RateMatrix from_triplets(std::size_t n, std::vector<Triplet> entries, std::vector<double> pi);

  std::size_t size() const noexcept { return pi_.size(); }
  std::size_t nonzeros() const noexcept { return cols_.size(); }
  const std::vector<double>& pi() const noexcept { return pi_; }
  double exit_rate(std::size_t s) const noexcept { return exit_[s]; }
  double max_exit_rate() const noexcept;

  std::span<const std::size_t> row_cols(std::size_t s) const noexcept {
    return {cols_.data() + ptr_[s], ptr_[s + 1] - ptr_[s]};
  }
  std::span<const double> row_rates(std::size_t s) const noexcept {
    return {vals_.data() + ptr_[s], ptr_[s + 1] - ptr_[s]};
  }
  /// Off-diagonal rate s -> t (0 when absent).
  double rate(std::size_t s, std::size_t t) const noexcept;

  /// out = mu Q (row vector times generator).
  void left_apply(std::span<const double> mu, std::span<double> out) const noexcept;
  /// out = Q f.
  void right_apply(std::span<const double> f, std::span<double> out) const noexcept;

  /// max |pi(s) q(s,t) - pi(t) q(t,s)|.
  double reversibility_residual() const;
  /// max |(pi Q)(t)|.
  double stationarity_residual() const;
  /// max |row sum| including the diagonal; zero up to rounding by construction.
  double row_sum_residual() const noexcept;
  bool irreducible() const;

  void write_coo(std::ostream& os) const;

 private:
  std::vector<std::size_t> ptr_{0};
  std::vector<std::size_t> cols_;
  std::vector<double> vals_;
  std::vector<double> exit_;
  std::vector<double> pi_;
};

/// Single-site generator on an enumerated space: SOS jump probabilities as
/// rates, or rate 1/2 per allowed surface move. `site_mask` (one flag per
/// site, empty = all) restricts the clocks that ring. Stationary law: Gibbs
/// weights from the exact transfer recursion (SOS) or uniform (surface).
/// Throws not-irreducible unless the full generator connects the space.
RateMatrix build_generator(const StateSpace& space, std::span<const char> site_mask = {});

/// Dirichlet form 1/2 sum pi(s) q(s,t) (f(t) - f(s))^2 and variance under pi.
double dirichlet_form(const RateMatrix& q, std::span<const double> f);
double variance(std::span<const double> pi, std::span<const double> f);
double total_variation(std::span<const double> a, std::span<const double> b);

/// Indices of the states with the smallest and largest height sum: the
/// extremal starts of a monotone chain, the natural t_mix hints.
std::vector<std::size_t> extremal_states(const StateSpace& space);

/// Positive combinations of increasing indicators 1{eta_i >= c} and
/// 1{sum eta >= c}; every function is nondecreasing in the partial order.
std::vector<std::vector<double>> random_increasing_functions(const StateSpace& space, std::size_t count,
                                                             std::uint64_t seed);
/// Mixtures of increasing indicators and independent Gaussian values per state.
std::vector<std::vector<double>> random_test_functions(const StateSpace& space, std::size_t count, std::uint64_t seed);

struct GapOptions {
  std::size_t dense_max = 2000;
  int krylov_dim = 60;
  int keep = 12;
  double tol = 1e-10;
  int max_restarts = 5000;
  std::uint64_t seed = 1;
};

struct GapResult {
  double gap = 0.0;
  std::string method;  // "dense" or "lanczos"
  double residual = 0.0;            // ||A x - gap x|| for the witness
  double variational_ratio = 0.0;   // Dirichlet form / variance of the witness
  std::vector<double> witness;      // eigenfunction f with pi(f) = 0
  int iterations = 0;
};

/// Smallest nonzero eigenvalue of -Q via the symmetrization
/// D^{1/2} Q D^{-1/2}. Throws not-reversible on a non-reversible input.
GapResult exact_gap(const RateMatrix& q, const GapOptions& opt = {});

/// mu exp(tQ) by uniformization; truncation error below `eps` in l1.
std::vector<double> propagate(const RateMatrix& q, std::vector<double> mu, double t, double eps = 1e-10);

/// ||mu_t - pi|| at each (sorted) time, starting from state xi or law mu0.
std::vector<double> exact_tv_curve(const RateMatrix& q, std::size_t xi, std::span<const double> times,
                                   double eps = 1e-10);
std::vector<double> exact_tv_curve(const RateMatrix& q, std::vector<double> mu0, std::span<const double> times,
                                   double eps = 1e-10);

struct TmixOptions {
  std::vector<std::size_t> hints;  // starts tried first (e.g. extremal states)
  double rel_tol = 1e-6;
  std::size_t full_spectrum_max = 3000;
  double truncation = 1e-13;
};

struct TmixResult {
  double tmix = 0.0;        // upper end of the final bracket: sup TV(tmix) <= 1/(2e)
  double lower = 0.0;       // sup TV(lower) > 1/(2e)
  std::size_t worst_start = 0;
  std::size_t modes = 0;    // eigenpairs kept
  double truncation_bound = 0.0;
};

/// Evaluates sup over starts of ||mu^xi_t - pi|| from a (possibly truncated)
/// eigendecomposition of the symmetrized generator. Truncation keeps every
/// mode with lambda t_min below a cutoff chosen so the dropped tail adds less
/// than `truncation` to any row's distance for t >= t_min.
class WorstCaseTv {
 public:
  WorstCaseTv(const RateMatrix& q, double t_min, const TmixOptions& opt);

  /// Certified upper value (computed distance plus truncation bound).
  double operator()(double t, std::size_t* argmax = nullptr) const;
  double t_min() const noexcept { return t_min_; }
  std::size_t modes() const noexcept { return lambda_.size(); }
  double truncation_bound() const noexcept { return trunc_; }

 private:
  std::size_t n_ = 0;
  double t_min_ = 0.0;
  double trunc_ = 0.0;
  std::vector<double> lambda_;  // kept nonzero eigenvalues
  std::vector<double> u_;       // n x r, row-major: V(s,k) / sqrt(pi_s)
  std::vector<double> r_;       // n x r, row-major: V(t,k) sqrt(pi_t)
  std::vector<double> pi_;
  std::vector<double> dropped_;  // per-row bound factor
  double lambda_cut_ = 0.0;
};

TmixResult exact_tmix(const RateMatrix& q, const TmixOptions& opt = {});

struct MixingLawCheck {
  double t;
  double sup_tv;
  double bound;  // e^{-floor(t / tmix)}
};

struct MixingReport {
  TmixResult tm;
  std::vector<MixingLawCheck> checks;
  double worst_excess = 0.0;  // max(sup_tv - bound)
  bool ok = false;
};

/// Computes t_mix and checks sup TV(t) <= e^{-floor(t/tmix)} + 1e-12 at
/// t = k tmix, k = 0..kmax. The worst-case distance is nonincreasing in t,
/// so on each step [k tmix, (k+1) tmix) it peaks at the left end.
MixingReport mixing_law_report(const RateMatrix& q, int kmax = 5, const TmixOptions& opt = {});

/// Law at time t of the chain censored by alternating parity freezes with
/// half-epoch T (odd sites frozen first): propagation alternates between the
/// even-site and odd-site generators.
std::vector<double> censored_propagate(const RateMatrix& q_even, const RateMatrix& q_odd, std::vector<double> mu,
                                       double T, double t, double eps = 1e-12);

}  // namespace ifdyn
