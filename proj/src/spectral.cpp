#include "ifdyn/spectral.hpp"

#include <cblas.h>
#include <lapacke.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <ostream>

#include "ifdyn/error.hpp"
#include "ifdyn/rng.hpp"

namespace ifdyn {

std::size_t VectorHash::operator()(const std::vector<int>& v) const noexcept {
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  for (int x : v) h = mix64(h ^ static_cast<std::uint32_t>(x));
  return static_cast<std::size_t>(h);
}

std::optional<std::size_t> StateSpace::find(std::span<const int> c) const {
  if (c.size() != dim_) return std::nullopt;
  if (model_ == Model::sos) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < dim_; ++i) {
      if (c[i] < lower_[i] || c[i] > upper_[i]) return std::nullopt;
      k += static_cast<std::size_t>(c[i] - lower_[i]) * stride_[i];
    }
    return k;
  }
  const auto it = index_.find(std::vector<int>(c.begin(), c.end()));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

StateSpace enumerate_states(const SosPath& like, std::size_t cap) {
  StateSpace sp;
  sp.model_ = Model::sos;
  sp.dim_ = static_cast<std::size_t>(like.L());
  sp.sos_ = like;
  sp.lower_.resize(sp.dim_);
  sp.upper_.resize(sp.dim_);
  sp.stride_.resize(sp.dim_);
  double predicted = 1.0;
  for (std::size_t i = 0; i < sp.dim_; ++i) {
    sp.lower_[i] = like.lower(i + 1);
    sp.upper_[i] = like.upper(i + 1);
    if (sp.lower_[i] > sp.upper_[i]) throw Error(Errc::empty_support, "empty height range at a site");
    predicted *= sp.upper_[i] - sp.lower_[i] + 1;
  }
  if (predicted > static_cast<double>(cap))
    throw Error(Errc::too_large, "state space of " + std::to_string(predicted) + " states exceeds cap " + std::to_string(cap));
  sp.n_ = static_cast<std::size_t>(predicted);
  std::size_t stride = 1;
  for (std::size_t i = sp.dim_; i-- > 0;) {
    sp.stride_[i] = stride;
    stride *= static_cast<std::size_t>(sp.upper_[i] - sp.lower_[i] + 1);
  }
  sp.data_.resize(sp.n_ * sp.dim_);
  std::vector<int> v(sp.lower_);
  for (std::size_t k = 0; k < sp.n_; ++k) {
    std::copy(v.begin(), v.end(), sp.data_.begin() + static_cast<std::ptrdiff_t>(k * sp.dim_));
    for (std::size_t i = sp.dim_; i-- > 0;) {
      if (v[i] < sp.upper_[i]) {
        ++v[i];
        break;
      }
      v[i] = sp.lower_[i];
    }
  }
  return sp;
}

// Sites are in lexicographic order, so west and south neighbors are assigned
// before a site is visited; the range [min_x, min(west, south, ceiling)] is
// never empty because the minimal surface is itself monotone.
StateSpace enumerate_states(const HeightField& like, std::size_t cap) {
  const HeightField bottom = minimal_surface(like);
  const Region& r = like.region();
  StateSpace sp;
  sp.model_ = Model::surface;
  sp.dim_ = like.size();
  sp.surface_ = like;
  std::vector<int> v(sp.dim_);
  auto value = [&](std::size_t g) {
    if (r.cell(g) == Region::Cell::interior) return v[static_cast<std::size_t>(r.index_of(r.grid_point(g)))];
    return like.cell(g);
  };
  std::function<void(std::size_t)> rec = [&](std::size_t s) {
    if (s == sp.dim_) {
      if (sp.n_ >= cap) throw Error(Errc::too_large, "surface state space exceeds cap " + std::to_string(cap));
      sp.data_.insert(sp.data_.end(), v.begin(), v.end());
      sp.index_.emplace(v, sp.n_);
      ++sp.n_;
      return;
    }
    int hi = std::min(value(r.west(s)), value(r.south(s)));
    if (like.has_ceiling()) hi = std::min(hi, like.ceiling()[s]);
    for (int x = bottom[s]; x <= hi; ++x) {
      v[s] = x;
      rec(s + 1);
    }
  };
  rec(0);
  return sp;
}

// ---------------------------------------------------------------------------

RateMatrix RateMatrix::from_triplets(std::size_t n, std::vector<Triplet> entries, std::vector<double> pi) {
  if (pi.size() != n) throw Error(Errc::invalid_parameters, "stationary vector has the wrong length");
  std::sort(entries.begin(), entries.end(),
            [](const Triplet& a, const Triplet& b) { return a.row < b.row || (a.row == b.row && a.col < b.col); });
  RateMatrix q;
  q.ptr_.assign(n + 1, 0);
  q.exit_.assign(n, 0.0);
  for (std::size_t k = 0; k < entries.size();) {
    const auto [row, col, rate0] = entries[k];
    if (row >= n || col >= n) throw Error(Errc::invalid_parameters, "triplet index out of range");
    double rate = 0.0;
    for (; k < entries.size() && entries[k].row == row && entries[k].col == col; ++k) rate += entries[k].rate;
    if (row == col || rate == 0.0) continue;
    if (rate < 0.0) throw Error(Errc::invalid_parameters, "negative off-diagonal rate");
    q.cols_.push_back(col);
    q.vals_.push_back(rate);
    q.exit_[row] += rate;
    ++q.ptr_[row + 1];
  }
  for (std::size_t s = 0; s < n; ++s) q.ptr_[s + 1] += q.ptr_[s];
  q.pi_ = std::move(pi);
  return q;
}

double RateMatrix::max_exit_rate() const noexcept {
  double m = 0.0;
  for (double e : exit_) m = std::max(m, e);
  return m;
}

double RateMatrix::rate(std::size_t s, std::size_t t) const noexcept {
  const auto cols = row_cols(s);
  const auto it = std::lower_bound(cols.begin(), cols.end(), t);
  if (it == cols.end() || *it != t) return 0.0;
  return vals_[ptr_[s] + static_cast<std::size_t>(it - cols.begin())];
}

void RateMatrix::left_apply(std::span<const double> mu, std::span<double> out) const noexcept {
  const std::size_t n = size();
  for (std::size_t t = 0; t < n; ++t) out[t] = -exit_[t] * mu[t];
  for (std::size_t s = 0; s < n; ++s) {
    const double m = mu[s];
    if (m == 0.0) continue;
    for (std::size_t k = ptr_[s]; k < ptr_[s + 1]; ++k) out[cols_[k]] += m * vals_[k];
  }
}

void RateMatrix::right_apply(std::span<const double> f, std::span<double> out) const noexcept {
  const std::size_t n = size();
  for (std::size_t s = 0; s < n; ++s) {
    double acc = -exit_[s] * f[s];
    for (std::size_t k = ptr_[s]; k < ptr_[s + 1]; ++k) acc += vals_[k] * f[cols_[k]];
    out[s] = acc;
  }
}

double RateMatrix::reversibility_residual() const {
  double worst = 0.0;
  for (std::size_t s = 0; s < size(); ++s)
    for (std::size_t k = ptr_[s]; k < ptr_[s + 1]; ++k) {
      const std::size_t t = cols_[k];
      worst = std::max(worst, std::abs(pi_[s] * vals_[k] - pi_[t] * rate(t, s)));
    }
  return worst;
}

double RateMatrix::stationarity_residual() const {
  std::vector<double> out(size());
  left_apply(pi_, out);
  double worst = 0.0;
  for (double x : out) worst = std::max(worst, std::abs(x));
  return worst;
}

double RateMatrix::row_sum_residual() const noexcept {
  double worst = 0.0;
  for (std::size_t s = 0; s < size(); ++s) {
    double acc = -exit_[s];
    for (std::size_t k = ptr_[s]; k < ptr_[s + 1]; ++k) acc += vals_[k];
    worst = std::max(worst, std::abs(acc));
  }
  return worst;
}

bool RateMatrix::irreducible() const {
  const std::size_t n = size();
  if (n == 0) return false;
  // strongly connected: forward reachability from 0 in Q and in Q^T
  auto reach = [&](bool transpose) {
    std::vector<std::vector<std::size_t>> rev;
    if (transpose) {
      rev.resize(n);
      for (std::size_t s = 0; s < n; ++s)
        for (std::size_t k = ptr_[s]; k < ptr_[s + 1]; ++k) rev[cols_[k]].push_back(s);
    }
    std::vector<char> seen(n, 0);
    std::deque<std::size_t> q{0};
    seen[0] = 1;
    std::size_t count = 1;
    while (!q.empty()) {
      const std::size_t s = q.front();
      q.pop_front();
      auto visit = [&](std::size_t t) {
        if (!seen[t]) {
          seen[t] = 1;
          ++count;
          q.push_back(t);
        }
      };
      if (transpose)
        for (std::size_t t : rev[s]) visit(t);
      else
        for (std::size_t k = ptr_[s]; k < ptr_[s + 1]; ++k) visit(cols_[k]);
    }
    return count == n;
  };
  return reach(false) && reach(true);
}

void RateMatrix::write_coo(std::ostream& os) const {
  for (std::size_t s = 0; s < size(); ++s)
    for (std::size_t k = ptr_[s]; k < ptr_[s + 1]; ++k) os << s << ' ' << cols_[k] << ' ' << vals_[k] << '\n';
}

RateMatrix build_generator(const StateSpace& space, std::span<const char> site_mask) {
  const std::size_t n = space.size(), d = space.dim();
  if (!site_mask.empty() && site_mask.size() != d) throw Error(Errc::invalid_parameters, "site mask length mismatch");
  auto active = [&](std::size_t i) { return site_mask.empty() || site_mask[i]; };
  std::vector<Triplet> entries;
  std::vector<double> pi(n);

  if (space.model() == Model::sos) {
    const SosPath& proto = space.sos();
    const SosExactSampler gibbs(proto);
    const int h = proto.h();
    std::vector<std::size_t> stride(d);
    std::size_t st = 1;
    for (std::size_t i = d; i-- > 0;) {
      stride[i] = st;
      st *= static_cast<std::size_t>(proto.upper(i + 1) - proto.lower(i + 1) + 1);
    }
    entries.reserve(n * d * 2);
    for (std::size_t k = 0; k < n; ++k) {
      const auto c = space.state(k);
      pi[k] = std::exp(gibbs.log_prob(c));
      for (std::size_t i = 0; i < d; ++i) {
        if (!active(i)) continue;
        const int left = i == 0 ? 0 : c[i - 1];
        const int right = i + 1 == d ? h : c[i + 1];
        const auto r = glauber_rates(left, c[i], right);
        if (c[i] + 1 <= proto.upper(i + 1)) entries.push_back({k, k + stride[i], r.up});
        if (c[i] - 1 >= proto.lower(i + 1)) entries.push_back({k, k - stride[i], r.down});
      }
    }
  } else {
    HeightField f = space.surface();
    const double u = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto c = space.state(k);
      pi[k] = u;
      for (std::size_t i = 0; i < d; ++i) {
        if (!active(i)) continue;
        for (bool up : {true, false}) {
          for (std::size_t j = 0; j < d; ++j) f.set(j, c[j]);
          if (!apply_surface_move(f, i, up)) continue;
          const auto target = space.find(f.interior());
          if (!target) throw Error(Errc::invalid_parameters, "move leaves the enumerated space");
          entries.push_back({k, *target, 0.5});
        }
      }
    }
  }
  RateMatrix q = RateMatrix::from_triplets(n, std::move(entries), std::move(pi));
  if (site_mask.empty() && !q.irreducible()) throw Error(Errc::not_irreducible, "generator is reducible");
  return q;
}

double dirichlet_form(const RateMatrix& q, std::span<const double> f) {
  double acc = 0.0;
  for (std::size_t s = 0; s < q.size(); ++s) {
    const auto cols = q.row_cols(s);
    const auto vals = q.row_rates(s);
    double row = 0.0;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const double d = f[cols[k]] - f[s];
      row += vals[k] * d * d;
    }
    acc += q.pi()[s] * row;
  }
  return 0.5 * acc;
}

double variance(std::span<const double> pi, std::span<const double> f) {
  double m = 0.0;
  for (std::size_t s = 0; s < pi.size(); ++s) m += pi[s] * f[s];
  double v = 0.0;
  for (std::size_t s = 0; s < pi.size(); ++s) v += pi[s] * (f[s] - m) * (f[s] - m);
  return v;
}

double total_variation(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) acc += std::abs(a[s] - b[s]);
  return 0.5 * acc;
}

// ---------------------------------------------------------------------------

namespace {

// Symmetrized off-diagonal values sqrt(pi_s/pi_t) q(s,t), aligned with CSR.
struct SymOperator {
  const RateMatrix& q;
  std::vector<double> sval;
  std::vector<double> diag;

  explicit SymOperator(const RateMatrix& rm) : q(rm) {
    diag.resize(q.size());
    for (std::size_t s = 0; s < q.size(); ++s) {
      diag[s] = -q.exit_rate(s);
      const auto cols = q.row_cols(s);
      const auto vals = q.row_rates(s);
      for (std::size_t k = 0; k < cols.size(); ++k) sval.push_back(std::sqrt(q.pi()[s] / q.pi()[cols[k]]) * vals[k]);
    }
  }

  // y = S x
  void apply(const double* x, double* y) const noexcept {
    std::size_t off = 0;
    for (std::size_t s = 0; s < q.size(); ++s) {
      const auto cols = q.row_cols(s);
      double acc = diag[s] * x[s];
      for (std::size_t k = 0; k < cols.size(); ++k) acc += sval[off + k] * x[cols[k]];
      off += cols.size();
      y[s] = acc;
    }
  }

  // dense column-major A = -S
  std::vector<double> dense_negated() const {
    const std::size_t n = q.size();
    std::vector<double> a(n * n, 0.0);
    std::size_t off = 0;
    for (std::size_t s = 0; s < n; ++s) {
      a[s * n + s] = -diag[s];
      const auto cols = q.row_cols(s);
      for (std::size_t k = 0; k < cols.size(); ++k) a[cols[k] * n + s] = -sval[off + k];
      off += cols.size();
    }
    return a;
  }
};

void require_reversible(const RateMatrix& q) {
  double scale = 0.0;
  for (std::size_t s = 0; s < q.size(); ++s) scale = std::max(scale, q.pi()[s] * q.exit_rate(s));
  const double res = q.reversibility_residual();
  if (res > 1e-9 * std::max(scale, 1e-300))
    throw Error(Errc::not_reversible, "detailed balance residual " + std::to_string(res));
}

double dot(const double* a, const double* b, std::size_t n) noexcept { return cblas_ddot(static_cast<int>(n), a, 1, b, 1); }

void finish_gap(const RateMatrix& q, const SymOperator& op, std::vector<double> x, GapResult& out) {
  const std::size_t n = q.size();
  const double nx = std::sqrt(dot(x.data(), x.data(), n));
  for (auto& v : x) v /= nx;
  std::vector<double> y(n);
  op.apply(x.data(), y.data());
  double res = 0.0;
  for (std::size_t s = 0; s < n; ++s) res += (-y[s] - out.gap * x[s]) * (-y[s] - out.gap * x[s]);
  out.residual = std::sqrt(res);
  out.witness.resize(n);
  for (std::size_t s = 0; s < n; ++s) out.witness[s] = x[s] / std::sqrt(q.pi()[s]);
  out.variational_ratio = dirichlet_form(q, out.witness) / variance(q.pi(), out.witness);
}

void dense_gap(const RateMatrix& q, const SymOperator& op, GapResult& out) {
  const auto n = static_cast<lapack_int>(q.size());
  auto a = op.dense_negated();
  std::vector<double> w(static_cast<std::size_t>(n)), z(static_cast<std::size_t>(n) * 2);
  std::vector<lapack_int> support(4);
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'U', n, a.data(), n, 0.0, 0.0, 1, 2, 0.0, &found,
                                         w.data(), z.data(), n, support.data());
  if (info != 0 || found < 2) throw Error(Errc::invalid_parameters, "dense eigensolver failed (info " + std::to_string(info) + ")");
  out.gap = w[1];
  out.method = "dense";
  finish_gap(q, op, std::vector<double>(z.begin() + n, z.begin() + 2 * n), out);
}

// Thick-restart Lanczos (Krylov-Schur form) for the largest eigenvalue of
// B = c I + S restricted to the complement of sqrt(pi), whose top eigenvalue
// is c - gap. Full reorthogonalization keeps the basis orthonormal.
void lanczos_gap(const RateMatrix& q, const SymOperator& op, const GapOptions& opt, GapResult& out) {
  const std::size_t n = q.size();
  const int m = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(opt.krylov_dim), n - 1));
  const int keep = std::min(opt.keep, m - 1);
  const double c = 2.0 * q.max_exit_rate();

  std::vector<double> v0(n);
  for (std::size_t s = 0; s < n; ++s) v0[s] = std::sqrt(q.pi()[s]);
  {
    const double nv = std::sqrt(dot(v0.data(), v0.data(), n));
    for (auto& x : v0) x /= nv;
  }
  std::vector<double> V(static_cast<std::size_t>(m + 1) * n);
  auto col = [&](int j) { return V.data() + static_cast<std::size_t>(j) * n; };

  CounterRng rng = CounterRng::stream(opt.seed, 0x4c616e);
  auto random_unit = [&](int j) {
    double* v = col(j);
    for (std::size_t s = 0; s < n; ++s) v[s] = rng.normal();
    for (int pass = 0; pass < 2; ++pass) {
      cblas_daxpy(static_cast<int>(n), -dot(v0.data(), v, n), v0.data(), 1, v, 1);
      for (int i = 0; i < j; ++i) cblas_daxpy(static_cast<int>(n), -dot(col(i), v, n), col(i), 1, v, 1);
    }
    const double nv = std::sqrt(dot(v, v, n));
    cblas_dscal(static_cast<int>(n), 1.0 / nv, v, 1);
  };
  random_unit(0);

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
  std::vector<double> w(n);
  int start = 0;
  for (int restart = 0; restart < opt.max_restarts; ++restart) {
    for (int j = start; j < m; ++j) {
      op.apply(col(j), w.data());
      cblas_daxpy(static_cast<int>(n), c, col(j), 1, w.data(), 1);
      ++out.iterations;
      for (int pass = 0; pass < 2; ++pass) {
        cblas_daxpy(static_cast<int>(n), -dot(v0.data(), w.data(), n), v0.data(), 1, w.data(), 1);
        for (int i = 0; i <= j; ++i) {
          const double h = dot(col(i), w.data(), n);
          H(i, j) += h;
          cblas_daxpy(static_cast<int>(n), -h, col(i), 1, w.data(), 1);
        }
      }
      const double beta = std::sqrt(dot(w.data(), w.data(), n));
      if (beta < 1e-13 * c) {
        H(j + 1, j) = 0.0;
        random_unit(j + 1);
      } else {
        H(j + 1, j) = beta;
        std::copy(w.begin(), w.end(), col(j + 1));
        cblas_dscal(static_cast<int>(n), 1.0 / beta, col(j + 1), 1);
      }
    }
    const Eigen::MatrixXd Hm = H.topRows(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (Hm + Hm.transpose()));
    const Eigen::VectorXd theta = es.eigenvalues();
    const Eigen::MatrixXd Y = es.eigenvectors();
    const Eigen::RowVectorXd b = H.row(m);
    const double resid = std::abs(b.dot(Y.col(m - 1)));
    if (resid < opt.tol || restart + 1 == opt.max_restarts) {
      std::vector<double> x(n, 0.0);
      for (int j = 0; j < m; ++j) cblas_daxpy(static_cast<int>(n), Y(j, m - 1), col(j), 1, x.data(), 1);
      out.gap = c - theta(m - 1);
      out.method = "lanczos";
      finish_gap(q, op, std::move(x), out);
      return;
    }
    // keep the top `keep` Ritz vectors; the residual vector becomes column keep
    const Eigen::MatrixXd Yk = Y.rightCols(keep);
    std::vector<double> newV(static_cast<std::size_t>(keep) * n);
    cblas_dgemm(CblasColMajor, CblasNoTrans, CblasNoTrans, static_cast<int>(n), keep, m, 1.0, V.data(),
                static_cast<int>(n), Yk.data(), m, 0.0, newV.data(), static_cast<int>(n));
    std::copy(col(m), col(m) + n, col(keep));
    std::copy(newV.begin(), newV.end(), V.begin());
    H.setZero();
    for (int i = 0; i < keep; ++i) {
      H(i, i) = theta(m - keep + i);
      H(keep, i) = b.dot(Yk.col(i));
    }
    start = keep;
  }
}

}  // namespace

GapResult exact_gap(const RateMatrix& q, const GapOptions& opt) {
  if (q.size() < 2) throw Error(Errc::invalid_parameters, "gap needs at least two states");
  require_reversible(q);
  const SymOperator op(q);
  GapResult out;
  if (q.size() <= opt.dense_max)
    dense_gap(q, op, out);
  else
    lanczos_gap(q, op, opt, out);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Smallest K with P(Poisson(m) > K) <= eps, from the Chernoff bound
// P(N >= j) <= e^{-m} (e m / j)^j for j > m.
std::size_t poisson_cutoff(double m, double eps) {
  const double le = std::log(eps);
  auto j = static_cast<std::size_t>(std::floor(m)) + 1;
  while (-m + static_cast<double>(j) * (1.0 + std::log(m) - std::log(static_cast<double>(j))) > le) ++j;
  return j - 1;
}

constexpr double kChunk = 100.0;  // Poisson mean per uniformization chunk

}  // namespace

std::vector<double> propagate(const RateMatrix& q, std::vector<double> mu, double t, double eps) {
  if (t < 0.0) throw Error(Errc::invalid_parameters, "negative time");
  const double lam = q.max_exit_rate();
  if (t == 0.0 || lam == 0.0) return mu;
  const std::size_t n = q.size();
  const int chunks = std::max(1, static_cast<int>(std::ceil(lam * t / kChunk)));
  const double m = lam * t / chunks;
  const double eps_chunk = eps / chunks;
  const std::size_t K = poisson_cutoff(m, eps_chunk);
  std::vector<double> v(n), w(n), acc(n);
  for (int c = 0; c < chunks; ++c) {
    v = mu;
    std::fill(acc.begin(), acc.end(), 0.0);
    double logw = -m;
    for (std::size_t k = 0;; ++k) {
      const double wk = std::exp(logw);
      for (std::size_t s = 0; s < n; ++s) acc[s] += wk * v[s];
      if (k == K) break;
      q.left_apply(v, w);
      for (std::size_t s = 0; s < n; ++s) v[s] += w[s] / lam;
      logw += std::log(m) - std::log(static_cast<double>(k + 1));
    }
    mu.swap(acc);
  }
  return mu;
}

std::vector<double> exact_tv_curve(const RateMatrix& q, std::vector<double> mu, std::span<const double> times,
                                   double eps) {
  std::vector<double> out;
  double now = 0.0;
  for (double t : times) {
    if (t < now) throw Error(Errc::invalid_parameters, "times must be sorted");
    mu = propagate(q, std::move(mu), t - now, eps);
    now = t;
    out.push_back(total_variation(mu, q.pi()));
  }
  return out;
}

std::vector<double> exact_tv_curve(const RateMatrix& q, std::size_t xi, std::span<const double> times, double eps) {
  std::vector<double> mu(q.size(), 0.0);
  mu.at(xi) = 1.0;
  return exact_tv_curve(q, std::move(mu), times, eps);
}

// ---------------------------------------------------------------------------

WorstCaseTv::WorstCaseTv(const RateMatrix& q, double t_min, const TmixOptions& opt)
    : n_(q.size()), t_min_(t_min), pi_(q.pi()) {
  require_reversible(q);
  const SymOperator op(q);
  const auto n = static_cast<lapack_int>(n_);
  double pi_min = 1.0;
  for (double p : pi_) pi_min = std::min(pi_min, p);
  const double spread = 2.0 * q.max_exit_rate();

  bool full = n_ <= opt.full_spectrum_max || !(t_min > 0.0);
  if (!full) {
    lambda_cut_ = std::log(0.5 * static_cast<double>(n_) / std::sqrt(pi_min) / opt.truncation) / t_min;
    full = lambda_cut_ >= spread;
  }
  std::vector<double> z;
  std::vector<double> w(n_);
  lapack_int found = 0;
  {
    auto a = op.dense_negated();
    std::vector<lapack_int> support(2 * n_);
    z.resize(n_ * n_);
    const lapack_int info =
        full ? LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'A', 'U', n, a.data(), n, 0.0, 0.0, 0, 0, 0.0, &found, w.data(),
                              z.data(), n, support.data())
             : LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'V', 'U', n, a.data(), n, -1.0, lambda_cut_, 0, 0, 0.0, &found,
                              w.data(), z.data(), n, support.data());
    if (info != 0) throw Error(Errc::invalid_parameters, "eigensolver failed (info " + std::to_string(info) + ")");
  }
  if (full) lambda_cut_ = std::numeric_limits<double>::infinity();
  // mode 0 is the stationary direction
  const std::size_t r = static_cast<std::size_t>(found) - 1;
  lambda_.assign(w.begin() + 1, w.begin() + found);
  u_.resize(n_ * r);
  r_.resize(n_ * r);
  for (std::size_t k = 0; k < r; ++k)
    for (std::size_t s = 0; s < n_; ++s) {
      const double v = z[(k + 1) * n_ + s];
      u_[s * r + k] = v / std::sqrt(pi_[s]);
      r_[s * r + k] = v * std::sqrt(pi_[s]);
    }
  dropped_.resize(n_);
  const double n_dropped = static_cast<double>(n_ - 1 - r);
  for (std::size_t s = 0; s < n_; ++s) dropped_[s] = 0.5 * n_dropped / std::sqrt(pi_[s]);
  trunc_ = full ? 0.0 : 0.5 * n_dropped / std::sqrt(pi_min) * std::exp(-lambda_cut_ * t_min);
}

double WorstCaseTv::operator()(double t, std::size_t* argmax) const {
  if (t < t_min_ * (1.0 - 1e-12) && std::isfinite(lambda_cut_))
    throw Error(Errc::invalid_parameters, "time below the truncation horizon");
  const std::size_t r = lambda_.size();
  std::vector<double> decay(r);
  for (std::size_t k = 0; k < r; ++k) decay[k] = std::exp(-lambda_[k] * t);
  const double tail = std::isfinite(lambda_cut_) ? std::exp(-lambda_cut_ * t) : 0.0;

  const std::size_t block = 256;
  std::vector<double> us(block * r), m(block * n_);
  double best = -1.0;
  std::size_t best_s = 0;
  for (std::size_t s0 = 0; s0 < n_; s0 += block) {
    const std::size_t b = std::min(block, n_ - s0);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t k = 0; k < r; ++k) us[i * r + k] = u_[(s0 + i) * r + k] * decay[k];
    if (r > 0)
      cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, static_cast<int>(b), static_cast<int>(n_),
                  static_cast<int>(r), 1.0, us.data(), static_cast<int>(r), r_.data(), static_cast<int>(r), 0.0,
                  m.data(), static_cast<int>(n_));
    else
      std::fill(m.begin(), m.end(), 0.0);
    for (std::size_t i = 0; i < b; ++i) {
      const double tv = 0.5 * cblas_dasum(static_cast<int>(n_), m.data() + i * n_, 1) + dropped_[s0 + i] * tail;
      if (tv > best) {
        best = tv;
        best_s = s0 + i;
      }
    }
  }
  if (argmax) *argmax = best_s;
  return best;
}

namespace {

constexpr double kThreshold = 0.18393972058572117;  // 1/(2e)

struct Bracket {
  double lo, hi;
};

// Crossing of ||mu^xi_t - pi|| through 1/(2e) by uniformization, keeping the
// law at the lower end so each bisection step propagates only the gap.
Bracket start_crossing(const RateMatrix& q, std::size_t xi, double rel_tol) {
  std::vector<double> mu(q.size(), 0.0);
  mu[xi] = 1.0;
  if (total_variation(mu, q.pi()) <= kThreshold) return {0.0, 0.0};
  double lo = 0.0, hi = 1.0 / std::max(q.max_exit_rate(), 1e-12);
  std::vector<double> at_lo = mu;
  for (;;) {
    auto next = propagate(q, at_lo, hi - lo);
    if (total_variation(next, q.pi()) <= kThreshold) break;
    at_lo = std::move(next);
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    auto next = propagate(q, at_lo, mid - lo);
    if (total_variation(next, q.pi()) <= kThreshold) {
      hi = mid;
    } else {
      at_lo = std::move(next);
      lo = mid;
    }
  }
  return {lo, hi};
}

std::vector<std::size_t> default_hints(const RateMatrix& q) {
  std::vector<std::size_t> idx(q.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t k = std::min<std::size_t>(2, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    [&](std::size_t a, std::size_t b) { return q.pi()[a] < q.pi()[b]; });
  idx.resize(k);
  return idx;
}

struct TmixState {
  TmixResult tm;
  std::unique_ptr<WorstCaseTv> sup;
};

TmixState compute_tmix(const RateMatrix& q, const TmixOptions& opt) {
  TmixState st;
  auto hints = opt.hints.empty() ? default_hints(q) : opt.hints;
  Bracket best{0.0, 0.0};
  for (std::size_t h : hints) {
    const Bracket b = start_crossing(q, h, opt.rel_tol);
    if (b.hi > best.hi) {
      best = b;
      st.tm.worst_start = h;
    }
  }
  // sup TV >= TV from any hint, so t_mix >= best.lo
  st.sup = std::make_unique<WorstCaseTv>(q, best.lo, opt);
  st.tm.modes = st.sup->modes();
  st.tm.truncation_bound = st.sup->truncation_bound();
  double lo = best.lo, hi = best.hi;
  std::size_t arg = st.tm.worst_start;
  if (hi == 0.0 || (*st.sup)(hi, &arg) > kThreshold) {
    // a non-hint start is slower: widen and bisect on the full supremum
    hi = std::max(hi, 1e-3);
    while ((*st.sup)(hi, &arg) > kThreshold) {
      lo = hi;
      hi *= 2.0;
    }
    while (hi - lo > std::max(opt.rel_tol, 1e-5) * hi) {
      const double mid = 0.5 * (lo + hi);
      std::size_t a2 = 0;
      if ((*st.sup)(mid, &a2) > kThreshold) {
        lo = mid;
        arg = a2;
      } else {
        hi = mid;
      }
    }
    st.tm.worst_start = arg;
  }
  st.tm.tmix = hi;
  st.tm.lower = lo;
  return st;
}

}  // namespace

TmixResult exact_tmix(const RateMatrix& q, const TmixOptions& opt) { return compute_tmix(q, opt).tm; }

MixingReport mixing_law_report(const RateMatrix& q, int kmax, const TmixOptions& opt) {
  auto st = compute_tmix(q, opt);
  MixingReport rep;
  rep.tm = st.tm;
  rep.worst_excess = -std::numeric_limits<double>::infinity();
  double sup0 = 0.0;
  for (double p : q.pi()) sup0 = std::max(sup0, 1.0 - p);
  for (int k = 0; k <= kmax; ++k) {
    const double t = k * st.tm.tmix;
    const double sup = k == 0 ? sup0 : (*st.sup)(t);
    const double bound = std::exp(-std::floor(t / st.tm.tmix));
    rep.checks.push_back({t, sup, bound});
    rep.worst_excess = std::max(rep.worst_excess, sup - bound);
  }
  rep.ok = rep.worst_excess <= 1e-12;
  return rep;
}

std::vector<double> censored_propagate(const RateMatrix& q_even, const RateMatrix& q_odd, std::vector<double> mu,
                                       double T, double t, double eps) {
  if (!(T > 0.0)) throw Error(Errc::invalid_parameters, "half-epoch must be positive");
  const auto halves = static_cast<long>(std::ceil(t / T - 1e-12));
  for (long k = 0; k < halves; ++k) {
    const double a = k * T, b = std::min((k + 1) * T, t);
    if (b <= a) break;
    // odd sites are frozen in the first half of each epoch
    mu = propagate(k % 2 == 0 ? q_even : q_odd, std::move(mu), b - a, eps / static_cast<double>(halves));
  }
  return mu;
}

}  // namespace ifdyn

namespace ifdyn {

namespace {

struct Indicator {
  bool on_sum;
  std::size_t site;
  long level;
  double weight;
};

std::vector<Indicator> draw_indicators(const StateSpace& space, CounterRng& rng) {
  long lo = 0, hi = 0;
  long sum_lo = 0, sum_hi = 0;
  {
    const auto a = space.state(0);
    const auto b = space.state(space.size() - 1);
    lo = *std::min_element(a.begin(), a.end());
    hi = *std::max_element(b.begin(), b.end());
    for (std::size_t k = 0; k < space.size(); ++k) {
      const auto c = space.state(k);
      long s = 0;
      for (int x : c) s += x;
      if (k == 0 || s < sum_lo) sum_lo = s;
      if (k == 0 || s > sum_hi) sum_hi = s;
    }
  }
  std::vector<Indicator> out(1 + rng.below(4));
  for (auto& ind : out) {
    ind.on_sum = rng.uniform() < 0.3;
    ind.site = static_cast<std::size_t>(rng.below(space.dim()));
    ind.level = ind.on_sum ? sum_lo + static_cast<long>(rng.below(static_cast<std::uint64_t>(sum_hi - sum_lo + 1)))
                           : lo + static_cast<long>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
    ind.weight = rng.exponential(1.0);
  }
  return out;
}

double evaluate(const std::vector<Indicator>& inds, std::span<const int> c) {
  double v = 0.0;
  long sum = 0;
  for (int x : c) sum += x;
  for (const auto& ind : inds)
    if ((ind.on_sum ? sum : c[ind.site]) >= ind.level) v += ind.weight;
  return v;
}

}  // namespace

std::vector<std::size_t> extremal_states(const StateSpace& space) {
  if (space.size() == 0) return {};
  std::size_t lo = 0, hi = 0;
  long lo_sum = 0, hi_sum = 0;
  for (std::size_t k = 0; k < space.size(); ++k) {
    const auto s = space.state(k);
    const long sum = std::accumulate(s.begin(), s.end(), 0L);
    if (k == 0 || sum < lo_sum) lo = k, lo_sum = sum;
    if (k == 0 || sum > hi_sum) hi = k, hi_sum = sum;
  }
  return lo == hi ? std::vector<std::size_t>{lo} : std::vector<std::size_t>{lo, hi};
}

std::vector<std::vector<double>> random_increasing_functions(const StateSpace& space, std::size_t count,
                                                             std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  for (std::size_t j = 0; j < count; ++j) {
    CounterRng rng = CounterRng::stream(seed, 0x696e63, j);
    const auto inds = draw_indicators(space, rng);
    std::vector<double> f(space.size());
    for (std::size_t k = 0; k < space.size(); ++k) f[k] = evaluate(inds, space.state(k));
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<std::vector<double>> random_test_functions(const StateSpace& space, std::size_t count, std::uint64_t seed) {
  std::vector<std::vector<double>> out;
  for (std::size_t j = 0; j < count; ++j) {
    CounterRng rng = CounterRng::stream(seed, 0x746573, j);
    const auto inds = draw_indicators(space, rng);
    const double mix = rng.uniform();
    std::vector<double> f(space.size());
    for (std::size_t k = 0; k < space.size(); ++k) f[k] = (1.0 - mix) * evaluate(inds, space.state(k)) + mix * rng.normal();
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace ifdyn
