#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <set>

#include "doctest.h"
#include "ifdyn/error.hpp"
#include "ifdyn/sos.hpp"
#include "ifdyn/spectral.hpp"
#include "ifdyn/surface.hpp"

using namespace ifdyn;

namespace {
const double E2 = std::exp(-2.0);

RateMatrix sos_generator(int L, int h, int M) {
  const auto space = enumerate_states(SosPath::minimal(SosGeometry::bounded(L, h, M)));
  return build_generator(space);
}

// dense generator matrix assembled independently from the CSR accessors
Eigen::MatrixXd dense(const RateMatrix& q) {
  const auto n = static_cast<Eigen::Index>(q.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < q.size(); ++s) {
    const auto cols = q.row_cols(s);
    const auto vals = q.row_rates(s);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      a(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(cols[k])) += vals[k];
      a(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) -= vals[k];
    }
  }
  return a;
}

// second smallest |Re lambda| of -Q from a general (nonsymmetric) eigensolver
double oracle_gap(const RateMatrix& q) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(-dense(q), false);
  std::vector<double> re;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) re.push_back(es.eigenvalues()(i).real());
  std::sort(re.begin(), re.end());
  return re[1];
}

// law at time t via the full eigendecomposition of the nonsymmetric matrix
std::vector<double> oracle_law(const RateMatrix& q, std::size_t xi, double t) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(dense(q));
  const Eigen::MatrixXcd V = es.eigenvectors();
  const Eigen::VectorXcd d = (es.eigenvalues() * t).array().exp();
  const Eigen::MatrixXcd P = V * d.asDiagonal() * V.inverse();
  std::vector<double> out(q.size());
  for (std::size_t s = 0; s < q.size(); ++s)
    out[s] = P(static_cast<Eigen::Index>(xi), static_cast<Eigen::Index>(s)).real();
  return out;
}

std::size_t brute_surface_count(const HeightField& like, int lo, int hi) {
  const Region& r = like.region();
  std::size_t count = 0;
  std::vector<int> v(like.size(), lo);
  std::function<void(std::size_t)> rec = [&](std::size_t s) {
    if (s == v.size()) {
      HeightField f = like;
      for (std::size_t i = 0; i < v.size(); ++i) f.set(i, v[i]);
      if (f.is_valid()) ++count;
      return;
    }
    for (int x = lo; x <= hi; ++x) {
      v[s] = x;
      rec(s + 1);
    }
  };
  (void)r;
  rec(0);
  return count;
}
}  // namespace

TEST_CASE("two-state chain: gap is the sum of the rates") {
  const double p = 0.3, q = 1.7;
  const auto rm = RateMatrix::from_triplets(2, {{0, 1, p}, {1, 0, q}}, {q / (p + q), p / (p + q)});
  const auto g = exact_gap(rm);
  CHECK(g.gap == doctest::Approx(p + q).epsilon(1e-12));
  CHECK(g.method == "dense");
  CHECK(g.variational_ratio == doctest::Approx(p + q).epsilon(1e-10));

  // law from state 0: pi0 + (1 - pi0) e^{-(p+q)t}
  for (double t : {0.1, 1.0, 3.0}) {
    const auto mu = propagate(rm, {1.0, 0.0}, t, 1e-13);
    const double pi0 = q / (p + q);
    CHECK(mu[0] == doctest::Approx(pi0 + (1 - pi0) * std::exp(-(p + q) * t)).epsilon(1e-11));
  }
}

TEST_CASE("triplets: duplicates summed, diagonal dropped, rows sum to zero") {
  const auto rm = RateMatrix::from_triplets(3, {{0, 1, 1.0}, {0, 1, 0.5}, {1, 1, 9.0}, {1, 2, 2.0}, {2, 0, 1.0}},
                                            {1.0 / 3, 1.0 / 3, 1.0 / 3});
  CHECK(rm.nonzeros() == 3);
  CHECK(rm.rate(0, 1) == 1.5);
  CHECK(rm.rate(1, 1) == 0.0);
  CHECK(rm.exit_rate(1) == 2.0);
  CHECK(rm.row_sum_residual() < 1e-15);
  CHECK(rm.irreducible());
  CHECK_THROWS_AS(exact_gap(rm), Error);
  CHECK(!RateMatrix::from_triplets(2, {{0, 1, 1.0}}, {0.5, 0.5}).irreducible());
}

TEST_CASE("SOS state counts and generator structure") {
  const auto space = enumerate_states(SosPath::minimal(SosGeometry::bounded(4, 0, 4)));
  CHECK(space.size() == 6561);
  for (std::size_t k : {std::size_t{0}, std::size_t{17}, std::size_t{6560}}) {
    const auto found = space.find(space.state(k));
    REQUIRE(found);
    CHECK(*found == k);
  }
  const auto q = build_generator(space);
  CHECK(q.reversibility_residual() < 1e-15);
  CHECK(q.stationarity_residual() < 1e-14);
  double total = 0.0;
  for (double p : q.pi()) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(enumerate_states(SosPath::minimal(SosGeometry::bounded(8, 0, 10)), 1000), Error);
}

TEST_CASE("surface state count matches brute force on 2x2 and 2x3") {
  const SlopeVector n = SlopeVector::normalized(1, 1, 1);
  for (auto [a, b] : {std::pair{2, 2}, std::pair{2, 3}}) {
    auto r = std::make_shared<const Region>(Region::rectangle(a, b));
    const auto plane = planar_surface(r, n);
    const auto space = enumerate_states(plane);
    CHECK(space.size() == brute_surface_count(plane, -8, 8));
    const auto q = build_generator(space);
    CHECK(q.reversibility_residual() < 1e-15);
    CHECK(q.irreducible());
  }
}

TEST_CASE("single-site gaps: three-state window and wide-window limit") {
  // on {-1, 0, 1} the odd eigenfunction f = eta decays at the favored rate
  CHECK(exact_gap(sos_generator(1, 0, 1)).gap == doctest::Approx(1.0 / (1.0 + E2)).epsilon(1e-12));
  // birth-death drift toward 0 with up rate p and down rate q: the spectrum
  // edge (sqrt q - sqrt p)^2 = 1 - sech(1) is approached from above
  const double edge = 1.0 - 1.0 / std::cosh(1.0);
  double prev = 1.0;
  for (int M : {2, 6, 20, 60}) {
    const double g = exact_gap(sos_generator(1, 0, M)).gap;
    CHECK(g < prev);
    CHECK(g > edge);
    prev = g;
  }
  CHECK(prev - edge < 1e-3);
}

TEST_CASE("gap agrees with a nonsymmetric eigensolver") {
  for (auto [L, h, M] : {std::tuple{2, 0, 2}, std::tuple{3, 1, 1}, std::tuple{3, 2, 2}}) {
    const auto q = sos_generator(L, h, M);
    const auto g = exact_gap(q);
    CHECK(g.gap == doctest::Approx(oracle_gap(q)).epsilon(1e-9));
    CHECK(g.residual < 1e-9);
    CHECK(g.variational_ratio == doctest::Approx(g.gap).epsilon(1e-9));
  }
}

TEST_CASE("Lanczos agrees with the dense path") {
  const auto q = sos_generator(3, 0, 4);  // 729 states
  const auto dense_gap = exact_gap(q);
  GapOptions opt;
  opt.dense_max = 0;
  const auto kr = exact_gap(q, opt);
  CHECK(kr.method == "lanczos");
  CHECK(kr.gap == doctest::Approx(dense_gap.gap).epsilon(1e-9));
  CHECK(kr.residual < 1e-7);
  CHECK(kr.variational_ratio == doctest::Approx(kr.gap).epsilon(1e-9));
}

TEST_CASE("rescaling rates rescales gap and mixing time") {
  const auto q = sos_generator(2, 0, 2);
  std::vector<Triplet> t2;
  for (std::size_t s = 0; s < q.size(); ++s)
    for (std::size_t k = 0; k < q.row_cols(s).size(); ++k) t2.push_back({s, q.row_cols(s)[k], 3.0 * q.row_rates(s)[k]});
  const auto q3 = RateMatrix::from_triplets(q.size(), t2, q.pi());
  CHECK(exact_gap(q3).gap == doctest::Approx(3.0 * exact_gap(q).gap).epsilon(1e-10));
  CHECK(exact_tmix(q3).tmix == doctest::Approx(exact_tmix(q).tmix / 3.0).epsilon(1e-5));
}

TEST_CASE("uniformization matches the eigen oracle; TV starts at 1 - pi and decreases") {
  const auto q = sos_generator(2, 1, 2);
  const std::size_t xi = 3;
  for (double t : {0.05, 0.7, 4.0, 30.0}) {
    const auto mu = propagate(q, [&] {
      std::vector<double> d(q.size(), 0.0);
      d[xi] = 1.0;
      return d;
    }(), t, 1e-13);
    const auto ref = oracle_law(q, xi, t);
    for (std::size_t s = 0; s < q.size(); ++s) CHECK(mu[s] == doctest::Approx(ref[s]).epsilon(1e-9).scale(1.0));
  }
  std::vector<double> times;
  for (int k = 0; k <= 40; ++k) times.push_back(0.25 * k);
  const auto tv = exact_tv_curve(q, xi, times);
  CHECK(tv[0] == doctest::Approx(1.0 - q.pi()[xi]).epsilon(1e-14));
  for (std::size_t k = 1; k < tv.size(); ++k) CHECK(tv[k] <= tv[k - 1] + 1e-12);
}

TEST_CASE("worst-case TV equals the maximum of per-start curves") {
  const auto q = sos_generator(3, 0, 2);  // 125 states
  const WorstCaseTv sup(q, 0.0, {});
  for (double t : {0.5, 2.0, 8.0}) {
    double best = 0.0;
    for (std::size_t s = 0; s < q.size(); ++s) {
      const double times[] = {t};
      best = std::max(best, exact_tv_curve(q, s, times, 1e-13)[0]);
    }
    CHECK(sup(t) == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("truncated spectrum stays within its bound of the full one") {
  const auto q = sos_generator(3, 0, 3);  // 343 states
  TmixOptions trunc;
  trunc.full_spectrum_max = 0;
  const double t0 = 10.0;
  const WorstCaseTv full(q, t0, {});
  const WorstCaseTv cut(q, t0, trunc);
  CHECK(cut.modes() < full.modes());
  CHECK(cut.truncation_bound() < 1e-12);
  for (double t : {10.0, 14.0, 25.0}) {
    CHECK(cut(t) >= full(t) - 1e-12);
    CHECK(cut(t) <= full(t) + 1e-12);
  }
}

TEST_CASE("mixing time brackets the 1/(2e) crossing and obeys the exponential law") {
  const auto q = sos_generator(3, 0, 2);
  const auto rep = mixing_law_report(q);
  const WorstCaseTv sup(q, 0.0, {});
  const double thr = 1.0 / (2.0 * std::exp(1.0));
  CHECK(sup(rep.tm.tmix) <= thr + 1e-12);
  CHECK(sup(rep.tm.lower) > thr - 1e-12);
  CHECK(rep.tm.tmix - rep.tm.lower <= 1e-5 * rep.tm.tmix);
  CHECK(rep.checks.size() == 6);
  CHECK(rep.ok);
  // a single-site chain mixes from its lowest-probability start
  const auto q1 = sos_generator(1, 0, 3);
  const auto t1 = exact_tmix(q1);
  CHECK(q1.pi()[t1.worst_start] == doctest::Approx(*std::min_element(q1.pi().begin(), q1.pi().end())));
}

TEST_CASE("coupling time dominates the exact distance on one site") {
  const SosModel m{1, 0, 3, false};
  const auto q = sos_generator(1, 0, 3);
  const WorstCaseTv sup(q, 0.0, {});
  const int reps = 4000;
  std::vector<double> times;
  for (int r = 0; r < reps; ++r) times.push_back(coalescence_time(m, 11, static_cast<std::uint64_t>(r), 1e3).time);
  for (double t : {0.5, 1.0, 2.0, 4.0}) {
    const double surv = static_cast<double>(std::count_if(times.begin(), times.end(), [&](double x) { return x > t; })) / reps;
    const double se = std::sqrt(std::max(surv * (1 - surv), 1e-4) / reps);
    CHECK(surv + 4 * se >= sup(t));
  }
}

TEST_CASE("masked generators preserve pi and alternate correctly") {
  const auto space = enumerate_states(SosPath::minimal(SosGeometry::bounded(3, 0, 2)));
  const std::vector<char> even{0, 1, 0}, odd{1, 0, 1};
  const auto qe = build_generator(space, even);
  const auto qo = build_generator(space, odd);
  const auto qf = build_generator(space);
  CHECK(qe.stationarity_residual() < 1e-15);
  CHECK(qo.stationarity_residual() < 1e-15);
  CHECK(qe.nonzeros() + qo.nonzeros() == qf.nonzeros());
  const auto kept = censored_propagate(qe, qo, qf.pi(), 0.3, 2.0);
  CHECK(total_variation(kept, qf.pi()) < 1e-10);
  std::vector<double> d(space.size(), 0.0);
  d[0] = 1.0;
  // first half-epoch runs the even-site generator only
  const auto a = censored_propagate(qe, qo, d, 0.3, 0.2);
  const auto b = propagate(qe, d, 0.2, 1e-12);
  CHECK(total_variation(a, b) < 1e-10);
  const auto c = censored_propagate(qe, qo, d, 0.3, 0.5);
  const auto e = propagate(qo, propagate(qe, d, 0.3, 1e-12), 0.2, 1e-12);
  CHECK(total_variation(c, e) < 1e-10);
}
