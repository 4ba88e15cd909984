#include <cmath>

#include "doctest.h"
#include "ifdyn/block.hpp"
#include "ifdyn/error.hpp"

using namespace ifdyn;

TEST_CASE("thresholds") {
  CHECK(level_height(2) == doctest::Approx(2.25));
  CHECK(min_overlap(4) == doctest::Approx(std::pow(1.5, 3.0)));
  CHECK(split_count(5) == doctest::Approx(1.5));
  CHECK(recursion_delta(6) == doctest::Approx(1.0 / 1.5));
}

TEST_CASE("decompose: no split when already short enough") {
  const auto r = decompose({3, 5}, 5);  // (3/2)^4 = 5.06
  CHECK(r.splits.empty());
  CHECK(!r.diagnostic.empty());
}

TEST_CASE("decompose: small indices are infeasible, large ones satisfy (a)-(c)") {
  const auto tiny = decompose({3, 6}, 5);
  CHECK(tiny.splits.empty());
  CHECK(tiny.diagnostic.find("fit") != std::string::npos);

  for (int n : {60, 70}) {
    const auto H = static_cast<long>(std::floor(level_height(n - 1))) + 1;
    const auto r = decompose({8, H}, n);
    REQUIRE(!r.splits.empty());
    CHECK(r.splits.size() >= static_cast<std::size_t>(std::floor(split_count(n))));
    CHECK(valid_splits(r.splits, static_cast<long>(std::floor(level_height(n - 1))),
                       static_cast<long>(std::ceil(min_overlap(n)))));
    for (const auto& s : r.splits) {
      CHECK(s.h1 <= std::floor(level_height(n - 1)));
      CHECK(s.h2() <= std::floor(level_height(n - 1)));
      CHECK(s.overlap >= min_overlap(n));
    }
  }
}

TEST_CASE("decompose_with on a tiny rectangle gives disjoint overlaps") {
  const auto r = decompose_with({3, 6}, 5, 1, 2);
  REQUIRE(r.splits.size() >= 2);
  CHECK(valid_splits(r.splits, 5, 1));
  for (std::size_t a = 0; a < r.splits.size(); ++a)
    for (std::size_t b = 0; b < a; ++b)
      CHECK((r.splits[b].h1 < r.splits[a].floor_level() || r.splits[a].h1 < r.splits[b].floor_level()));
  // overlapping strips are rejected
  std::vector<BlockSplit> bad{{{3, 6}, 4, 2, 0}, {{3, 6}, 5, 2, 0}};
  CHECK(!valid_splits(bad, 5, 1));
}

TEST_CASE("block kernel is reversible and stationary; constants are annihilated") {
  for (int base : {1, 2, 3})
    for (long H : {3L, 6L}) {
      const BlockSplit s{{base, H}, H - 1, 2, 0};
      const auto space = rectangle_space(s.whole);
      const auto q = block_generator(space, s);
      CHECK(q.stationarity_residual() < 1e-12);
      CHECK(q.reversibility_residual() < 1e-12);
      CHECK(q.row_sum_residual() < 1e-12);
      std::vector<double> one(space.size(), 1.0), out(space.size());
      q.right_apply(one, out);
      for (double x : out) CHECK(std::abs(x) < 1e-12);
    }
}

TEST_CASE("block Dirichlet form equals the two conditional variances") {
  const BlockSplit s{{3, 5}, 4, 2, 0};
  const auto space = rectangle_space(s.whole);
  const auto full = build_generator(space);
  const auto q = block_generator(space, s);
  for (const auto& f : random_test_functions(space, 20, 3)) {
    const auto t = variance_terms(space, full, s, f);
    CHECK(dirichlet_form(q, f) == doctest::Approx(t.block_dirichlet).epsilon(1e-10));
    CHECK(t.g_dirichlet + t.fiber_dirichlet == doctest::Approx(t.dirichlet + t.overlap_dirichlet).epsilon(1e-12));
  }
}

TEST_CASE("G always holds: two unconditional blocks have gap at least one") {
  for (int base : {1, 2, 3}) {
    const BlockSplit s{{base, 4}, 4, 2, 0};
    CHECK(exact_gap(block_generator(rectangle_space(s.whole), s)).gap >= 1.0 - 1e-12);
  }
}

TEST_CASE("block gap increases toward one with the overlap height") {
  const long H = 6;
  double prev = 0.0;
  for (long hI = 1; hI <= 5; ++hI) {
    const long h1 = (H + hI + 1) / 2;
    const BlockSplit s{{3, H}, h1, hI, 0};
    const double g = exact_gap(block_generator(rectangle_space(s.whole), s)).gap;
    CHECK(g >= prev - 1e-12);
    CHECK(g <= 1.0 + 1e-12);
    prev = g;
  }
}

TEST_CASE("variance inequalities hold for constant and random functions") {
  const BlockSplit s{{3, 6}, 4, 2, 0};
  const auto space = rectangle_space(s.whole);
  std::vector<std::vector<double>> constant{std::vector<double>(space.size(), 2.5)};
  const auto flat = variance_decomposition_check(s.whole, s, constant, reference_gamma(s));
  CHECK(std::abs(flat.margin_g) < 1e-12);
  CHECK(std::abs(flat.margin_fiber) < 1e-12);
  CHECK(flat.ok);
  const auto rep = variance_decomposition_check(s.whole, s, 200, 11);
  CHECK(rep.functions == 200);
  CHECK(rep.ok);
  CHECK(rep.margin_g >= -1e-10);
  CHECK(rep.margin_fiber >= -1e-10);
  CHECK(rep.worst_block_ratio <= 1.0 / rep.block_gap + 1e-10);
}

TEST_CASE("reference gamma covers the run chains") {
  const BlockSplit s{{2, 4}, 3, 1, 0};
  const double g = reference_gamma(s);
  const double lower = 1.0 / exact_gap(build_generator(rectangle_space({2, 3}))).gap;
  CHECK(g >= lower - 1e-12);
}

TEST_CASE("gamma table is nondecreasing and reports the recursion ratio") {
  const auto rows = gamma_table(3, 4);
  REQUIRE(rows.size() == 5);
  for (std::size_t k = 1; k < rows.size(); ++k) {
    CHECK(rows[k].gamma >= rows[k - 1].gamma - 1e-12);
    CHECK(rows[k].allowed == doctest::Approx(1.0 + recursion_delta(rows[k].n)));
  }
}
