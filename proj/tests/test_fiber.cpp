#include "doctest.h"

#include <cmath>
#include <map>

#include "equidist/fiber.hpp"

using namespace equidist;

namespace {
Vec v2(cplx a, cplx b) {
  Vec v(2);
  v << a, b;
  return v;
}
Vec v3(cplx a, cplx b, cplx c) {
  Vec v(3);
  v << a, b, c;
  return v;
}
ProjectivePoint pp2(cplx a, cplx b) { return ProjectivePoint::canonicalize(v2(a, b)); }
ProjectivePoint pp3(cplx a, cplx b, cplx c) { return ProjectivePoint::canonicalize(v3(a, b, c)); }

bool fiber_has(const WeightedFiber& f, const ProjectivePoint& p, long long mult, double tol = 1e-8) {
  for (const auto& a : f.points)
    if (fs_distance(a.point, p) < tol && a.multiplicity == mult) return true;
  return false;
}
}  // namespace

TEST_CASE("fiber_k1 examples") {
  SolverSettings s;
  auto z2 = preset_map("z2");

  auto f1 = fiber_k1(z2, pp2(1, 1), s);
  REQUIRE(f1.points.size() == 2);
  CHECK(fiber_has(f1, pp2(1, 1), 1));
  CHECK(fiber_has(f1, pp2(-1, 1), 1));
  CHECK(f1.residual <= 1e-8);

  auto f2 = fiber_k1(z2, pp2(0, 1), s);
  REQUIRE(f2.points.size() == 1);
  CHECK(fiber_has(f2, pp2(0, 1), 2, 1e-6));

  auto bas = preset_map("basilica");
  auto f3 = fiber_k1(bas, pp2(-1, 1), s);
  REQUIRE(f3.points.size() == 1);
  CHECK(fiber_has(f3, pp2(0, 1), 2, 1e-6));
}

TEST_CASE("fiber_k2 examples") {
  SolverSettings s;
  auto t2 = preset_map("torus2");

  auto f1 = fiber_k2(t2, pp3(1, 1, 1), s);
  REQUIRE(f1.points.size() == 4);
  for (double sz : {1.0, -1.0})
    for (double sw : {1.0, -1.0}) CHECK(fiber_has(f1, pp3(sz, sw, 1), 1));

  auto f2 = fiber_k2(t2, pp3(0, 1, 1), s);
  REQUIRE(f2.points.size() == 2);
  CHECK(fiber_has(f2, pp3(0, 1, 1), 2, 1e-6));
  CHECK(fiber_has(f2, pp3(0, -1, 1), 2, 1e-6));

  auto f3 = fiber_k2(t2, pp3(0, 0, 1), s);
  REQUIRE(f3.points.size() == 1);
  CHECK(f3.points[0].multiplicity == 4);
  CHECK(fs_distance(f3.points[0].point, pp3(0, 0, 1)) < 1e-6);
}

TEST_CASE("backward_tree examples") {
  SolverSettings s;
  auto z2 = preset_map("z2");

  auto t1 = backward_tree(z2, pp2(1, 1), 3, s);
  REQUIRE(t1.points.size() == 8);
  for (int j = 0; j < 8; ++j) {
    double a = 6.283185307179586 * j / 8.0;
    CHECK(fiber_has(t1, pp2(cplx(std::cos(a), std::sin(a)), 1), 1, 1e-7));
  }

  auto t5 = backward_tree(z2, pp2(0, 1), 5, s);
  REQUIRE(t5.points.size() == 1);
  CHECK(t5.points[0].multiplicity == 32);

  // basilica n=2 from a=1: (z^2-1)^2 - 1 = 1, i.e. z^2 = 1 +- sqrt(2)
  auto bas = preset_map("basilica");
  auto tb = backward_tree(bas, pp2(1, 1), 2, s);
  CHECK(tb.total_multiplicity() == 4);
  double r1 = std::sqrt(1.0 + std::sqrt(2.0));
  double r2 = std::sqrt(std::sqrt(2.0) - 1.0);
  CHECK(fiber_has(tb, pp2(r1, 1), 1));
  CHECK(fiber_has(tb, pp2(-r1, 1), 1));
  CHECK(fiber_has(tb, pp2(cplx(0, r2), 1), 1));
  CHECK(fiber_has(tb, pp2(cplx(0, -r2), 1), 1));

  CHECK_THROWS_AS(backward_tree(z2, pp2(1, 1), 40, SolverSettings{}), TreeTooLarge);
}

TEST_CASE("mass conservation and pushforward consistency") {
  SolverSettings s;
  Rng rng(2024);
  for (const char* name : {"z2", "z3", "basilica", "cheb"}) {
    auto f = preset_map(name);
    for (int t = 0; t < 25; ++t) {
      auto x = random_point(1, rng);
      auto fb = fiber_k1(f, x, s);
      CHECK(fb.total_multiplicity() == f.degree());
      for (const auto& a : fb.points) CHECK(fs_distance(f.evaluate(a.point), x) < 1e-8);
    }
  }
  auto t2 = preset_map("torus2");
  for (int t = 0; t < 15; ++t) {
    auto x = random_point(2, rng);
    auto fb = fiber_k2(t2, x, s);
    CHECK(fb.total_multiplicity() == 4);
    for (const auto& a : fb.points) CHECK(fs_distance(t2.evaluate(a.point), x) < 1e-8);
  }
}

namespace {
// substitute binary forms (P, Q) into a binary form R: R(P(z,w), Q(z,w))
Coeffs binary_substitute(const Coeffs& r, const Coeffs& p, const Coeffs& q) {
  int d = static_cast<int>(r.size()) - 1;
  std::vector<Coeffs> ppow{Coeffs::Ones(1)}, qpow{Coeffs::Ones(1)};
  for (int i = 1; i <= d; ++i) {
    ppow.push_back(binary_mul(ppow.back(), p));
    qpow.push_back(binary_mul(qpow.back(), q));
  }
  int outdeg = d * (static_cast<int>(p.size()) - 1);
  Coeffs out = Coeffs::Zero(outdeg + 1);
  for (int j = 0; j <= d; ++j) {
    if (r[j] == cplx(0, 0)) continue;
    Coeffs term = binary_mul(ppow[j], qpow[d - j]);
    out += r[j] * term;
  }
  return out;
}
}  // namespace

TEST_CASE("tree agrees with fiber of the composed iterate (k=1, d=2, n=2)") {
  SolverSettings s;
  Rng rng(5);
  auto bas = preset_map("basilica");
  Coeffs p2 = binary_substitute(bas.components()[0], bas.components()[0], bas.components()[1]);
  Coeffs q2 = binary_substitute(bas.components()[1], bas.components()[0], bas.components()[1]);
  HomogeneousMap bas2(1, 4, {p2, q2}, "basilica^2");
  for (int t = 0; t < 10; ++t) {
    auto a = random_point(1, rng);
    auto tree = backward_tree(bas, a, 2, s);
    auto direct = fiber_k1(bas2, a, s);
    REQUIRE(tree.points.size() == direct.points.size());
    for (size_t i = 0; i < tree.points.size(); ++i) {
      CHECK(fs_distance(tree.points[i].point, direct.points[i].point) < 1e-7);
      CHECK(tree.points[i].multiplicity == direct.points[i].multiplicity);
    }
  }
}

TEST_CASE("sample_inverse_branch laws") {
  SolverSettings s;
  auto z2 = preset_map("z2");

  // a = 1: preimages +-1 with probability 1/2 each
  int n_plus = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto y = sample_inverse_branch(z2, pp2(1, 1), 1, s, i);
    if (fs_distance(y, pp2(1, 1)) < 1e-9)
      ++n_plus;
    else
      CHECK(fs_distance(y, pp2(-1, 1)) < 1e-9);
  }
  double chi2 = std::pow(n_plus - draws / 2.0, 2) / (draws / 4.0);
  CHECK(chi2 < 10.83);  // p > 0.001, 1 dof

  // totally ramified: always stays at 0
  for (int i = 0; i < 20; ++i)
    CHECK(fs_distance(sample_inverse_branch(z2, pp2(0, 1), 4 + i % 3, s, i), pp2(0, 1)) < 1e-9);

  // torus2: uniform over the 4 sign choices
  auto t2 = preset_map("torus2");
  std::map<int, int> counts;
  const int draws2 = 4000;
  for (int i = 0; i < draws2; ++i) {
    auto y = sample_inverse_branch(t2, pp3(1, 1, 1), 1, s, i);
    Vec c = to_chart(y, ChartIndex{2});
    int key = (c[0].real() > 0 ? 1 : 0) + 2 * (c[1].real() > 0 ? 1 : 0);
    counts[key]++;
  }
  double chi2b = 0;
  for (int k = 0; k < 4; ++k) chi2b += std::pow(counts[k] - draws2 / 4.0, 2) / (draws2 / 4.0);
  CHECK(chi2b < 16.27);  // p > 0.001, 3 dof
}
