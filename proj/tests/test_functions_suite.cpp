#include "doctest.h"

#include <cmath>

#include "equidist/test_functions.hpp"

using namespace equidist;

namespace {
ProjectivePoint pp2(cplx a, cplx b) {
  Vec v(2);
  v << a, b;
  return ProjectivePoint::canonicalize(v);
}
}  // namespace

TEST_CASE("builtin suite point values (k = 1)") {
  auto X = suite_member(1, "X");
  auto Y = suite_member(1, "Y");
  auto Z = suite_member(1, "Z");
  CHECK(Z(pp2(1, 1)) == doctest::Approx(0.0));
  CHECK(X(pp2(1, 1)) == doctest::Approx(1.0));
  CHECK(Z(pp2(0, 1)) == doctest::Approx(1.0));
  CHECK(Z(pp2(1, 0)) == doctest::Approx(-1.0));
  CHECK(Y(pp2(cplx(0, 1), 1)) == doctest::Approx(1.0));
  CHECK(suite_member(1, "sqrt_abs_X")(pp2(1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("suite members satisfy their certified bounds") {
  for (int k : {1, 2}) {
    auto suite = builtin_suite(k);
    REQUIRE(suite.size() == (k == 1 ? 6 : 7));
    Rng rng(42, 1, static_cast<std::uint64_t>(k));
    for (const auto& t : suite) {
      for (int i = 0; i < 10000; ++i) {
        ProjectivePoint x = random_point(k, rng);
        CHECK(std::abs(t(x)) <= t.holder_norm + 1e-12);
      }
      double alpha = std::min(t.holder_alpha, 1.0);
      double constant = t.has_grad() ? t.grad_sup : t.holder_norm;
      for (int i = 0; i < 10000; ++i) {
        ProjectivePoint x = random_point(k, rng);
        ProjectivePoint y = i % 2 ? random_point(k, rng)
                                  : detail::perturb(x, std::pow(10.0, rng.uniform(-5, 0)), rng);
        double d = fs_distance(x, y);
        double lhs = std::abs(t(x) - t(y));
        double exp_used = t.has_grad() ? 1.0 : alpha;
        CHECK(lhs <= constant * std::pow(d, exp_used) + 1e-9);
      }
    }
  }
}

TEST_CASE("regularization scheme: displacement factor bounded") {
  for (int k : {1, 2}) {
    for (double theta : {0.1, 0.03, 0.01}) {
      RegularizationScheme scheme(k, theta, 100);
      CHECK(scheme.displacement_factor_eta > 0.0);
      CHECK(scheme.displacement_factor_eta <= 4.0);
    }
  }
  CHECK_THROWS_AS(RegularizationScheme(1, 0.1, 50), ValidationError);
  CHECK_THROWS_AS(RegularizationScheme(1, 1.5, 100), ValidationError);
}

TEST_CASE("regularize: constants are fixed; rough members are smoothed") {
  RegularizationScheme scheme(1, 0.01, 100);
  TestFunction c;
  c.eval = [](const ProjectivePoint&) { return 0.7; };
  c.grad_sup = 0.0;
  c.label = "const";
  auto creg = regularize(c, scheme);
  Rng rng(9, 2, 0);
  for (int i = 0; i < 200; ++i) CHECK(creg(random_point(1, rng)) == doctest::Approx(0.7));

  auto rough = suite_member(1, "sqrt_abs_X");
  CHECK(!rough.has_grad());
  auto smoothed = regularize(rough, scheme);
  CHECK(smoothed.has_grad());
  CHECK(smoothed.grad_sup < 1e4);
}

TEST_CASE("regularize: pointwise error bounded by grad_sup * eta * theta") {
  double theta = 0.01;
  RegularizationScheme scheme(1, theta, 100);
  auto X = suite_member(1, "X");
  auto Xr = regularize(X, scheme);
  Rng rng(11, 3, 0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    ProjectivePoint p = random_point(1, rng);
    worst = std::max(worst, std::abs(Xr(p) - X(p)));
  }
  CHECK(worst <= X.grad_sup * scheme.displacement_factor_eta * theta);
}

TEST_CASE("regularize: linearity and sup preservation with shared draws") {
  RegularizationScheme scheme(1, 0.05, 100);
  auto X = suite_member(1, "X");
  auto Z = suite_member(1, "Z");
  TestFunction combo;
  combo.eval = [X, Z](const ProjectivePoint& p) { return 2.0 * X(p) - 3.0 * Z(p); };
  combo.label = "combo";
  auto cr = regularize(combo, scheme);
  auto xr = regularize(X, scheme);
  auto zr = regularize(Z, scheme);
  Rng rng(12, 4, 0);
  for (int i = 0; i < 300; ++i) {
    ProjectivePoint p = random_point(1, rng);
    CHECK(std::abs(cr(p) - (2.0 * xr(p) - 3.0 * zr(p))) < 1e-12);
    CHECK(std::abs(xr(p)) <= 1.0 + 1e-12);  // sup|X| = 1 is preserved by averaging
  }
}

TEST_CASE("regularize: error decreases as theta decreases") {
  auto X = suite_member(1, "X");
  Rng rng(13, 5, 0);
  std::vector<ProjectivePoint> probes;
  for (int i = 0; i < 1000; ++i) probes.push_back(random_point(1, rng));
  double prev = 1e300;
  for (double theta : {0.1, 0.03, 0.01, 0.003}) {
    RegularizationScheme scheme(1, theta, 100, 5);
    auto Xr = regularize(X, scheme);
    double err = 0.0;
    for (const auto& p : probes) err = std::max(err, std::abs(Xr(p) - X(p)));
    CHECK(err <= prev * 1.1);  // monotone within 10% slack
    prev = err;
  }
}

TEST_CASE("mean-zero recentring stays in the family") {
  SolverSettings s;
  auto z2 = preset_map("z2");
  auto mu = estimate_mu(z2, s, 2000, 22, pp2(2, 1));
  auto X = suite_member(1, "X");
  auto Xc = recenter(X, mu);
  CHECK(pair(mu.measure, Xc) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(Xc.dsh_norm <= 2.0 * X.dsh_norm + 1e-12);
}

TEST_CASE("sup vs log-gradient bound") {
  auto X = suite_member(1, "X");
  auto r = sup_vs_log_gradient_check(X, 1);
  CHECK(!r.violated);
  CHECK(r.sup_norm > 0.5);

  // every smooth builtin member is consistent with the fitted A0
  for (int k : {1, 2})
    for (const auto& t : builtin_suite(k))
      if (t.has_grad()) CHECK(!sup_vs_log_gradient_check(t, k).violated);

  // regularized rough member: sup stays bounded while grad_sup grows
  RegularizationScheme scheme(1, 1e-3, 100);
  auto rr = regularize(suite_member(1, "sqrt_abs_X"), scheme);
  auto rres = sup_vs_log_gradient_check(rr, 1);
  CHECK(rres.sup_norm <= suite_member(1, "sqrt_abs_X").holder_norm + 1e-9);
  CHECK(!rres.violated);

  // unnormalized input rejected
  auto X10 = X;
  auto base = X.eval;
  X10.eval = [base](const ProjectivePoint& p) { return 10.0 * base(p); };
  X10.grad_sup = 10.0 * X.grad_sup;
  X10.dsh_norm = 10.0 * X.dsh_norm;
  CHECK_THROWS_AS(sup_vs_log_gradient_check(X10, 1), ValidationError);

  CHECK_THROWS_AS(sup_vs_log_gradient_check(suite_member(1, "sqrt_abs_X"), 1), NotC1);
}
