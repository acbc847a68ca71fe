#include "doctest.h"

#include <cmath>

#include "equidist/operators.hpp"

using namespace equidist;

namespace {
ProjectivePoint pp2(cplx a, cplx b) {
  Vec v(2);
  v << a, b;
  return ProjectivePoint::canonicalize(v);
}
ProjectivePoint pp3(cplx a, cplx b, cplx c) {
  Vec v(3);
  v << a, b, c;
  return ProjectivePoint::canonicalize(v);
}
TestFunction const_fn(double v) {
  TestFunction t;
  t.eval = [v](const ProjectivePoint&) { return v; };
  t.grad_sup = 0.0;
  t.holder_norm = std::abs(v);
  t.label = "const";
  return t;
}
}  // namespace

TEST_CASE("pushforward examples") {
  SolverSettings s;
  auto z2 = preset_map("z2");
  auto X = suite_member(1, "X");
  auto Z = suite_member(1, "Z");

  auto fX = pushforward(X, z2, s);
  CHECK(fX(pp2(1, 1)) == doctest::Approx(0.0).epsilon(1e-10));  // X(1) + X(-1) = 0

  auto f1 = pushforward(const_fn(1.0), z2, s);
  Rng rng(3, 7, 0);
  for (int i = 0; i < 50; ++i) CHECK(f1(random_point(1, rng)) == doctest::Approx(2.0));

  auto fZ = pushforward(Z, z2, s);
  // preimages of affine 4 are +-2, Z(2) = -3/5
  CHECK(fZ(pp2(4, 1)) == doctest::Approx(-6.0 / 5.0).epsilon(1e-9));
}

TEST_CASE("lambda_op scaling") {
  SolverSettings s;
  auto z2 = preset_map("z2");
  auto X = suite_member(1, "X");
  auto lam = lambda_op(X, z2, s);
  auto push = pushforward(X, z2, s);
  Rng rng(4, 8, 0);
  for (int i = 0; i < 30; ++i) {
    auto p = random_point(1, rng);
    CHECK(lam(p) == doctest::Approx(push(p)).epsilon(1e-12));  // k = 1: d^0 = 1
  }

  auto t2 = preset_map("torus2");
  auto lam2 = lambda_op(const_fn(1.0), t2, s);
  Rng rng2(5, 9, 0);
  for (int i = 0; i < 10; ++i)
    CHECK(lam2(random_point(2, rng2)) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("adjoint identity on Dirac masses") {
  SolverSettings s;
  for (const char* name : {"z2", "basilica", "cheb"}) {
    auto f = preset_map(name);
    auto Z = suite_member(1, "Z");
    auto fZ = pushforward(Z, f, s);
    Rng rng(6, 10, 0);
    for (int i = 0; i < 100; ++i) {
      auto a = random_point(1, rng);
      auto nu = fiber_measure(f, a, 1, s);
      CHECK(std::abs(pair(nu, Z) * f.topological_degree() - fZ(a)) < 1e-9);
    }
  }
}

TEST_CASE("iteration identity: <nu_n, phi> = d^{-kn} (f_*^n phi)(a)") {
  SolverSettings s;
  auto bas = preset_map("basilica");
  auto X = suite_member(1, "X");
  Rng rng(7, 11, 0);
  for (int n = 1; n <= 4; ++n) {
    auto push = pushforward(X, bas, s, n);
    for (int i = 0; i < 5; ++i) {
      auto a = random_point(1, rng);
      auto nu = fiber_measure(bas, a, n, s);
      double dkn = std::pow(2.0, n);
      CHECK(std::abs(pair(nu, X) - push(a) / dkn) < 1e-8);
    }
  }
}

TEST_CASE("invariance of mu under the adjoint and mean-zero preservation") {
  SolverSettings s;
  auto cheb = preset_map("cheb");
  auto mu = estimate_mu(cheb, s, 3000, 22, pp2(5, 1));
  for (const char* lbl : {"X", "Z", "XZ"}) {
    auto phi = suite_member(1, lbl);
    auto fphi = pushforward(phi, cheb, s);
    double dk = cheb.topological_degree();
    auto [m, se] = mu.pair_with_stderr(
        [&](const ProjectivePoint& p) { return fphi(p) / dk - phi(p); });
    CHECK(std::abs(m) <= 5.0 * se + 1e-6);

    auto centered = recenter(phi, mu);
    auto lam = lambda_op(centered, cheb, s);
    auto [mz, sez] = mu.pair_with_stderr(
        [&](const ProjectivePoint& p) { return lam(p) / dk; });
    // the recentring constant carries phi's own Monte Carlo error (dominant
    // when f_* phi vanishes identically, e.g. odd phi under +- symmetric fibers)
    auto [mc, sec] = mu.pair_with_stderr(phi);
    CHECK(std::abs(mz) <= 5.0 * (sez + sec) + 1e-6);
  }
}

TEST_CASE("telescope_run examples") {
  SolverSettings s;
  auto z2 = preset_map("z2");
  auto mu = estimate_mu(z2, s, 2000, 22, pp2(2, 1));
  std::vector<ProjectivePoint> exc{pp2(0, 1), pp2(1, 0)};

  // phi0 = 0: everything stays zero
  auto zero_states = telescope_run(const_fn(0.0), z2, pp2(2, 1), 3, 1.0, 1.5, s, mu, exc);
  REQUIRE(zero_states.size() == 3);
  for (const auto& st : zero_states) {
    CHECK(std::abs(st.c_i) < 1e-12);
    CHECK(st.psi_sup_off_tube < 1e-12);
    CHECK(st.phi_sup < 1e-12);
  }

  // phi0 = X recentred: |c_i| decreasing with at most one inversion, and
  // sup|phi_i| <= (3d)^i
  auto X = suite_member(1, "X");
  auto Xc = recenter(X, mu);
  auto states = telescope_run(Xc, z2, pp2(2, 1), 4, 1.0, 1.5, s, mu, exc);
  REQUIRE(states.size() == 4);
  int inversions = 0;
  for (size_t i = 1; i < states.size(); ++i)
    if (std::abs(states[i].c_i) > std::abs(states[i - 1].c_i) + 1e-12) ++inversions;
  CHECK(inversions <= 1);
  for (const auto& st : states) {
    CHECK(st.phi_sup <= std::pow(3.0 * 2.0, st.level));
    CHECK(st.theta_i ==
          doctest::Approx(std::exp(-1.0 * st.schedule_l * std::pow(1.5, st.level) * 4.0)));
  }

  CHECK_THROWS_AS(telescope_run(Xc, z2, pp2(2, 1), 4, 200.0, 1.9, s, mu, exc),
                  ScheduleUnderflow);
  CHECK_THROWS_AS(telescope_run(Xc, z2, pp2(2, 1), 2, 1.0, 3.0, s, mu, exc), ValidationError);
}
