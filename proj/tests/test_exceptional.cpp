#include "doctest.h"

#include <cmath>

#include "equidist/exceptional.hpp"

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
bool model_contains(const ExceptionalSetModel& m, const ProjectivePoint& p) {
  for (const auto& q : m.points)
    if (fs_distance(p, q) < 1e-8) return true;
  return false;
}
}  // namespace

TEST_CASE("local_degree examples") {
  SolverSettings s;
  auto z2 = preset_map("z2");
  CHECK(local_degree(z2, pp2(0, 1), 1, s) == 2);
  CHECK(local_degree(z2, pp2(0, 1), 2, s) == 4);
  CHECK(local_degree(z2, pp2(1, 1), 3, s) == 1);
  CHECK(local_degree(z2, pp2(1, 0), 2, s) == 4);

  auto z3 = preset_map("z3");
  CHECK(local_degree(z3, pp2(0, 1), 1, s) == 3);
  CHECK(local_degree(z3, pp2(0, 1), 2, s) == 9);

  auto bas = preset_map("basilica");
  CHECK(local_degree(bas, pp2(0, 1), 1, s) == 2);
  // 0 lies in the superattracting 2-cycle {0, -1}: kappa_n(0) = 2^{ceil(n/2)}
  CHECK(local_degree(bas, pp2(0, 1), 3, s) == 4);
  auto cheb = preset_map("cheb");
  CHECK(local_degree(cheb, pp2(0, 1), 1, s) == 2);
  CHECK(local_degree(cheb, pp2(0, 1), 3, s) == 2);  // orbit 0 -> -2 -> 2 leaves the critical set

  auto t2 = preset_map("torus2");
  CHECK(local_degree(t2, pp3(0, 0, 1), 1, s) == 4);
  CHECK(local_degree(t2, pp3(0, 1, 1), 1, s) == 2);
  CHECK(local_degree(t2, pp3(1, 2, 3), 1, s) == 1);
}

TEST_CASE("kappa cocycle identity") {
  SolverSettings s;
  Rng rng(31, 12, 0);
  for (const char* name : {"z2", "basilica", "cheb"}) {
    auto f = preset_map(name);
    auto hazards = superattracting_hazards(f);
    std::vector<ProjectivePoint> probes;
    // random probes must keep their orbit clear of superattracting cycles:
    // there the fiber geometry collapses below the clustering resolution and
    // kappa is not computable in doubles (local_degree throws)
    while (probes.size() < 4) {
      auto x = random_point(1, rng);
      if (probe_resolvable(f, x, 5, hazards)) probes.push_back(x);
    }
    // exactly invariant points are fine: their ramification snaps exactly
    probes.push_back(pp2(0, 1));
    probes.push_back(pp2(1, 0));
    for (const auto& x : probes) {
      for (int n = 1; n <= 3; ++n)
        for (int m = 1; m + n <= 5; ++m) {
          int lhs = local_degree(f, x, n + m, s);
          int rhs = local_degree(f, f.iterate(x, n), m, s) * local_degree(f, x, n, s);
          CHECK(lhs == rhs);
        }
    }
  }
}

TEST_CASE("kappa_minus and delta0") {
  SolverSettings s;
  auto z2 = preset_map("z2");
  CHECK(kappa_minus(z2, pp2(0, 1), 3, s) == 8);  // fiber of 0 is 0 itself
  CHECK(kappa_minus(z2, pp2(1, 1), 2, s) == 1);  // generic fibers avoid the critical set

  auto bas = preset_map("basilica");
  // f^{-1}(-1) = {0}, and kappa_1(0) = 2
  CHECK(kappa_minus(bas, pp2(-1, 1), 1, s) == 2);

  auto prof_gen = local_degree_profile(z2, pp2(cplx(1.3, 0.4), 1), 3, s);
  CHECK(prof_gen.delta0_estimate == 1.0);
  auto cheb = preset_map("cheb");
  auto prof_crit = local_degree_profile(cheb, pp2(0, 1), 3, s);
  CHECK(prof_crit.delta0_estimate == 2.0);
  CHECK(prof_crit.kappa_n.at(1) == 2);
  CHECK(prof_crit.kappa_n.at(3) == 2);
}

TEST_CASE("detect_exceptional_k1") {
  SolverSettings s;
  auto ez2 = detect_exceptional_k1(preset_map("z2"), s);
  REQUIRE(ez2.points.size() == 2);
  CHECK(model_contains(ez2, pp2(0, 1)));
  CHECK(model_contains(ez2, pp2(1, 0)));

  auto ez3 = detect_exceptional_k1(preset_map("z3"), s);
  CHECK(ez3.points.size() == 2);

  for (const char* name : {"basilica", "cheb"}) {
    auto e = detect_exceptional_k1(preset_map(name), s);
    REQUIRE(e.points.size() == 1);
    CHECK(model_contains(e, pp2(1, 0)));
  }
}

TEST_CASE("declared exceptional sets are totally invariant") {
  SolverSettings s;
  for (const char* name : {"z2", "z3", "basilica", "cheb"}) {
    auto f = preset_map(name);
    auto e = declared_exceptional(f);
    REQUIRE(!e.empty());
    for (const auto& p : e.points) {
      CHECK(e.distance(f.evaluate(p)) < 1e-8);  // forward invariance
      auto fb = fiber_k1(f, p, s);
      for (const auto& atom : fb.points) CHECK(e.distance(atom.point) < 1e-8);
    }
  }
  // torus2: fibers of points on the coordinate lines stay on the lines
  auto t2 = preset_map("torus2");
  auto e2 = declared_exceptional(t2);
  CHECK(e2.kind == ExceptionalKind::declared_variety);
  Rng rng(33, 13, 0);
  for (int i = 0; i < 10; ++i) {
    cplx w = std::exp(cplx(rng.uniform(-0.5, 0.5), rng.uniform(0, 6.28)));
    auto p = pp3(0, w, 1);
    CHECK(e2.distance(p) < 1e-12);
    CHECK(e2.distance(t2.evaluate(p)) < 1e-10);
    auto fb = fiber_k2(t2, p, s);
    for (const auto& atom : fb.points) CHECK(e2.distance(atom.point) < 1e-8);
  }
  // distance convention: empty model reports the diameter scale
  ExceptionalSetModel none;
  CHECK(none.distance(pp3(1, 2, 3)) == doctest::Approx(1.0));
}

TEST_CASE("backward_contraction_probe") {
  SolverSettings s;
  auto z2 = preset_map("z2");
  double a2_z2 = spherical_derivative_sup(z2);
  auto r = backward_contraction_probe(z2, pp2(1, 1), pp2(-1, 1), 1, s, a2_z2);
  CHECK(r.measured > 0.0);
  CHECK(!r.violated);
  CHECK(r.bound == doctest::Approx(fs_distance(pp2(1, 1), pp2(-1, 1)) / a2_z2).epsilon(1e-9));

  auto z3 = preset_map("z3");
  double a2_z3 = spherical_derivative_sup(z3);
  Rng rng(34, 14, 0);
  for (int i = 0; i < 20; ++i) {
    auto x = random_point(1, rng);
    auto y = random_point(1, rng);
    if (fs_distance(x, y) < 1e-6) continue;
    auto p = backward_contraction_probe(z3, x, y, 2, s, a2_z3);
    CHECK(!p.violated);
  }
  CHECK_THROWS_AS(backward_contraction_probe(z2, pp2(1, 1), pp2(1, 1), 1, s, a2_z2),
                  ValidationError);
}

TEST_CASE("tubular_mass_probe") {
  SolverSettings s;
  auto z2 = preset_map("z2");
  auto mu = estimate_mu(z2, s, 2000, 22, pp2(2, 1));
  auto e = declared_exceptional(z2);
  auto rep = tubular_mass_probe(mu, e, {0.1, 0.2, 0.3});
  CHECK(rep.mass[0] == 0.0);  // mu lives on |z| = 1, far from {0, infinity}

  auto cheb = preset_map("cheb");
  auto muc = estimate_mu(cheb, s, 2000, 22, pp2(5, 1));
  auto repc = tubular_mass_probe(muc, declared_exceptional(cheb), {0.2});
  CHECK(repc.mass[0] == 0.0);

  ExceptionalSetModel none;
  CHECK_THROWS_AS(tubular_mass_probe(mu, none, {0.1}), ValidationError);
}

TEST_CASE("torus2 tube masses vanish: mu sits at constant distance from the lines") {
  // Haar-torus oracle: mu-a.e. point is [e^{ia}:e^{ib}:1]/sqrt(3), whose
  // distance to every coordinate line is 1/sqrt(3) ~ 0.577 > 0.4
  auto t2 = preset_map("torus2");
  auto e2 = declared_exceptional(t2);
  Rng rng(35, 15, 0);
  for (int i = 0; i < 1000; ++i) {
    auto p = pp3(std::exp(cplx(0, rng.uniform(0, 6.28))), std::exp(cplx(0, rng.uniform(0, 6.28))),
                 1);
    CHECK(e2.distance(p) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-9));
  }
  SolverSettings s;
  auto mu = estimate_mu(t2, s, 1000, 20, pp3(2, 3, 1));
  auto rep = tubular_mass_probe(mu, e2, {0.05, 0.1, 0.2, 0.4});
  CHECK(rep.all_zero);
}
