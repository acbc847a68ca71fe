#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "equidist/endomorphism.hpp"

namespace equidist {

struct SolverSettings {
  double newton_tolerance = 1e-12;
  int max_newton_iters = 60;
  double cluster_radius = 1e-7;
  long long max_tree_nodes = 10000000;
  std::uint64_t rng_seed = 20260823;
};

struct FiberAtom {
  ProjectivePoint point;
  long long multiplicity = 1;
};

struct WeightedFiber {
  ProjectivePoint base_point;
  int n = 0;
  std::vector<FiberAtom> points;
  double residual = 0.0;

  long long total_multiplicity() const {
    long long s = 0;
    for (const auto& a : points) s += a.multiplicity;
    return s;
  }
};

// wedge norm ||a ^ b|| for unit vectors; zero iff projectively equal
inline double wedge_norm(const Vec& a, const Vec& b) {
  if (a.size() == 2) return std::abs(a[0] * b[1] - a[1] * b[0]);
  cplx c0 = a[1] * b[2] - a[2] * b[1];
  cplx c1 = a[2] * b[0] - a[0] * b[2];
  cplx c2 = a[0] * b[1] - a[1] * b[0];
  return std::sqrt(std::norm(c0) + std::norm(c1) + std::norm(c2));
}

namespace detail {

inline void sort_atoms(std::vector<FiberAtom>& atoms) {
  std::sort(atoms.begin(), atoms.end(),
            [](const FiberAtom& a, const FiberAtom& b) { return point_less(a.point, b.point); });
}

}  // namespace detail

// ---- k = 1 -----------------------------------------------------------------

inline WeightedFiber fiber_k1(const HomogeneousMap& f, const ProjectivePoint& x,
                              const SolverSettings& s) {
  if (f.dim() != 1) throw DimensionMismatch("fiber_k1: needs k = 1");
  const int d = f.degree();
  // fiber equation P(y) x_w - Q(y) x_z = 0 as a binary form in y
  Coeffs r = f.components()[0] * x[1] - f.components()[1] * x[0];
  double scale = r.cwiseAbs().maxCoeff();
  double comp_scale = std::max(f.components()[0].cwiseAbs().maxCoeff(),
                               f.components()[1].cwiseAbs().maxCoeff());
  if (!(scale > 1e-14 * comp_scale)) throw DegenerateFiber("fiber_k1: fiber equation vanished");
  r /= scale;

  for (int attempt = 0; attempt < 6; ++attempt) {
    Mat m;
    Coeffs rc;
    if (attempt == 0) {
      m = Mat::Identity(2, 2);
      rc = r;
    } else {
      Rng rng(s.rng_seed, 101, attempt);
      m = random_unitary(2, rng);
      rc = binary_compose(r, m);
    }
    // need the rotated chart to see all d roots: leading coefficient alive
    if (std::abs(rc[d]) <= 1e-6 * rc.cwiseAbs().maxCoeff()) continue;
    Coeffs uni = rc / rc.cwiseAbs().maxCoeff();
    std::vector<cplx> raw = aberth_roots(uni);
    // wide clustering first: exact for truly multiple roots. If the merged
    // centers fail the residual gate the roots were distinct-but-close, so
    // retry with tight-only clustering, which keeps them separate.
    for (double multi_radius : {1e-3, s.cluster_radius}) {
      WeightedFiber out;
      out.base_point = x;
      out.n = 1;
      for (const RootCluster& cl : cluster_poly_roots(uni, raw, s.cluster_radius, multi_radius)) {
        Vec chart(2);
        chart << cl.center, cplx(1, 0);
        out.points.push_back(FiberAtom{ProjectivePoint::canonicalize(m * chart), cl.multiplicity});
      }
      detail::sort_atoms(out.points);
      if (out.total_multiplicity() != d) continue;
      double resid = 0.0;
      for (const auto& a : out.points) {
        Vec img = f.evaluate_lift(a.point.coords());
        double nn = img.norm();
        if (!(nn > 1e-300)) throw DegenerateImage("fiber_k1: image vanished at fiber point");
        resid = std::max(resid, wedge_norm(img / nn, x.coords()));
      }
      out.residual = resid;
      if (resid > 1e-8) continue;
      return out;
    }
  }
  throw SolverFailure("fiber_k1: no admissible chart found for " + f.label());
}

// ---- k = 2 -----------------------------------------------------------------

namespace detail {

struct Newton2D {
  cplx u, v;
  double last_step = 0.0;
  bool simple = false;
};

inline Newton2D newton2d(const BivarPoly& ga, const BivarPoly& gb, const BivarPoly& ga_u,
                         const BivarPoly& ga_v, const BivarPoly& gb_u, const BivarPoly& gb_v,
                         cplx u0, cplx v0, int max_iters) {
  Newton2D r{u0, v0, 1.0, false};
  for (int it = 0; it < max_iters; ++it) {
    cplx fa = ga.eval(r.u, r.v), fb = gb.eval(r.u, r.v);
    cplx j00 = ga_u.eval(r.u, r.v), j01 = ga_v.eval(r.u, r.v);
    cplx j10 = gb_u.eval(r.u, r.v), j11 = gb_v.eval(r.u, r.v);
    cplx det = j00 * j11 - j01 * j10;
    if (std::abs(det) < 1e-280) break;
    cplx du = (fa * j11 - fb * j01) / det;
    cplx dv = (fb * j00 - fa * j10) / det;
    double step = std::sqrt(std::norm(du) + std::norm(dv));
    double size = 1.0 + std::sqrt(std::norm(r.u) + std::norm(r.v));
    if (step > 0.1 * size) break;
    r.u -= du;
    r.v -= dv;
    r.last_step = step;
    if (step <= 1e-13 * size) break;
  }
  double size = 1.0 + std::sqrt(std::norm(r.u) + std::norm(r.v));
  cplx j00 = ga_u.eval(r.u, r.v), j01 = ga_v.eval(r.u, r.v);
  cplx j10 = gb_u.eval(r.u, r.v), j11 = gb_v.eval(r.u, r.v);
  double det = std::abs(j00 * j11 - j01 * j10);
  double jnorm = std::abs(j00) + std::abs(j01) + std::abs(j10) + std::abs(j11);
  double noise = 1e-15 * (ga.eval_mag(std::abs(r.u), std::abs(r.v)) +
                          gb.eval_mag(std::abs(r.u), std::abs(r.v)));
  double uncertainty = noise * jnorm / std::max(det, 1e-280);
  r.simple = r.last_step <= 1e-11 * size && uncertainty <= 1e-9 * size;
  return r;
}

}  // namespace detail

inline WeightedFiber fiber_k2(const HomogeneousMap& f, const ProjectivePoint& x,
                              const SolverSettings& s) {
  if (f.dim() != 2) throw DimensionMismatch("fiber_k2: needs k = 2");
  const int d = f.degree();
  const int dd = d * d;
  int j0 = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(x[i]) > std::abs(x[j0])) j0 = i;
  int i1 = (j0 + 1) % 3, i2 = (j0 + 2) % 3;

  for (int attempt = 0; attempt < 5; ++attempt) {
    Rng rng(s.rng_seed, 202, attempt);
    Mat q = random_unitary(3, rng);
    BivarPoly h[3];
    for (int c = 0; c < 3; ++c) h[c] = trivariate_to_affine(f.components()[c], d, q);
    BivarPoly ga = h[i1].scaled(x[j0]) - h[j0].scaled(x[i1]);
    BivarPoly gb = h[i2].scaled(x[j0]) - h[j0].scaled(x[i2]);
    double sa = ga.max_abs(), sb = gb.max_abs();
    if (!(sa > 1e-13) || !(sb > 1e-13)) throw DegenerateFiber("fiber_k2: fiber equations vanished");
    ga = ga.scaled(cplx(1.0 / sa, 0));
    gb = gb.scaled(cplx(1.0 / sb, 0));

    Coeffs res = resultant_in_u(ga, gb, dd);
    double rs = res.cwiseAbs().maxCoeff();
    if (!(rs > 1e-250)) continue;  // EliminationDegenerate: retry rotation
    res /= rs;
    if (std::abs(res[dd]) <= 1e-8) continue;  // solutions escaped to chart infinity

    // cluster the u-projection first: an m-fold fiber point shows up as an
    // m-fold resultant root, and the derivative-polished cluster center is far
    // more accurate than any individual root fragment. Wide clustering first;
    // if the merged centers fail the residual gate the roots were
    // distinct-but-close, so retry with tight-only clustering.
    std::vector<cplx> uraw = aberth_roots(res);
    BivarPoly ga_u = ga.d_du(), ga_v = ga.d_dv(), gb_u = gb.d_du(), gb_v = gb.d_dv();
    for (double multi_radius : {1e-3, s.cluster_radius}) {
      std::vector<RootCluster> uclusters =
          cluster_poly_roots(res, uraw, s.cluster_radius, multi_radius);
      WeightedFiber out;
      out.base_point = x;
      out.n = 1;
      bool bad = false;
      for (const RootCluster& uc : uclusters) {
        Coeffs gv = ga.at_u(uc.center);
        if (!(gv.cwiseAbs().maxCoeff() > 1e-11)) {
          bad = true;  // ga degenerates on this u-line; new rotation
          break;
        }
        poly_trim(gv, 1e-9);
        if (gv.size() <= 1) {
          bad = true;
          break;
        }
        std::vector<RootCluster> vclusters =
            cluster_poly_roots(gv, aberth_roots(gv), s.cluster_radius, multi_radius);
        cplx v0 = vclusters[0].center;
        double best = std::abs(gb.eval(uc.center, v0));
        for (const RootCluster& vc : vclusters) {
          double val = std::abs(gb.eval(uc.center, vc.center));
          if (val < best) {
            best = val;
            v0 = vc.center;
          }
        }
        cplx u1 = uc.center, v1 = v0;
        if (uc.multiplicity == 1) {
          detail::Newton2D nr =
              detail::newton2d(ga, gb, ga_u, ga_v, gb_u, gb_v, u1, v1, s.max_newton_iters);
          u1 = nr.u;
          v1 = nr.v;
        }
        Vec chart(3);
        chart << u1, v1, cplx(1, 0);
        out.points.push_back(
            FiberAtom{ProjectivePoint::canonicalize(q * chart), uc.multiplicity});
      }
      if (bad) break;  // rotation-level defect: no clustering mode can help
      detail::sort_atoms(out.points);
      if (out.total_multiplicity() != dd) continue;
      double resid = 0.0;
      for (const auto& a : out.points) {
        Vec img = f.evaluate_lift(a.point.coords());
        double nn = img.norm();
        if (!(nn > 1e-300)) throw DegenerateImage("fiber_k2: image vanished at fiber point");
        resid = std::max(resid, wedge_norm(img / nn, x.coords()));
      }
      out.residual = resid;
      if (resid > 1e-8) continue;
      return out;
    }
  }
  throw SolverFailure("fiber_k2: elimination failed after 5 rotations for " + f.label());
}

inline WeightedFiber fiber(const HomogeneousMap& f, const ProjectivePoint& x,
                           const SolverSettings& s) {
  return f.dim() == 1 ? fiber_k1(f, x, s) : fiber_k2(f, x, s);
}

// ---- backward orbits -------------------------------------------------------

inline long long fiber_cardinality_bound(const HomogeneousMap& f, int n) {
  long long total = 1;
  for (int i = 0; i < n * f.dim(); ++i) {
    total *= f.degree();
    if (total > (1LL << 62) / f.degree()) throw TreeTooLarge("backward_tree: d^{kn} overflow");
  }
  return total;
}

// f^{-n}(a) with multiplicities; multiplicities multiply along branches.
inline WeightedFiber backward_tree(const HomogeneousMap& f, const ProjectivePoint& a, int n,
                                   const SolverSettings& s) {
  long long budget = fiber_cardinality_bound(f, n);
  if (budget > s.max_tree_nodes) throw TreeTooLarge("backward_tree: d^{kn} exceeds max_tree_nodes");
  std::vector<FiberAtom> level{FiberAtom{a, 1}};
  for (int step = 0; step < n; ++step) {
    std::vector<FiberAtom> next;
    next.reserve(level.size() * f.topological_degree());
    for (const auto& parent : level) {
      WeightedFiber fb;
      try {
        fb = fiber(f, parent.point, s);
      } catch (const SolverFailure& e) {
        throw SolverFailure(std::string(e.what()) + " (tree level " + std::to_string(step + 1) + ")");
      }
      for (auto& child : fb.points)
        next.push_back(FiberAtom{child.point, child.multiplicity * parent.multiplicity});
    }
    // canonical order; adjacent duplicates (collapsed branches) merge
    std::sort(next.begin(), next.end(),
              [](const FiberAtom& x, const FiberAtom& y) { return point_less(x.point, y.point); });
    std::vector<FiberAtom> merged;
    for (auto& atom : next) {
      if (!merged.empty() && fs_distance(merged.back().point, atom.point) <= s.cluster_radius)
        merged.back().multiplicity += atom.multiplicity;
      else
        merged.push_back(atom);
    }
    level = std::move(merged);
  }
  WeightedFiber out;
  out.base_point = a;
  out.n = n;
  out.points = std::move(level);
  double resid = 0.0;
  for (const auto& atom : out.points)
    resid = std::max(resid, wedge_norm(lift_iterate_direction(f, atom.point.coords(), n), a.coords()));
  out.residual = resid;
  return out;
}

// One multiplicity-weighted backward random walk of length n; the output law
// is exactly nu_n = d^{-kn} (f^n)^* delta_a. Deterministic in (seed, stream).
inline ProjectivePoint sample_inverse_branch(const HomogeneousMap& f, const ProjectivePoint& a,
                                             int n, const SolverSettings& s,
                                             std::uint64_t rng_stream) {
  Rng rng(s.rng_seed, 303, rng_stream);
  ProjectivePoint cur = a;
  const long long dk = f.topological_degree();
  for (int step = 0; step < n; ++step) {
    WeightedFiber fb = fiber(f, cur, s);
    long long pick = static_cast<long long>(rng.below(static_cast<std::uint64_t>(dk)));
    long long acc = 0;
    for (const auto& atom : fb.points) {
      acc += atom.multiplicity;
      if (pick < acc) {
        cur = atom.point;
        break;
      }
    }
  }
  return cur;
}

}  // namespace equidist
