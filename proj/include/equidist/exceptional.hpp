#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "equidist/fitting.hpp"
#include "equidist/measures.hpp"

namespace equidist {

// kappa_n(x): for z generic near f^n(x), f^{-n}(z) has kappa_n(x) points near x.
// Strategy: locate x's own atom in f^{-n}(f^n(x)) (its multiplicity is the
// candidate), then verify by counting the preimages of z = f^n(x') for a point
// x' displaced ~0.2 radius from x: the preimages of z near x then sit at
// ~0.2 radius by construction, for any multiplicity and any backward error
// amplification along the orbit. Majority over 3 trials.
inline int local_degree(const HomogeneousMap& f, const ProjectivePoint& x, int n,
                        const SolverSettings& s) {
  if (fiber_cardinality_bound(f, n) > s.max_tree_nodes)
    throw TreeTooLarge("local_degree: d^{kn} exceeds max_tree_nodes");
  ProjectivePoint fx = f.iterate(x, n);
  WeightedFiber base = backward_tree(f, fx, n, s);
  long long m0 = 1;
  double best = 2.0, gap = 2.0;
  for (const auto& atom : base.points) {
    double d = fs_distance(atom.point, x);
    if (d < best) {
      best = d;
      m0 = atom.multiplicity;
    }
  }
  for (const auto& atom : base.points) {
    double d = fs_distance(atom.point, x);
    if (d > best + 1e-9) gap = std::min(gap, d);
  }
  // near-critical orbits amplify backward solver error, so the base atom can
  // sit well off x; it only needs to be unambiguously x's cluster
  if (best > std::min(1e-2, 0.45 * gap))
    throw SolverFailure("local_degree: x not found in the fiber of its own image");

  const double radii[3] = {1e-3, 2e-3, 4e-3};
  std::map<long long, int> votes;
  for (int trial = 0; trial < 3; ++trial) {
    double radius = std::min(radii[trial], 0.45 * gap);
    double rho = 0.2 * radius;
    Rng rng(s.rng_seed, 505, static_cast<std::uint64_t>(trial));
    Vec dir(x.dim() + 1);
    for (int c = 0; c <= x.dim(); ++c) dir[c] = rng.complex_normal();
    Vec tang = dir - x.coords().dot(dir) * x.coords();
    double tn = tang.norm();
    if (!(tn > 1e-9)) {
      votes[m0]++;
      continue;
    }
    ProjectivePoint xp = ProjectivePoint::canonicalize(x.coords() + (rho / tn) * tang);
    ProjectivePoint z = f.iterate(xp, n);
    if (fs_distance(z, fx) < 1e-13) {
      // forward image collapsed below resolution; the cluster multiplicity is
      // the only consistent answer
      votes[m0]++;
      continue;
    }
    WeightedFiber tree = backward_tree(f, z, n, s);
    long long count = 0;
    for (const auto& atom : tree.points)
      if (fs_distance(atom.point, x) <= radius) count += atom.multiplicity;
    if (count >= 1) votes[count]++;
  }
  long long winner = -1;
  int best_votes = 0;
  for (auto [value, c] : votes)
    if (c > best_votes) {
      best_votes = c;
      winner = value;
    }
  if (best_votes < 2)
    throw AmbiguousCount("local_degree: perturbation trials disagree (" +
                         std::to_string(votes.size()) + " distinct counts)");
  return static_cast<int>(winner);
}

struct LocalDegreeProfile {
  ProjectivePoint point;
  std::map<int, int> kappa_n;
  std::map<int, int> kappa_minus_n;
  double delta0_estimate = 1.0;
};

// kappa_{-n}(x) = max over the n-fiber of x of kappa_n
inline int kappa_minus(const HomogeneousMap& f, const ProjectivePoint& x, int n,
                       const SolverSettings& s) {
  WeightedFiber tree = backward_tree(f, x, n, s);
  int best = 1;
  for (const auto& atom : tree.points) best = std::max(best, local_degree(f, atom.point, n, s));
  return best;
}

inline LocalDegreeProfile local_degree_profile(const HomogeneousMap& f, const ProjectivePoint& x,
                                               int max_n, const SolverSettings& s) {
  LocalDegreeProfile p;
  p.point = x;
  for (int n = 1; n <= max_n; ++n) {
    p.kappa_n[n] = local_degree(f, x, n, s);
    p.kappa_minus_n[n] = kappa_minus(f, x, n, s);
    p.delta0_estimate = std::max(p.delta0_estimate, static_cast<double>(p.kappa_n[n]));
  }
  return p;
}

// ---- exceptional-set models ------------------------------------------------

enum class ExceptionalKind { finite_points, declared_variety };

struct ExceptionalSetModel {
  ExceptionalKind kind = ExceptionalKind::finite_points;
  std::vector<ProjectivePoint> points;  // members (finite case) or vertices (declared)
  std::function<double(const ProjectivePoint&)> variety_distance;  // declared case

  bool empty() const {
    return kind == ExceptionalKind::finite_points && points.empty();
  }

  // dist(a, E); convention: 1 (the diameter scale) when E is empty
  double distance(const ProjectivePoint& p) const {
    if (kind == ExceptionalKind::declared_variety) return variety_distance(p);
    double d = 1.0;
    for (const auto& e : points) d = std::min(d, fs_distance(p, e));
    return d;
  }
};

// candidates are the critical points; keep the largest f-closed subset whose
// members have single-point fibers inside the subset (total invariance)
inline ExceptionalSetModel detect_exceptional_k1(const HomogeneousMap& f,
                                                 const SolverSettings& s) {
  if (f.dim() != 1) throw DimensionMismatch("detect_exceptional_k1: needs k = 1");
  std::vector<ProjectivePoint> cand;
  for (const auto& [p, mult] : critical_points_k1(f)) cand.push_back(p);
  auto contains = [](const std::vector<ProjectivePoint>& set, const ProjectivePoint& p) {
    for (const auto& q : set)
      if (fs_distance(p, q) < 1e-8) return true;
    return false;
  };
  bool changed = true;
  while (changed && !cand.empty()) {
    changed = false;
    std::vector<ProjectivePoint> keep;
    for (const auto& p : cand) {
      bool ok = contains(cand, f.evaluate(p));
      if (ok) {
        WeightedFiber fb = fiber_k1(f, p, s);
        ok = fb.points.size() == 1 && contains(cand, fb.points[0].point);
      }
      if (ok)
        keep.push_back(p);
      else
        changed = true;
    }
    cand = std::move(keep);
  }
  // deduplicate (critical points can repeat with multiplicity)
  ExceptionalSetModel model;
  for (const auto& p : cand)
    if (!contains(model.points, p)) model.points.push_back(p);
  if (model.points.size() > 2)
    throw SolverFailure("detect_exceptional_k1: more than two totally invariant points");
  return model;
}

// declared exceptional sets of the named presets
inline ExceptionalSetModel declared_exceptional(const HomogeneousMap& f) {
  auto pt2 = [](cplx a, cplx b) {
    Vec v(2);
    v << a, b;
    return ProjectivePoint::canonicalize(v);
  };
  ExceptionalSetModel m;
  const std::string& l = f.label();
  if (l == "z2" || l == "z3") {
    m.points = {pt2(0, 1), pt2(1, 0)};
  } else if (l == "basilica" || l == "cheb") {
    m.points = {pt2(1, 0)};
  } else if (l == "torus2") {
    m.kind = ExceptionalKind::declared_variety;
    // the three coordinate lines; their pairwise intersections are the vertices
    m.variety_distance = [](const ProjectivePoint& p) {
      return std::min({std::abs(p[0]), std::abs(p[1]), std::abs(p[2])});
    };
    Vec e(3);
    for (int i = 0; i < 3; ++i) {
      e.setZero();
      e[i] = 1;
      m.points.push_back(ProjectivePoint::canonicalize(e));
    }
  }
  return m;
}

// Points of superattracting cycles (critical points with periodic orbit) and
// their orbits. Near these, fibers collapse below the clustering resolution
// (preimage gaps shrink super-exponentially), so local-degree counting is only
// meaningful for probes whose forward orbit keeps a margin from them.
inline std::vector<ProjectivePoint> superattracting_hazards(const HomogeneousMap& f) {
  std::vector<ProjectivePoint> out;
  if (f.dim() == 1) {
    for (const auto& [c, mult] : critical_points_k1(f)) {
      ProjectivePoint p = c;
      std::vector<ProjectivePoint> orbit{c};
      bool periodic = false;
      for (int j = 0; j < 12 && !periodic; ++j) {
        p = f.evaluate(p);
        if (fs_distance(p, c) < 1e-9)
          periodic = true;
        else
          orbit.push_back(p);
      }
      if (periodic)
        for (const auto& q : orbit) out.push_back(q);
    }
  } else {
    for (const auto& q : declared_exceptional(f).points) out.push_back(q);
  }
  return out;
}

inline bool probe_resolvable(const HomogeneousMap& f, const ProjectivePoint& x, int n,
                             const std::vector<ProjectivePoint>& hazards, double margin = 0.05) {
  ProjectivePoint p = x;
  for (int j = 0; j <= n; ++j) {
    for (const auto& h : hazards)
      if (fs_distance(p, h) < margin) return false;
    if (j < n) p = f.evaluate(p);
  }
  return true;
}

// ---- probes -----------------------------------------------------------------

struct ContractionProbeResult {
  double measured = 0.0;
  double bound = 0.0;
  bool violated = false;
};

inline ContractionProbeResult backward_contraction_probe(const HomogeneousMap& f,
                                                         const ProjectivePoint& x,
                                                         const ProjectivePoint& y, int n,
                                                         const SolverSettings& s,
                                                         double a2_hat = 0.0) {
  double dxy = fs_distance(x, y);
  if (!(dxy > 1e-12))
    throw ValidationError("backward_contraction_probe: x and y must be distinct");
  if (a2_hat <= 0.0) a2_hat = spherical_derivative_sup(f);
  WeightedFiber fx = backward_tree(f, x, n, s);
  WeightedFiber fy = backward_tree(f, y, n, s);
  ContractionProbeResult r;
  r.measured = 2.0;
  for (const auto& a : fx.points)
    for (const auto& b : fy.points) r.measured = std::min(r.measured, fs_distance(a.point, b.point));
  r.bound = std::pow(a2_hat, -n) * dxy;
  r.violated = r.measured < r.bound * (1.0 - 1e-6);
  return r;
}

struct TubularMassReport {
  std::vector<double> t_grid;
  std::vector<double> mass;
  bool all_zero = true;
  double beta_hat = 0.0;
  int fit_points = 0;
};

inline TubularMassReport tubular_mass_probe(const MuEstimate& mu_hat,
                                            const ExceptionalSetModel& E,
                                            const std::vector<double>& t_grid) {
  if (E.empty()) throw ValidationError("tubular_mass_probe: exceptional set is empty");
  TubularMassReport rep;
  rep.t_grid = t_grid;
  double floor_mass = 10.0 / std::max(mu_hat.samples, 1);
  std::vector<double> lx, ly;
  for (double t : t_grid) {
    double m = 0.0;
    for (const auto& a : mu_hat.measure.atoms)
      if (E.distance(a.point) <= t) m += a.weight;
    rep.mass.push_back(m);
    if (m > 0) rep.all_zero = false;
    if (m >= floor_mass) {
      lx.push_back(std::log(t));
      ly.push_back(std::log(m));
    }
  }
  LineFit fit = least_squares_line(lx, ly);
  rep.beta_hat = fit.slope;
  rep.fit_points = fit.points_used;
  return rep;
}

}  // namespace equidist
