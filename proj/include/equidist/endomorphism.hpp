#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "equidist/polynomial.hpp"
#include "equidist/projective.hpp"

namespace equidist {

// Triangular index for trivariate homogeneous coefficients: entry (i, j)
// multiplies z^i w^j t^{d-i-j}, stored lexicographically in (i, j).
inline int tri_index(int d, int i, int j) {
  int idx = 0;
  for (int a = 0; a < i; ++a) idx += d - a + 1;
  return idx + j;
}
inline int tri_size(int d) { return (d + 1) * (d + 2) / 2; }

// Partial derivative of a binary form. coeff[j] multiplies z^j w^{d-j}.
inline Coeffs binary_dz(const Coeffs& c) {
  int d = static_cast<int>(c.size()) - 1;
  Coeffs out = Coeffs::Zero(std::max(d, 1));
  for (int j = 1; j <= d; ++j) out[j - 1] = static_cast<double>(j) * c[j];
  return out;
}
inline Coeffs binary_dw(const Coeffs& c) {
  int d = static_cast<int>(c.size()) - 1;
  Coeffs out = Coeffs::Zero(std::max(d, 1));
  for (int j = 0; j < d; ++j) out[j] = static_cast<double>(d - j) * c[j];
  return out;
}

inline Coeffs binary_mul(const Coeffs& a, const Coeffs& b) {
  Coeffs out = Coeffs::Zero(a.size() + b.size() - 1);
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

inline cplx binary_eval(const Coeffs& c, cplx z, cplx w) {
  int d = static_cast<int>(c.size()) - 1;
  cplx acc(0, 0);
  cplx zp(1, 0);
  // powers of w descending via precomputation
  cplx wp[8];
  wp[0] = cplx(1, 0);
  for (int j = 1; j <= d; ++j) wp[j] = wp[j - 1] * w;
  for (int j = 0; j <= d; ++j) {
    acc += c[j] * zp * wp[d - j];
    zp *= z;
  }
  return acc;
}

// Substitute (z, w) = M (u, v) into a binary form.
inline Coeffs binary_compose(const Coeffs& c, const Mat& m) {
  int d = static_cast<int>(c.size()) - 1;
  // powers of the linear forms a u + b v as binary forms in (u, v)
  auto lin_pow = [](cplx a, cplx b, int p) {
    Coeffs out = Coeffs::Zero(p + 1);
    // binomial expansion of (a u + b v)^p; out[j] multiplies u^j v^{p-j}
    double binom = 1.0;
    for (int j = 0; j <= p; ++j) {
      out[j] = binom * std::pow(a, j) * std::pow(b, p - j);
      binom = binom * (p - j) / (j + 1.0);
    }
    return out;
  };
  Coeffs out = Coeffs::Zero(d + 1);
  for (int j = 0; j <= d; ++j) {
    if (c[j] == cplx(0, 0)) continue;
    Coeffs term = (j > 0) ? lin_pow(m(0, 0), m(0, 1), j) : Coeffs::Ones(1);
    if (d - j > 0) {
      Coeffs t2 = lin_pow(m(1, 0), m(1, 1), d - j);
      term = (j > 0) ? binary_mul(term, t2) : t2;
    }
    out += c[j] * term;
  }
  return out;
}

inline cplx trivariate_eval(const Coeffs& c, int d, cplx z, cplx w, cplx t) {
  cplx zp[8], wp[8], tp[8];
  zp[0] = wp[0] = tp[0] = cplx(1, 0);
  for (int a = 1; a <= d; ++a) {
    zp[a] = zp[a - 1] * z;
    wp[a] = wp[a - 1] * w;
    tp[a] = tp[a - 1] * t;
  }
  cplx acc(0, 0);
  int idx = 0;
  for (int i = 0; i <= d; ++i)
    for (int j = 0; j <= d - i; ++j, ++idx) acc += c[idx] * zp[i] * wp[j] * tp[d - i - j];
  return acc;
}

// Substitute (z, w, t) = Q (u, v, 1); yields a dense bivariate polynomial.
inline BivarPoly trivariate_to_affine(const Coeffs& c, int d, const Mat& q) {
  std::vector<std::vector<BivarPoly>> pw(3);
  for (int r = 0; r < 3; ++r) {
    pw[r].resize(d + 1);
    pw[r][0] = BivarPoly::constant(cplx(1, 0));
    BivarPoly lin = BivarPoly::linear(q(r, 0), q(r, 1), q(r, 2));
    for (int p = 1; p <= d; ++p) pw[r][p] = pw[r][p - 1] * lin;
  }
  BivarPoly out;
  int idx = 0;
  for (int i = 0; i <= d; ++i)
    for (int j = 0; j <= d - i; ++j, ++idx) {
      if (c[idx] == cplx(0, 0)) continue;
      out += (pw[0][i] * pw[1][j] * pw[2][d - i - j]).scaled(c[idx]);
    }
  return out;
}

// Holomorphic endomorphism of P^k given by a lift of k+1 homogeneous degree-d
// polynomials. Immutable after construction.
class HomogeneousMap {
 public:
  HomogeneousMap(int k, int d, std::vector<Coeffs> components, std::string label = "",
                 bool nondegeneracy_certified = false)
      : k_(k), d_(d), comps_(std::move(components)), label_(std::move(label)) {
    if (k != 1 && k != 2) throw ValidationError("map: dim must be 1 or 2");
    if (d < 2) throw ValidationError("map: degree must be >= 2");
    if (static_cast<int>(comps_.size()) != k + 1)
      throw ValidationError("map: expected k+1 components");
    int want = (k == 1) ? d + 1 : tri_size(d);
    for (const auto& c : comps_)
      if (static_cast<int>(c.size()) != want)
        throw ValidationError("map: component coefficient count mismatch");
    check_nondegenerate(nondegeneracy_certified);
  }

  int dim() const { return k_; }
  int degree() const { return d_; }
  int topological_degree() const {
    int t = 1;
    for (int i = 0; i < k_; ++i) t *= d_;
    return t;  // d^k
  }
  const std::string& label() const { return label_; }
  const std::vector<Coeffs>& components() const { return comps_; }

  Vec evaluate_lift(const Vec& v) const {
    Vec out(k_ + 1);
    if (k_ == 1)
      for (int c = 0; c <= 1; ++c) out[c] = binary_eval(comps_[c], v[0], v[1]);
    else
      for (int c = 0; c <= 2; ++c) out[c] = trivariate_eval(comps_[c], d_, v[0], v[1], v[2]);
    return out;
  }

  ProjectivePoint evaluate(const ProjectivePoint& x) const {
    if (x.dim() != k_) throw DimensionMismatch("evaluate: point/map dimension");
    Vec img = evaluate_lift(x.coords());
    if (img.norm() < 1e-300) throw DegenerateImage("evaluate: lift vanished at " + label_);
    return ProjectivePoint::canonicalize(img);
  }

  ProjectivePoint iterate(const ProjectivePoint& x, int n) const {
    ProjectivePoint p = x;
    for (int i = 0; i < n; ++i) p = evaluate(p);
    return p;
  }

 private:
  void check_nondegenerate(bool certified) const {
    if (k_ == 1) {
      Coeffs p = comps_[0] / std::max(comps_[0].cwiseAbs().maxCoeff(), 1e-300);
      Coeffs q = comps_[1] / std::max(comps_[1].cwiseAbs().maxCoeff(), 1e-300);
      // resultant of the two binary forms: Sylvester determinant with both
      // components kept at formal degree d (zero leading z-coefficients stay)
      cplx res = sylvester_det(p, q);
      if (std::abs(res) <= 1e-10)
        throw ValidationError("map " + label_ + ": components share a root (resultant ~ 0)");
    } else {
      Rng rng(0xC0FFEE, 7);
      for (int t = 0; t < 100; ++t) {
        ProjectivePoint x = random_point(2, rng);
        if (evaluate_lift(x.coords()).norm() <= 1e-10)
          throw ValidationError("map " + label_ + ": lift nearly vanishes at a sampled point");
      }
      (void)certified;  // declared certificate flag; probabilistic check always runs
    }
  }

  int k_;
  int d_;
  std::vector<Coeffs> comps_;
  std::string label_;
};

struct MapIterate {
  const HomogeneousMap* base;
  int n;
  ProjectivePoint evaluate(const ProjectivePoint& x) const { return base->iterate(x, n); }
};

// d^{-n} log||F^n(v)|| with per-step renormalization; stable for n <= 60.
inline double evaluate_lift_norm_log(const HomogeneousMap& f, const Vec& v, int n) {
  double nv = v.norm();
  if (!(nv > 1e-300)) throw ZeroVector("evaluate_lift_norm_log");
  double acc = std::log(nv);
  Vec u = v / nv;
  double scale = 1.0;
  const double invd = 1.0 / f.degree();
  for (int j = 1; j <= n; ++j) {
    Vec w = f.evaluate_lift(u);
    double nw = w.norm();
    if (!(nw > 1e-300)) throw DegenerateImage("evaluate_lift_norm_log: lift vanished");
    scale *= invd;
    acc += scale * std::log(nw);
    u = w / nw;
  }
  return acc;
}

// Direction of F^n(v) as a unit vector (renormalized per step).
inline Vec lift_iterate_direction(const HomogeneousMap& f, const Vec& v, int n) {
  Vec u = v / v.norm();
  for (int j = 0; j < n; ++j) {
    Vec w = f.evaluate_lift(u);
    double nw = w.norm();
    if (!(nw > 1e-300)) throw DegenerateImage("lift_iterate_direction: lift vanished");
    u = w / nw;
  }
  return u;
}

// Estimate of the chordal Lipschitz constant A2: sampled difference quotients
// at scale 1e-5, then a shrinking random local search around the best point.
inline double spherical_derivative_sup(const HomogeneousMap& f, int samples = 2000) {
  if (samples < 1000) samples = 1000;
  Rng rng(0xA2A2A2, 11);
  const double h = 1e-5;
  auto ratio_at = [&](const ProjectivePoint& x, Rng& r) {
    double best = 0.0;
    for (int dir = 0; dir < 12; ++dir) {
      Vec pert(f.dim() + 1);
      for (int i = 0; i <= f.dim(); ++i) pert[i] = r.complex_normal();
      Vec yv = x.coords() + h * pert / pert.norm();
      ProjectivePoint y = ProjectivePoint::canonicalize(yv);
      double base = fs_distance(x, y);
      if (base < h * 1e-3) continue;
      best = std::max(best, fs_distance(f.evaluate(x), f.evaluate(y)) / base);
    }
    return best;
  };
  double best = 1.0;
  ProjectivePoint best_x;
  bool have = false;
  for (int t = 0; t < samples; ++t) {
    ProjectivePoint x = random_point(f.dim(), rng);
    double r = ratio_at(x, rng);
    if (r > best || !have) {
      best = std::max(best, r);
      best_x = x;
      have = true;
    }
  }
  // local refinement with shrinking steps
  double step = 0.05;
  for (int round = 0; round < 40; ++round) {
    bool improved = false;
    for (int t = 0; t < 24; ++t) {
      Vec pert(f.dim() + 1);
      for (int i = 0; i <= f.dim(); ++i) pert[i] = rng.complex_normal();
      ProjectivePoint cand = ProjectivePoint::canonicalize(best_x.coords() + step * pert / pert.norm());
      double r = ratio_at(cand, rng);
      if (r > best) {
        best = r;
        best_x = cand;
        improved = true;
      }
    }
    if (!improved) step *= 0.6;
    if (step < 1e-5) break;
  }
  return std::max(best, 1.0);
}

// Critical points of a rational map (k = 1): roots of the Wronskian of the
// two binary forms, 2d - 2 counted with multiplicity.
inline std::vector<std::pair<ProjectivePoint, int>> critical_points_k1(const HomogeneousMap& f) {
  if (f.dim() != 1) throw DimensionMismatch("critical_points_k1: needs k = 1");
  Coeffs w = binary_mul(binary_dz(f.components()[0]), binary_dw(f.components()[1]));
  Coeffs w2 = binary_mul(binary_dw(f.components()[0]), binary_dz(f.components()[1]));
  w -= w2;  // degree 2d - 2 binary form, coeff[j] ~ z^j w^{2d-2-j}
  double scale = w.cwiseAbs().maxCoeff();
  if (!(scale > 0)) throw SolverFailure("critical_points_k1: zero Wronskian");
  Coeffs poly = w / scale;  // univariate in z at w = 1
  int at_inf = poly_trim(poly);
  std::vector<std::pair<ProjectivePoint, int>> out;
  if (poly.size() > 1) {
    for (const auto& cl : poly_root_clusters(poly, 1e-7)) {
      double resid = std::abs(poly_eval(poly, cl.center));
      if (resid > 1e-10 * (1.0 + std::pow(std::abs(cl.center), static_cast<double>(poly.size() - 1))))
        throw SolverFailure("critical_points_k1: root refinement residual too large");
      out.emplace_back(affine_point(cl.center), cl.multiplicity);
    }
  }
  if (at_inf > 0) out.emplace_back(infinity_point(), at_inf);
  return out;
}

// ---- presets ---------------------------------------------------------------

inline HomogeneousMap preset_map(const std::string& name) {
  auto bform = [](std::initializer_list<cplx> c) {
    Coeffs v(static_cast<Eigen::Index>(c.size()));
    Eigen::Index i = 0;
    for (cplx x : c) v[i++] = x;
    return v;
  };
  if (name == "z2")  // z -> z^2
    return HomogeneousMap(1, 2, {bform({0, 0, 1}), bform({1, 0, 0})}, "z2");
  if (name == "z3")  // z -> z^3
    return HomogeneousMap(1, 3, {bform({0, 0, 0, 1}), bform({1, 0, 0, 0})}, "z3");
  if (name == "basilica")  // z -> z^2 - 1
    return HomogeneousMap(1, 2, {bform({-1, 0, 1}), bform({1, 0, 0})}, "basilica");
  if (name == "cheb")  // z -> z^2 - 2
    return HomogeneousMap(1, 2, {bform({-2, 0, 1}), bform({1, 0, 0})}, "cheb");
  if (name == "torus2") {  // [z^2 : w^2 : t^2]
    int d = 2;
    Coeffs z2 = Coeffs::Zero(tri_size(d)), w2 = Coeffs::Zero(tri_size(d)), t2 = Coeffs::Zero(tri_size(d));
    z2[tri_index(d, 2, 0)] = 1;
    w2[tri_index(d, 0, 2)] = 1;
    t2[tri_index(d, 0, 0)] = 1;
    return HomogeneousMap(2, 2, {z2, w2, t2}, "torus2", true);
  }
  throw ValidationError("unknown preset map: " + name);
}

}  // namespace equidist
