#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "equidist/common.hpp"

namespace equidist {

// Coefficients in increasing degree: c[0] + c[1] z + ... + c[d] z^d.
using Coeffs = Eigen::VectorXcd;

inline cplx poly_eval(const Coeffs& c, cplx z) {
  cplx acc(0.0, 0.0);
  for (Eigen::Index i = c.size() - 1; i >= 0; --i) acc = acc * z + c[i];
  return acc;
}

inline Coeffs poly_derivative(const Coeffs& c) {
  if (c.size() <= 1) return Coeffs::Zero(1);
  Coeffs d(c.size() - 1);
  for (Eigen::Index i = 1; i < c.size(); ++i) d[i - 1] = static_cast<double>(i) * c[i];
  return d;
}

// Drops leading coefficients below reltol * max|c|; returns the number dropped
// (projectively: roots at infinity).
inline int poly_trim(Coeffs& c, double reltol = 1e-12) {
  double scale = c.cwiseAbs().maxCoeff();
  if (!(scale > 0)) throw ZeroVector("poly_trim: zero polynomial");
  int dropped = 0;
  Eigen::Index d = c.size() - 1;
  while (d > 0 && std::abs(c[d]) <= reltol * scale) {
    --d;
    ++dropped;
  }
  c.conservativeResize(d + 1);
  return dropped;
}

// Aberth-Ehrlich simultaneous iteration. Expects a nonzero leading
// coefficient; returns all deg roots (multiple roots as nearby clusters).
inline std::vector<cplx> aberth_roots(const Coeffs& coeffs, int max_iters = 200) {
  const int d = static_cast<int>(coeffs.size()) - 1;
  if (d <= 0) return {};
  Coeffs c = coeffs / coeffs.cwiseAbs().maxCoeff();
  if (d == 1) return {-c[0] / c[1]};
  Coeffs dc = poly_derivative(c);

  // Cauchy-style radius bound for initial guesses.
  double r = 0.0;
  for (int i = 0; i < d; ++i) {
    double t = std::pow(std::abs(c[i] / c[d]), 1.0 / (d - i));
    r = std::max(r, t);
  }
  r = 1.0 + 2.0 * r;
  std::vector<cplx> z(d);
  for (int i = 0; i < d; ++i) {
    double ang = 6.283185307179586 * (i + 0.25) / d + 0.4;
    z[i] = r * cplx(std::cos(ang), std::sin(ang));
  }

  for (int it = 0; it < max_iters; ++it) {
    double worst = 0.0;
    for (int i = 0; i < d; ++i) {
      cplx p = poly_eval(c, z[i]);
      cplx dp = poly_eval(dc, z[i]);
      if (std::abs(dp) < 1e-280) dp = cplx(1e-280, 0);
      cplx newton = p / dp;
      cplx sum(0, 0);
      for (int j = 0; j < d; ++j)
        if (j != i) {
          cplx diff = z[i] - z[j];
          if (std::abs(diff) < 1e-280) diff = cplx(1e-280, 0);
          sum += 1.0 / diff;
        }
      cplx denom = 1.0 - newton * sum;
      if (std::abs(denom) < 1e-280) denom = cplx(1e-280, 0);
      cplx step = newton / denom;
      z[i] -= step;
      worst = std::max(worst, std::abs(step) / (1.0 + std::abs(z[i])));
    }
    if (worst < 1e-14) break;
  }
  return z;
}

// sum |c_i| |z|^i, the scale of floating-point noise in poly_eval
inline double poly_eval_mag(const Coeffs& c, double az) {
  double acc = 0.0;
  for (Eigen::Index i = c.size() - 1; i >= 0; --i) acc = acc * az + std::abs(c[i]);
  return acc;
}

struct NewtonResult {
  cplx z;
  double last_step = 0.0;
  double residual = 0.0;
  double uncertainty = 0.0;  // backward-error ball: eval noise / |p'(z)|
  bool simple = false;       // converged and position certified to ~1e-9
};

inline NewtonResult newton_polish(const Coeffs& c, const Coeffs& dc, cplx z0, int max_iters = 60) {
  NewtonResult r;
  cplx z = z0;
  double step = 1.0;
  for (int it = 0; it < max_iters; ++it) {
    cplx p = poly_eval(c, z);
    cplx dp = poly_eval(dc, z);
    if (std::abs(dp) < 1e-280) break;
    cplx s = p / dp;
    step = std::abs(s);
    if (step > 0.1 * (1.0 + std::abs(z))) break;  // out of basin, keep z
    z -= s;
    if (step <= 1e-13 * (1.0 + std::abs(z))) break;
  }
  r.z = z;
  r.last_step = step;
  r.residual = std::abs(poly_eval(c, z));
  double dpz = std::abs(poly_eval(dc, z));
  double noise = 1e-15 * poly_eval_mag(c, std::abs(z));
  r.uncertainty = noise / std::max(dpz, 1e-280);
  // a multiple root's fragments evaluate to noise-level values, so the step
  // alone can vanish there; require the position to be well conditioned too
  double scale = 1.0 + std::abs(z);
  r.simple = step <= 1e-11 * scale && r.uncertainty <= 1e-9 * scale;
  return r;
}

struct RootCluster {
  cplx center;
  int multiplicity = 1;
  double spread = 0.0;  // max member distance to center, a cluster diagnostic
};

namespace detail {
inline int uf_find(std::vector<int>& p, int i) {
  while (p[i] != i) i = p[i] = p[p[i]];
  return i;
}
}  // namespace detail

// Newton-polishes every root of the polynomial `c` and groups them into
// multiplicity clusters. Roots with stalled (linear) Newton convergence are
// fragments of a multiple root scattered at ~eps^{1/m}; those merge at a much
// larger radius than cleanly converged simple roots.
inline std::vector<RootCluster> cluster_poly_roots(const Coeffs& c, const std::vector<cplx>& raw,
                                                   double cluster_radius, double multi_radius = 1e-3) {
  const int n = static_cast<int>(raw.size());
  Coeffs dc = poly_derivative(c);
  std::vector<NewtonResult> ref(n);
  for (int i = 0; i < n; ++i) ref[i] = newton_polish(c, dc, raw[i]);

  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double radius = (!ref[i].simple && !ref[j].simple) ? multi_radius : cluster_radius;
      double dist = std::abs(ref[i].z - ref[j].z);
      // relative for large roots
      double scale = 1.0 + std::min(std::abs(ref[i].z), std::abs(ref[j].z));
      if (dist <= radius * scale) parent[detail::uf_find(parent, i)] = detail::uf_find(parent, j);
    }

  std::vector<RootCluster> out;
  std::vector<char> done(n, 0);
  for (int i = 0; i < n; ++i) {
    int r = detail::uf_find(parent, i);
    if (done[r]) continue;
    done[r] = 1;
    RootCluster cl;
    cplx sum(0, 0);
    int m = 0;
    for (int j = 0; j < n; ++j)
      if (detail::uf_find(parent, j) == r) {
        sum += ref[j].z;
        ++m;
      }
    cl.center = sum / static_cast<double>(m);
    cl.multiplicity = m;
    if (m >= 2) {
      // m-fold root of p is a simple root of p^{(m-1)}
      Coeffs dm = c;
      for (int t = 0; t < m - 1; ++t) dm = poly_derivative(dm);
      NewtonResult pol = newton_polish(dm, poly_derivative(dm), cl.center);
      if (std::abs(pol.z - cl.center) <= multi_radius) cl.center = pol.z;
    }
    for (int j = 0; j < n; ++j)
      if (detail::uf_find(parent, j) == r)
        cl.spread = std::max(cl.spread, std::abs(ref[j].z - cl.center));
    out.push_back(cl);
  }
  return out;
}

inline std::vector<RootCluster> poly_root_clusters(const Coeffs& c, double cluster_radius) {
  return cluster_poly_roots(c, aberth_roots(c), cluster_radius);
}

// ---- dense bivariate polynomials (for resultant elimination) --------------

// coeff(i, j) multiplies u^i v^j.
class BivarPoly {
 public:
  BivarPoly() : c_(Eigen::MatrixXcd::Zero(1, 1)) {}
  explicit BivarPoly(Eigen::MatrixXcd c) : c_(std::move(c)) {}

  static BivarPoly constant(cplx v) {
    Eigen::MatrixXcd m(1, 1);
    m(0, 0) = v;
    return BivarPoly(m);
  }
  // a*u + b*v + c0
  static BivarPoly linear(cplx a, cplx b, cplx c0) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2, 2);
    m(0, 0) = c0;
    m(1, 0) = a;
    m(0, 1) = b;
    return BivarPoly(m);
  }

  const Eigen::MatrixXcd& coeffs() const { return c_; }
  int deg_u() const { return static_cast<int>(c_.rows()) - 1; }
  int deg_v() const { return static_cast<int>(c_.cols()) - 1; }

  cplx eval(cplx u, cplx v) const {
    cplx acc(0, 0);
    for (Eigen::Index i = c_.rows() - 1; i >= 0; --i) {
      cplx row(0, 0);
      for (Eigen::Index j = c_.cols() - 1; j >= 0; --j) row = row * v + c_(i, j);
      acc = acc * u + row;
    }
    return acc;
  }

  // coefficients as a polynomial in v after substituting u
  Coeffs at_u(cplx u) const {
    Coeffs out = Coeffs::Zero(c_.cols());
    for (Eigen::Index j = 0; j < c_.cols(); ++j) {
      cplx acc(0, 0);
      for (Eigen::Index i = c_.rows() - 1; i >= 0; --i) acc = acc * u + c_(i, j);
      out[j] = acc;
    }
    return out;
  }

  Coeffs at_v(cplx v) const {
    Coeffs out = Coeffs::Zero(c_.rows());
    for (Eigen::Index i = 0; i < c_.rows(); ++i) {
      cplx acc(0, 0);
      for (Eigen::Index j = c_.cols() - 1; j >= 0; --j) acc = acc * v + c_(i, j);
      out[i] = acc;
    }
    return out;
  }

  BivarPoly operator*(const BivarPoly& o) const {
    Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(c_.rows() + o.c_.rows() - 1, c_.cols() + o.c_.cols() - 1);
    for (Eigen::Index i = 0; i < c_.rows(); ++i)
      for (Eigen::Index j = 0; j < c_.cols(); ++j) {
        if (c_(i, j) == cplx(0, 0)) continue;
        for (Eigen::Index p = 0; p < o.c_.rows(); ++p)
          for (Eigen::Index q = 0; q < o.c_.cols(); ++q) r(i + p, j + q) += c_(i, j) * o.c_(p, q);
      }
    return BivarPoly(r);
  }

  BivarPoly& operator+=(const BivarPoly& o) {
    Eigen::Index rows = std::max(c_.rows(), o.c_.rows());
    Eigen::Index cols = std::max(c_.cols(), o.c_.cols());
    Eigen::MatrixXcd r = Eigen::MatrixXcd::Zero(rows, cols);
    r.topLeftCorner(c_.rows(), c_.cols()) = c_;
    r.topLeftCorner(o.c_.rows(), o.c_.cols()) += o.c_;
    c_ = r;
    return *this;
  }

  BivarPoly scaled(cplx s) const { return BivarPoly(c_ * s); }

  // partial derivatives
  BivarPoly d_du() const {
    if (c_.rows() <= 1) return BivarPoly();
    Eigen::MatrixXcd r(c_.rows() - 1, c_.cols());
    for (Eigen::Index i = 1; i < c_.rows(); ++i) r.row(i - 1) = static_cast<double>(i) * c_.row(i);
    return BivarPoly(r);
  }
  BivarPoly d_dv() const {
    if (c_.cols() <= 1) return BivarPoly();
    Eigen::MatrixXcd r(c_.rows(), c_.cols() - 1);
    for (Eigen::Index j = 1; j < c_.cols(); ++j) r.col(j - 1) = static_cast<double>(j) * c_.col(j);
    return BivarPoly(r);
  }

  double max_abs() const { return c_.cwiseAbs().maxCoeff(); }

  // sum |c_ij| |u|^i |v|^j, the floating-point noise scale of eval
  double eval_mag(double au, double av) const {
    double acc = 0.0;
    for (Eigen::Index i = c_.rows() - 1; i >= 0; --i) {
      double row = 0.0;
      for (Eigen::Index j = c_.cols() - 1; j >= 0; --j) row = row * av + std::abs(c_(i, j));
      acc = acc * au + row;
    }
    return acc;
  }

 private:
  Eigen::MatrixXcd c_;
};

inline BivarPoly operator+(BivarPoly a, const BivarPoly& b) {
  a += b;
  return a;
}
inline BivarPoly operator-(const BivarPoly& a, const BivarPoly& b) { return a + b.scaled(cplx(-1, 0)); }

// ---- Sylvester resultant via evaluation/interpolation ---------------------

// Determinant of the Sylvester matrix of two univariate polynomials.
inline cplx sylvester_det(const Coeffs& p, const Coeffs& q) {
  int m = static_cast<int>(p.size()) - 1;
  int n = static_cast<int>(q.size()) - 1;
  if (m <= 0 && n <= 0) return cplx(1, 0);
  Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(m + n, m + n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= m; ++j) s(i, i + j) = p[m - j];
  for (int i = 0; i < m; ++i)
    for (int j = 0; j <= n; ++j) s(n + i, i + j) = q[n - j];
  return Eigen::PartialPivLU<Eigen::MatrixXcd>(s).determinant();
}

// Res_v(G1, G2) as a polynomial in u, recovered by sampling on a circle and
// solving the Vandermonde system. degree_bound must dominate the true degree.
inline Coeffs resultant_in_u(const BivarPoly& g1, const BivarPoly& g2, int degree_bound) {
  const int n = degree_bound + 1;
  Eigen::VectorXcd values(n);
  Eigen::MatrixXcd vand(n, n);
  const double radius = 1.1;
  for (int s = 0; s < n; ++s) {
    double ang = 6.283185307179586 * s / n + 0.31;
    cplx u = radius * cplx(std::cos(ang), std::sin(ang));
    values[s] = sylvester_det(g1.at_u(u), g2.at_u(u));
    cplx pw(1, 0);
    for (int j = 0; j < n; ++j) {
      vand(s, j) = pw;
      pw *= u;
    }
  }
  Coeffs res = vand.partialPivLu().solve(values);
  return res;
}

}  // namespace equidist
