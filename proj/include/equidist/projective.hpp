#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "equidist/common.hpp"

namespace equidist {

// Homogeneous coordinate vectors live in C^{k+1}, k <= 2; fixed capacity 3
// keeps everything on the stack.
using Vec = Eigen::Matrix<cplx, Eigen::Dynamic, 1, 0, 3, 1>;
using Mat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

// A point of P^k stored by its canonical unit representative: Euclidean norm
// one, first coordinate of modulus > 1e-12 rotated to be real nonnegative.
class ProjectivePoint {
 public:
  ProjectivePoint() = default;

  static ProjectivePoint canonicalize(const Vec& raw) {
    double n = raw.norm();
    if (!(n > 1e-300)) throw ZeroVector("canonicalize: vector norm below 1e-300");
    Vec v = raw / n;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (std::abs(v[i]) > 1e-12) {
        cplx phase = std::conj(v[i]) / std::abs(v[i]);
        v *= phase;
        break;
      }
    }
    ProjectivePoint p;
    p.coords_ = v;
    return p;
  }

  const Vec& coords() const { return coords_; }
  int dim() const { return static_cast<int>(coords_.size()) - 1; }

  cplx operator[](int i) const { return coords_[i]; }

 private:
  Vec coords_;
};

// Fubini-Study (sine-chordal) distance: sqrt(1 - |<x,y>|^2) for unit
// representatives. Symmetric, zero iff equal projectively, bounded by 1.
inline double fs_distance(const ProjectivePoint& x, const ProjectivePoint& y) {
  if (x.dim() != y.dim()) throw DimensionMismatch("fs_distance: points of different dimension");
  // ||x ^ y|| = sin(angle) for unit representatives; unlike sqrt(1 - |<x,y>|^2)
  // this stays accurate near zero.
  const Vec& a = x.coords();
  const Vec& b = y.coords();
  double s2;
  if (a.size() == 2) {
    s2 = std::norm(a[0] * b[1] - a[1] * b[0]);
  } else {
    s2 = std::norm(a[1] * b[2] - a[2] * b[1]) + std::norm(a[2] * b[0] - a[0] * b[2]) +
         std::norm(a[0] * b[1] - a[1] * b[0]);
  }
  double s = std::sqrt(s2);
  return s < 1.0 ? s : 1.0;
}

struct ChartIndex {
  int index = 0;
};

// Affine coordinates in the chart {coordinate c != 0}.
inline Vec to_chart(const ProjectivePoint& x, ChartIndex c) {
  const int k = x.dim();
  if (c.index < 0 || c.index > k) throw DimensionMismatch("to_chart: chart index out of range");
  cplx pivot = x[c.index];
  if (std::abs(pivot) <= 1e-12) throw PointAtInfinity("to_chart: chart coordinate vanishes");
  Vec out(k);
  int j = 0;
  for (int i = 0; i <= k; ++i)
    if (i != c.index) out[j++] = x[i] / pivot;
  return out;
}

inline ProjectivePoint from_chart(const Vec& affine, ChartIndex c, int k) {
  Vec v(k + 1);
  int j = 0;
  for (int i = 0; i <= k; ++i) v[i] = (i == c.index) ? cplx(1.0, 0.0) : affine[j++];
  return ProjectivePoint::canonicalize(v);
}

// Affine point on the line: [z : 1].
inline ProjectivePoint affine_point(cplx z) {
  Vec v(2);
  v << z, cplx(1.0, 0.0);
  return ProjectivePoint::canonicalize(v);
}

inline ProjectivePoint infinity_point() {
  Vec v(2);
  v << cplx(1.0, 0.0), cplx(0.0, 0.0);
  return ProjectivePoint::canonicalize(v);
}

// Haar-ish random unitary on C^n via Gram-Schmidt of a Gaussian matrix.
inline Mat random_unitary(int n, Rng& rng) {
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = rng.complex_normal();
  Eigen::HouseholderQR<Mat> qr(m);
  Mat q = qr.householderQ() * Mat::Identity(n, n);
  return q;
}

inline ProjectivePoint random_point(int k, Rng& rng) {
  Vec v(k + 1);
  for (int i = 0; i <= k; ++i) v[i] = rng.complex_normal();
  return ProjectivePoint::canonicalize(v);
}

// Total order on canonical representatives; used for reproducible fiber
// ordering regardless of solver schedule.
inline bool point_less(const ProjectivePoint& a, const ProjectivePoint& b) {
  for (int i = 0; i <= a.dim(); ++i) {
    double ar = a[i].real(), br = b[i].real();
    if (std::abs(ar - br) > 1e-11) return ar < br;
    double ai = a[i].imag(), bi = b[i].imag();
    if (std::abs(ai - bi) > 1e-11) return ai < bi;
  }
  return false;
}

}  // namespace equidist
