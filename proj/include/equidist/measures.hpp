#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "equidist/fiber.hpp"

namespace equidist {

enum class Provenance { fiber, inverse_iteration_mc, external };

struct MeasureAtom {
  ProjectivePoint point;
  double weight = 0.0;
};

// A discrete probability measure on P^k.
struct DiscreteMeasure {
  std::vector<MeasureAtom> atoms;
  Provenance provenance = Provenance::external;

  double total_weight() const {
    double s = 0.0;
    for (const auto& a : atoms) s += a.weight;
    return s;
  }
};

// <nu, phi> for any callable observable (TestFunction or plain lambda).
template <class F>
double pair(const DiscreteMeasure& nu, F&& phi) {
  double s = 0.0;
  for (const auto& a : nu.atoms) s += a.weight * phi(a.point);
  return s;
}

// nu_n = d^{-kn} (f^n)^* delta_a as a probability measure.
inline DiscreteMeasure fiber_measure(const HomogeneousMap& f, const ProjectivePoint& a, int n,
                                     const SolverSettings& s) {
  WeightedFiber tree = backward_tree(f, a, n, s);
  double total = static_cast<double>(tree.total_multiplicity());
  DiscreteMeasure nu;
  nu.provenance = Provenance::fiber;
  nu.atoms.reserve(tree.points.size());
  for (const auto& p : tree.points)
    nu.atoms.push_back(MeasureAtom{p.point, static_cast<double>(p.multiplicity) / total});
  return nu;
}

// Monte Carlo estimate of the equilibrium measure by inverse iteration.
// Endpoints of independent backward walks are i.i.d. samples whose law
// converges geometrically to mu; per-observable errors come from batch means.
struct MuEstimate {
  DiscreteMeasure measure;
  int burn_in = 0;
  int samples = 0;
  int num_batches = 16;
  std::vector<int> batch;  // parallel to measure.atoms

  // (mean, batch-means standard error) of an arbitrary real observable
  template <class F>
  std::pair<double, double> pair_with_stderr(F&& phi) const {
    const int nb = num_batches;
    std::vector<double> bsum(nb, 0.0), bw(nb, 0.0);
    for (size_t i = 0; i < measure.atoms.size(); ++i) {
      double v = phi(measure.atoms[i].point);
      bsum[batch[i]] += measure.atoms[i].weight * v;
      bw[batch[i]] += measure.atoms[i].weight;
    }
    double mean = 0.0;
    for (int b = 0; b < nb; ++b) mean += bsum[b];
    double var = 0.0;
    int used = 0;
    for (int b = 0; b < nb; ++b) {
      if (!(bw[b] > 0)) continue;
      double m = bsum[b] / bw[b];
      var += (m - mean) * (m - mean);
      ++used;
    }
    if (used < 2) return {mean, 0.0};
    var /= used * (used - 1.0);
    return {mean, std::sqrt(var)};
  }
};

inline MuEstimate estimate_mu(const HomogeneousMap& f, const SolverSettings& s, int samples,
                              int burn_in, const ProjectivePoint& start,
                              const std::vector<ProjectivePoint>& exceptional = {}) {
  if (samples < 1000) throw ValidationError("estimate_mu: samples must be >= 1000");
  if (burn_in < 20) throw ValidationError("estimate_mu: burn_in must be >= 20");
  for (const auto& e : exceptional)
    if (fs_distance(start, e) < 1e-9)
      throw ExceptionalStart("estimate_mu: start point lies on the exceptional set");
  MuEstimate est;
  est.burn_in = burn_in;
  est.samples = samples;
  est.measure.provenance = Provenance::inverse_iteration_mc;
  est.measure.atoms.resize(samples);
  est.batch.resize(samples);
  double w = 1.0 / samples;
  for (int i = 0; i < samples; ++i) {
    est.measure.atoms[i] =
        MeasureAtom{sample_inverse_branch(f, start, burn_in, s, static_cast<std::uint64_t>(i)), w};
    est.batch[i] = static_cast<int>((static_cast<long long>(i) * est.num_batches) / samples);
  }
  return est;
}

// Potential-theoretic cross-check (k = 1 only): Green function on a chart
// grid, discrete Laplacian, normalize. Diagnostic-quality estimator of mu.
inline DiscreteMeasure green_mu_grid_k1(const HomogeneousMap& f, int grid_resolution) {
  if (f.dim() != 1) throw DimensionMismatch("green_mu_grid_k1: needs k = 1");
  if (grid_resolution < 16 || grid_resolution > 2048)
    throw GridOverflow("green_mu_grid_k1: resolution must lie in [16, 2048]");
  const int iters = 40;
  DiscreteMeasure mu;
  mu.provenance = Provenance::external;

  auto add_chart = [&](int chart, double half_width, int res) {
    const double h = 2.0 * half_width / res;
    Eigen::MatrixXd g(res + 1, res + 1);
    for (int i = 0; i <= res; ++i)
      for (int j = 0; j <= res; ++j) {
        cplx z(-half_width + h * i, -half_width + h * j);
        Vec v(2);
        if (chart == 0)
          v << z, cplx(1, 0);
        else
          v << cplx(1, 0), z;
        g(i, j) = evaluate_lift_norm_log(f, v, iters);
      }
    for (int i = 1; i < res; ++i)
      for (int j = 1; j < res; ++j) {
        cplx z(-half_width + h * i, -half_width + h * j);
        // chart 1 keeps only |zeta| < 1/3, the complement of the chart-0 window
        if (chart == 1 && std::abs(z) >= 1.0 / 3.0) continue;
        if (chart == 0 && std::abs(z) > 3.0) continue;
        double lap = g(i + 1, j) + g(i - 1, j) + g(i, j + 1) + g(i, j - 1) - 4.0 * g(i, j);
        if (lap < -1e-9) continue;  // clip discretization noise
        if (lap <= 0.0) continue;
        Vec v(2);
        if (chart == 0)
          v << z, cplx(1, 0);
        else
          v << cplx(1, 0), z;
        mu.atoms.push_back(MeasureAtom{ProjectivePoint::canonicalize(v), lap});
      }
  };
  add_chart(0, 3.2, grid_resolution);
  add_chart(1, 1.0 / 3.0, std::max(grid_resolution / 4, 16));

  double total = mu.total_weight();
  if (!(total > 0)) throw GridOverflow("green_mu_grid_k1: no positive Laplacian mass found");
  for (auto& a : mu.atoms) a.weight /= total;
  return mu;
}

}  // namespace equidist
