#pragma once

#include <array>
#include <map>
#include <memory>
#include <vector>

#include "equidist/test_functions.hpp"

namespace equidist {

// f_*^n phi evaluated lazily: (f_*phi)(x) = sum_{y in f^{-1}(x)} phi(y) with
// multiplicities. Fiber solves are memoized by point at 1e-10 granularity.
class PushforwardFunction {
 public:
  PushforwardFunction(TestFunction base, HomogeneousMap map, int order, SolverSettings solver,
                      double prefactor = 1.0)
      : base_(std::move(base)),
        map_(std::move(map)),
        order_(order),
        solver_(solver),
        prefactor_(prefactor),
        memo_(std::make_shared<std::map<Key, double>>()) {
    if (order < 1) throw ValidationError("PushforwardFunction: order must be >= 1");
  }

  double operator()(const ProjectivePoint& x) const {
    Key key{};
    for (int i = 0; i <= x.dim(); ++i) {
      key[2 * i] = static_cast<long long>(std::llround(x[i].real() * 1e10));
      key[2 * i + 1] = static_cast<long long>(std::llround(x[i].imag() * 1e10));
    }
    auto it = memo_->find(key);
    if (it != memo_->end()) return it->second;
    WeightedFiber tree = backward_tree(map_, x, order_, solver_);
    double acc = 0.0;
    for (const auto& atom : tree.points)
      acc += static_cast<double>(atom.multiplicity) * base_(atom.point);
    acc *= prefactor_;
    (*memo_)[key] = acc;
    return acc;
  }

  const TestFunction& base_fn() const { return base_; }
  int order() const { return order_; }
  double prefactor() const { return prefactor_; }

  // sup|f_* phi| <= d^k sup|phi|; grad data is not propagated (solver-defined)
  TestFunction as_test_function(const std::string& label) const {
    TestFunction t;
    auto self = *this;
    t.eval = [self](const ProjectivePoint& p) { return self(p); };
    double dk = std::pow(map_.topological_degree(), order_);
    t.grad_sup = -1.0;
    t.holder_alpha = base_.holder_alpha;
    t.holder_norm = std::abs(prefactor_) * dk * base_.holder_norm;
    t.label = label;
    return t;
  }

 private:
  using Key = std::array<long long, 6>;
  TestFunction base_;
  HomogeneousMap map_;
  int order_;
  SolverSettings solver_;
  double prefactor_;
  std::shared_ptr<std::map<Key, double>> memo_;
};

inline PushforwardFunction pushforward(const TestFunction& phi, const HomogeneousMap& f,
                                       const SolverSettings& s, int order = 1) {
  return PushforwardFunction(phi, f, order, s);
}

// Lambda = d^{1-k} f_*; Lambda^order applies the scaling once per level.
inline PushforwardFunction lambda_op(const TestFunction& phi, const HomogeneousMap& f,
                                     const SolverSettings& s, int order = 1) {
  double scale = std::pow(static_cast<double>(f.degree()), (1 - f.dim()) * order);
  return PushforwardFunction(phi, f, order, s, scale);
}

// ---- telescoping diagnostic (k = 1) ---------------------------------------

namespace detail {

// piecewise-bilinear function on two affine charts of P^1; the chart with the
// larger homogeneous coordinate always has affine modulus <= 1, inside the grid
struct ChartGridFn {
  int res = 64;
  double half = 1.05;
  Eigen::MatrixXd val[2];

  void allocate() {
    val[0] = Eigen::MatrixXd::Zero(res + 1, res + 1);
    val[1] = Eigen::MatrixXd::Zero(res + 1, res + 1);
  }

  cplx node(int i, int j) const {
    double h = 2.0 * half / res;
    return cplx(-half + h * i, -half + h * j);
  }

  ProjectivePoint node_point(int chart, int i, int j) const {
    Vec v(2);
    if (chart == 0)
      v << node(i, j), cplx(1, 0);
    else
      v << cplx(1, 0), node(i, j);
    return ProjectivePoint::canonicalize(v);
  }

  template <class F>
  void fill(F&& fn) {
    allocate();
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i <= res; ++i)
        for (int j = 0; j <= res; ++j) val[c](i, j) = fn(node_point(c, i, j));
  }

  double eval(const ProjectivePoint& p) const {
    int chart = std::abs(p[0]) > std::abs(p[1]) ? 1 : 0;
    cplx z = chart == 0 ? p[0] / p[1] : p[1] / p[0];
    double h = 2.0 * half / res;
    double fx = (z.real() + half) / h, fy = (z.imag() + half) / h;
    int i = std::min(std::max(static_cast<int>(fx), 0), res - 1);
    int j = std::min(std::max(static_cast<int>(fy), 0), res - 1);
    double tx = std::min(std::max(fx - i, 0.0), 1.0), ty = std::min(std::max(fy - j, 0.0), 1.0);
    const Eigen::MatrixXd& v = val[chart];
    return (1 - tx) * ((1 - ty) * v(i, j) + ty * v(i, j + 1)) +
           tx * ((1 - ty) * v(i + 1, j) + ty * v(i + 1, j + 1));
  }

  TestFunction as_test_function(const std::string& label) const {
    auto self = std::make_shared<ChartGridFn>(*this);
    TestFunction t;
    t.eval = [self](const ProjectivePoint& p) { return self->eval(p); };
    double m = std::max(val[0].cwiseAbs().maxCoeff(), val[1].cwiseAbs().maxCoeff());
    t.grad_sup = -1.0;
    t.holder_norm = m;
    t.label = label;
    return t;
  }

  double max_abs() const {
    return std::max(val[0].cwiseAbs().maxCoeff(), val[1].cwiseAbs().maxCoeff());
  }
};

}  // namespace detail

struct TelescopeState {
  int level = 0;
  TestFunction phi_i;
  double c_i = 0.0;
  double psi_sup_off_tube = 0.0;
  double phi_sup = 0.0;
  double theta_i = 0.0;
  double schedule_M = 0.0, schedule_delta = 0.0, schedule_l = 1.0;
  int schedule_n = 0;
};

// Lambda(phi_{i-1}) = c_i + phi_i + psi_i with c_i + phi_i the theta_i-regularized
// function, theta_i = exp(-M l delta^i n). Diagnostic only: functions are carried
// on interpolation grids, and no constant from the schedule is asserted.
inline std::vector<TelescopeState> telescope_run(const TestFunction& phi0,
                                                 const HomogeneousMap& f,
                                                 const ProjectivePoint& a, int n, double M,
                                                 double delta, const SolverSettings& s,
                                                 const MuEstimate& mu,
                                                 const std::vector<ProjectivePoint>& exceptional = {},
                                                 double off_tube_radius = 0.1, int grid_res = 64) {
  if (f.dim() != 1) throw DimensionMismatch("telescope_run: diagnostic supports k = 1 only");
  if (!(delta > 1.0) || !(delta < f.degree()))
    throw ValidationError("telescope_run: need 1 < delta < d");
  double dist_e = 1.0;
  for (const auto& e : exceptional) dist_e = std::min(dist_e, fs_distance(a, e));
  double l = 1.0 + log_plus(1.0 / std::max(dist_e, 1e-300));

  auto off_tube = [&](const ProjectivePoint& p) {
    for (const auto& e : exceptional)
      if (fs_distance(p, e) <= off_tube_radius) return false;
    return true;
  };

  detail::ChartGridFn cur;
  cur.res = grid_res;
  cur.fill(phi0);
  std::vector<TelescopeState> out;
  for (int i = 1; i <= n; ++i) {
    double exponent = -M * l * std::pow(delta, i) * n;
    double theta = std::exp(exponent);
    if (!(theta > 1e-300)) throw ScheduleUnderflow("telescope_run: theta underflowed");
    PushforwardFunction lam = lambda_op(cur.as_test_function("level"), f, s);
    detail::ChartGridFn lam_grid;
    lam_grid.res = grid_res;
    lam_grid.fill([&](const ProjectivePoint& p) { return lam(p); });

    RegularizationScheme scheme(1, std::min(theta, 0.999), 100, s.rng_seed);
    detail::ChartGridFn reg;
    reg.res = grid_res;
    reg.fill([&](const ProjectivePoint& p) {
      double acc = 0.0;
      for (const Mat& m : scheme.perturbations)
        acc += lam_grid.eval(ProjectivePoint::canonicalize(m * p.coords()));
      return acc / static_cast<double>(scheme.perturbations.size());
    });

    double c = pair(mu.measure, [&](const ProjectivePoint& p) { return reg.eval(p); });
    detail::ChartGridFn phi = reg;
    phi.val[0].array() -= c;
    phi.val[1].array() -= c;

    TelescopeState st;
    st.level = i;
    st.c_i = c;
    st.theta_i = theta;
    st.schedule_M = M;
    st.schedule_delta = delta;
    st.schedule_l = l;
    st.schedule_n = n;
    st.phi_sup = phi.max_abs();
    for (int ch = 0; ch < 2; ++ch)
      for (int gi = 0; gi <= grid_res; ++gi)
        for (int gj = 0; gj <= grid_res; ++gj) {
          ProjectivePoint p = phi.node_point(ch, gi, gj);
          if (!off_tube(p)) continue;
          double psi = lam_grid.val[ch](gi, gj) - reg.val[ch](gi, gj);
          st.psi_sup_off_tube = std::max(st.psi_sup_off_tube, std::abs(psi));
        }
    st.phi_i = phi.as_test_function("phi_" + std::to_string(i));
    out.push_back(std::move(st));
    cur = phi;
  }
  return out;
}

}  // namespace equidist
