#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "equidist/operators.hpp"
#include "equidist/rate.hpp"

namespace equidist {

inline constexpr const char* kVersion = "equidist 0.3.0";

using Json = nlohmann::ordered_json;

// stable 64-bit hash for config fingerprints and per-experiment seeds
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

struct ExperimentSpec {
  std::string id;
  std::string kind;  // fiber | mu | rate | holder | exceptional | telescope | regularize
  Json body;         // validated experiment object (including any map override)
};

struct ExperimentSuite {
  std::string config_path;
  std::string default_map;  // preset name or "" when experiments carry inline maps
  Json default_map_inline;
  std::vector<ExperimentSpec> experiments;
  std::uint64_t global_seed = 20260823;
  std::string output_dir = "reports";
  Json raw;
};

namespace detail {

inline void reject_unknown_keys(const Json& obj, const std::set<std::string>& allowed,
                                const std::string& path) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ValidationError("unknown key at " + path + "." + key);
}

inline cplx json_to_cplx(const Json& v, const std::string& path) {
  if (v.is_number()) return cplx(v.get<double>(), 0.0);
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return cplx(v[0].get<double>(), v[1].get<double>());
  throw ValidationError("expected a number or [re, im] at " + path);
}

inline ProjectivePoint json_to_point(const Json& v, const std::string& path) {
  if (!v.is_array() || (v.size() != 2 && v.size() != 3))
    throw ValidationError("expected 2 or 3 homogeneous coordinates at " + path);
  Vec c(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i)
    c[static_cast<Eigen::Index>(i)] = json_to_cplx(v[i], path + "[" + std::to_string(i) + "]");
  if (c.norm() < 1e-300) throw ValidationError("zero coordinate vector at " + path);
  return ProjectivePoint::canonicalize(c);
}

inline Json point_to_json(const ProjectivePoint& p) {
  Json out = Json::array();
  for (int i = 0; i <= p.dim(); ++i) out.push_back({p[i].real(), p[i].imag()});
  return out;
}

inline HomogeneousMap map_from_json(const Json& v, const std::string& path) {
  if (v.is_string()) return preset_map(v.get<std::string>());
  if (!v.is_object()) throw ValidationError("expected a preset name or map object at " + path);
  reject_unknown_keys(v, {"k", "degree", "components", "label"}, path);
  for (const char* key : {"k", "degree", "components"})
    if (!v.contains(key)) throw ValidationError(std::string("missing key ") + path + "." + key);
  int k = v.at("k").get<int>();
  int d = v.at("degree").get<int>();
  const Json& comps = v.at("components");
  if (!comps.is_array())
    throw ValidationError("expected an array of coefficient lists at " + path + ".components");
  std::vector<Coeffs> cs;
  for (size_t c = 0; c < comps.size(); ++c) {
    const Json& one = comps[c];
    std::string cpath = path + ".components[" + std::to_string(c) + "]";
    if (!one.is_array()) throw ValidationError("expected a coefficient list at " + cpath);
    Coeffs v2(static_cast<Eigen::Index>(one.size()));
    for (size_t i = 0; i < one.size(); ++i)
      v2[static_cast<Eigen::Index>(i)] = json_to_cplx(one[i], cpath);
    cs.push_back(v2);
  }
  std::string label = v.value("label", std::string("inline"));
  return HomogeneousMap(k, d, cs, label);  // ctor enforces d >= 2 and shape
}

inline const std::set<std::string>& allowed_keys(const std::string& kind) {
  static const std::map<std::string, std::set<std::string>> table = {
      {"fiber", {"id", "kind", "map", "point", "n", "csv"}},
      {"mu", {"id", "kind", "map", "samples", "burn_in", "start", "emit_atoms"}},
      {"rate",
       {"id", "kind", "map", "point", "fns", "n_max", "mu_samples", "lambda", "alpha",
        "mu_mean_override", "control", "csv"}},
      {"holder", {"id", "kind", "map", "base", "direction", "scales"}},
      {"exceptional",
       {"id", "kind", "map", "mode", "samples", "burn_in", "start", "t_grid", "pairs", "n"}},
      {"telescope", {"id", "kind", "map", "point", "phi", "n", "M", "delta", "mu_samples"}},
      {"regularize", {"id", "kind", "map", "phi", "thetas", "num_samples"}},
  };
  auto it = table.find(kind);
  if (it == table.end()) throw ValidationError("unknown experiment kind: " + kind);
  return it->second;
}

}  // namespace detail

inline ExperimentSuite load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config file not found: " + path);
  Json cfg;
  try {
    cfg = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config parse error: ") + e.what());
  }
  if (!cfg.is_object()) throw ValidationError("config root must be an object");
  detail::reject_unknown_keys(cfg, {"map", "experiments", "seed", "output_dir"}, "$");

  ExperimentSuite suite;
  suite.config_path = path;
  suite.raw = cfg;
  if (cfg.contains("seed")) suite.global_seed = cfg.at("seed").get<std::uint64_t>();
  suite.output_dir = cfg.value("output_dir", std::string("reports"));
  if (cfg.contains("map")) {
    // validate eagerly so bad default maps fail at load time
    detail::map_from_json(cfg.at("map"), "$.map");
    if (cfg.at("map").is_string())
      suite.default_map = cfg.at("map").get<std::string>();
    else
      suite.default_map_inline = cfg.at("map");
  }

  std::set<std::string> ids;
  const Json& exps = cfg.value("experiments", Json::array());
  for (size_t i = 0; i < exps.size(); ++i) {
    const Json& e = exps[i];
    std::string epath = "$.experiments[" + std::to_string(i) + "]";
    if (!e.is_object()) throw ValidationError("expected an object at " + epath);
    if (!e.contains("kind")) throw ValidationError("missing key " + epath + ".kind");
    ExperimentSpec spec;
    spec.kind = e.at("kind").get<std::string>();
    detail::reject_unknown_keys(e, detail::allowed_keys(spec.kind), epath);
    spec.id = e.value("id", spec.kind + "_" + std::to_string(i));
    if (!ids.insert(spec.id).second)
      throw ValidationError("duplicate experiment id '" + spec.id + "' at " + epath);
    spec.body = e;
    if (!e.contains("map")) {
      if (!cfg.contains("map"))
        throw ValidationError("no map for experiment at " + epath + " and no default map");
      spec.body["map"] = cfg.at("map");
    } else {
      detail::map_from_json(e.at("map"), epath + ".map");
    }
    suite.experiments.push_back(std::move(spec));
  }
  return suite;
}

// ---- experiment execution ---------------------------------------------------

namespace detail {

struct ExperimentResult {
  Json report;
  std::string csv;  // empty when the experiment emits none
  bool errored = false;
};

inline Json rate_report_to_json(const RateReport& rep) {
  Json out;
  Json en = Json::object();
  for (const auto& [n, e] : rep.e_n) en[std::to_string(n)] = e;
  out["e_n"] = en;
  Json bylbl = Json::object();
  for (const auto& [lbl, tab] : rep.e_n_by_label) {
    Json t = Json::object();
    for (const auto& [n, e] : tab) t[std::to_string(n)] = e;
    bylbl[lbl] = t;
  }
  out["e_n_by_label"] = bylbl;
  out["noise_floor"] = rep.noise_floor;
  out["fit_window"] = rep.fit_window;
  out["fitted_rate_rho"] = rep.fitted_rate_rho;
  out["prefactor_A"] = rep.prefactor_A;
  out["l_value"] = rep.l_value;
  out["rho_target"] = rep.rho_target;
  out["verdict"] = rep.verdict;
  return out;
}

inline ExperimentResult run_experiment(const ExperimentSpec& spec, std::uint64_t global_seed) {
  ExperimentResult res;
  const Json& b = spec.body;
  HomogeneousMap f = map_from_json(b.at("map"), "experiment.map");
  SolverSettings s;
  s.rng_seed = global_seed ^ fnv1a(spec.id);
  Json& rep = res.report;

  if (spec.kind == "fiber") {
    ProjectivePoint a = json_to_point(b.at("point"), "point");
    int n = b.at("n").get<int>();
    WeightedFiber fb = backward_tree(f, a, n, s);
    rep["n"] = n;
    rep["total_multiplicity"] = fb.total_multiplicity();
    rep["residual"] = fb.residual;
    Json atoms = Json::array();
    std::ostringstream csv;
    csv << "index,coords,multiplicity\n";
    for (size_t i = 0; i < fb.points.size(); ++i) {
      const auto& at = fb.points[i];
      atoms.push_back({{"point", point_to_json(at.point)}, {"multiplicity", at.multiplicity}});
      csv << i << ",\"";
      for (int c = 0; c <= at.point.dim(); ++c)
        csv << (c ? ";" : "") << at.point[c].real() << "+" << at.point[c].imag() << "i";
      csv << "\"," << at.multiplicity << "\n";
    }
    rep["atoms"] = atoms;
    if (b.value("csv", false)) res.csv = csv.str();
  } else if (spec.kind == "mu") {
    int samples = b.value("samples", 2000);
    int burn_in = b.value("burn_in", 30);
    ProjectivePoint start = json_to_point(b.at("start"), "start");
    MuEstimate mu = estimate_mu(f, s, samples, burn_in, start, declared_exceptional(f).points);
    rep["samples"] = samples;
    rep["burn_in"] = burn_in;
    Json pairings = Json::object();
    for (const auto& phi : builtin_suite(f.dim())) {
      auto [m, se] = mu.pair_with_stderr(phi);
      pairings[phi.label] = {{"mean", m}, {"stderr", se}};
    }
    rep["pairings"] = pairings;
    if (b.value("emit_atoms", false)) {
      Json atoms = Json::array();
      for (const auto& at : mu.measure.atoms) atoms.push_back(point_to_json(at.point));
      rep["atoms"] = atoms;
    }
  } else if (spec.kind == "rate") {
    RateExperimentConfig cfg{f, json_to_point(b.at("point"), "point"), {}, {},
                             b.value("mu_samples", 20000), 30,
                             b.value("lambda", 1.9), b.value("alpha", 2.0)};
    cfg.seed = s.rng_seed;
    cfg.solver = s;
    for (const auto& l : b.value("fns", Json::array({"Z"}))) cfg.fn_labels.push_back(l);
    for (int n = 1; n <= b.value("n_max", f.dim() == 1 ? 10 : 5); ++n) cfg.n_range.push_back(n);
    if (b.contains("mu_mean_override"))
      for (const auto& [lbl, v] : b.at("mu_mean_override").items())
        cfg.mu_mean_override[lbl] = v.get<double>();
    RateReport rr =
        b.value("control", false) ? run_exceptional_control(cfg) : run_rate_experiment(cfg);
    rep = rate_report_to_json(rr);
    if (b.value("csv", false)) {
      std::ostringstream csv;
      csv << "n,e_n,noise_floor,in_fit_window\n";
      for (const auto& [n, e] : rr.e_n) {
        bool in = std::find(rr.fit_window.begin(), rr.fit_window.end(), n) != rr.fit_window.end();
        csv << n << "," << e << "," << rr.noise_floor << "," << (in ? 1 : 0) << "\n";
      }
      res.csv = csv.str();
    }
  } else if (spec.kind == "holder") {
    ProjectivePoint base = json_to_point(b.at("base"), "base");
    Vec dir;
    if (b.contains("direction")) {
      const Json& dj = b.at("direction");
      dir = Vec(static_cast<Eigen::Index>(dj.size()));
      for (size_t i = 0; i < dj.size(); ++i)
        dir[static_cast<Eigen::Index>(i)] = json_to_cplx(dj[i], "direction");
    } else {
      dir = Vec::Zero(base.dim() + 1);
      dir[0] = cplx(1, 0);
    }
    std::vector<double> scales;
    for (const auto& h : b.value("scales", Json::array({1e-3, 1e-4, 1e-5, 1e-6})))
      scales.push_back(h.get<double>());
    HolderProbeReport hp = fiber_holder_probe(f, base, dir, scales, s);
    rep["base_x"] = point_to_json(hp.base_x);
    rep["base_y"] = point_to_json(hp.base_y);
    rep["separations"] = hp.separations;
    rep["matching_costs"] = hp.matching_costs;
    rep["fitted_exponent"] = hp.fitted_exponent;
    rep["local_multiplicity_m"] = hp.local_multiplicity_m;
  } else if (spec.kind == "exceptional") {
    std::string mode = b.value("mode", std::string("detect"));
    if (mode == "detect") {
      auto model = detect_exceptional_k1(f, s);
      Json pts = Json::array();
      for (const auto& p : model.points) pts.push_back(point_to_json(p));
      rep["detected_points"] = pts;
    } else if (mode == "probe-tube") {
      ProjectivePoint start = json_to_point(b.at("start"), "start");
      MuEstimate mu = estimate_mu(f, s, b.value("samples", 2000), b.value("burn_in", 30), start,
                                  declared_exceptional(f).points);
      std::vector<double> t_grid;
      for (const auto& t : b.value("t_grid", Json::array({0.05, 0.1, 0.2, 0.4})))
        t_grid.push_back(t.get<double>());
      auto tr = tubular_mass_probe(mu, declared_exceptional(f), t_grid);
      rep["t_grid"] = tr.t_grid;
      rep["mass"] = tr.mass;
      rep["all_zero"] = tr.all_zero;
      rep["beta_hat"] = tr.beta_hat;
      rep["fit_points"] = tr.fit_points;
    } else if (mode == "probe-contraction") {
      int pairs = b.value("pairs", 20);
      int n = b.value("n", 2);
      double a2 = spherical_derivative_sup(f);
      Rng rng(s.rng_seed, 606, 0);
      int violations = 0;
      double worst_margin = 1e300;
      for (int i = 0; i < pairs; ++i) {
        ProjectivePoint x = random_point(f.dim(), rng), y = random_point(f.dim(), rng);
        if (fs_distance(x, y) < 1e-6) continue;
        auto pr = backward_contraction_probe(f, x, y, n, s, a2);
        if (pr.violated) ++violations;
        worst_margin = std::min(worst_margin, pr.measured / pr.bound);
      }
      rep["pairs"] = pairs;
      rep["n"] = n;
      rep["a2_hat"] = a2;
      rep["violations"] = violations;
      rep["worst_margin"] = worst_margin;
    } else {
      throw ValidationError("unknown exceptional-scan mode: " + mode);
    }
  } else if (spec.kind == "telescope") {
    ProjectivePoint a = json_to_point(b.at("point"), "point");
    TestFunction phi = suite_member(f.dim(), b.value("phi", std::string("X")));
    MuEstimate mu = estimate_mu(f, s, b.value("mu_samples", 2000), 30, a,
                                declared_exceptional(f).points);
    auto states = telescope_run(recenter(phi, mu), f, a, b.value("n", 4),
                                b.value("M", 1.0), b.value("delta", 1.5), s, mu,
                                declared_exceptional(f).points);
    Json st = Json::array();
    for (const auto& t : states)
      st.push_back({{"level", t.level},
                    {"c_i", t.c_i},
                    {"psi_sup_off_tube", t.psi_sup_off_tube},
                    {"phi_sup", t.phi_sup},
                    {"theta_i", t.theta_i}});
    rep["states"] = st;
  } else if (spec.kind == "regularize") {
    TestFunction phi = suite_member(f.dim(), b.value("phi", std::string("X")));
    int num_samples = b.value("num_samples", 200);
    Json rows = Json::array();
    Rng probe_rng(s.rng_seed, 707, 0);
    std::vector<ProjectivePoint> probes;
    for (int i = 0; i < 1000; ++i) probes.push_back(random_point(f.dim(), probe_rng));
    for (const auto& tj : b.value("thetas", Json::array({0.1, 0.03, 0.01}))) {
      double theta = tj.get<double>();
      RegularizationScheme scheme(f.dim(), theta, num_samples, s.rng_seed);
      TestFunction reg = regularize(phi, scheme);
      double sup_diff = 0.0;
      for (const auto& p : probes) sup_diff = std::max(sup_diff, std::abs(reg(p) - phi(p)));
      rows.push_back({{"theta", theta},
                      {"eta_hat", scheme.displacement_factor_eta},
                      {"sup_diff", sup_diff},
                      {"bound", phi.grad_sup * scheme.displacement_factor_eta * theta}});
    }
    rep["phi"] = phi.label;
    rep["rows"] = rows;
  } else {
    throw ValidationError("unknown experiment kind: " + spec.kind);
  }
  return res;
}

}  // namespace detail

// Executes every experiment (worker pool bounded by EQUIDIST_THREADS), then
// writes one JSON report per experiment plus summary.json in config order.
// Reports embed config hash / seed / version; wall-clock timings go to the
// separate timings.json so reruns with equal seed stay byte-identical.
inline int run_suite(const ExperimentSuite& suite) {
  namespace fs = std::filesystem;
  fs::create_directories(suite.output_dir);
  const int n = static_cast<int>(suite.experiments.size());
  std::vector<detail::ExperimentResult> results(n);
  std::vector<double> wall(n, 0.0);

  int threads = 1;
  if (const char* env = std::getenv("EQUIDIST_THREADS")) threads = std::max(1, std::atoi(env));
  threads = std::min(threads, std::max(n, 1));

  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      auto t0 = std::chrono::steady_clock::now();
      const ExperimentSpec& spec = suite.experiments[i];
      try {
        results[i] = detail::run_experiment(spec, suite.global_seed);
      } catch (const std::exception& e) {
        results[i].errored = true;
        results[i].report = Json{{"error", e.what()}};
      }
      wall[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  std::uint64_t config_hash = fnv1a(suite.raw.dump());
  Json summary;
  summary["version"] = kVersion;
  summary["config_hash"] = config_hash;
  summary["seed"] = suite.global_seed;
  Json rows = Json::array();
  bool any_error = false;
  Json timings = Json::array();
  for (int i = 0; i < n; ++i) {
    const ExperimentSpec& spec = suite.experiments[i];
    Json full;
    full["id"] = spec.id;
    full["kind"] = spec.kind;
    full["version"] = kVersion;
    full["config_hash"] = config_hash;
    full["seed"] = suite.global_seed;
    full["config"] = spec.body;
    full[results[i].errored ? "error" : "result"] =
        results[i].errored ? results[i].report.at("error") : results[i].report;
    std::ofstream out(fs::path(suite.output_dir) / (spec.id + ".json"));
    out << full.dump(2) << "\n";
    if (!results[i].csv.empty()) {
      std::ofstream csv(fs::path(suite.output_dir) / (spec.id + ".csv"));
      csv << results[i].csv;
    }
    rows.push_back({{"id", spec.id},
                    {"kind", spec.kind},
                    {"status", results[i].errored ? "error" : "ok"}});
    timings.push_back({{"id", spec.id}, {"wall_clock_s", wall[i]}});
    any_error = any_error || results[i].errored;
  }
  summary["experiments"] = rows;
  {
    std::ofstream out(fs::path(suite.output_dir) / "summary.json");
    out << summary.dump(2) << "\n";
    std::ofstream tout(fs::path(suite.output_dir) / "timings.json");
    tout << timings.dump(2) << "\n";
  }
  return any_error ? 1 : 0;
}

}  // namespace equidist
