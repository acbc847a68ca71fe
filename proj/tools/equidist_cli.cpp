#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "equidist/suite.hpp"

using namespace equidist;

namespace {

Json parse_json_arg(const std::string& s, const std::string& what) {
  try {
    return Json::parse(s);
  } catch (const std::exception&) {
    throw ValidationError(what + ": expected inline JSON, got '" + s + "'");
  }
}

struct Cli {
  std::string map_arg = "z2";
  std::string out_dir = "reports";
  std::string id;
  std::uint64_t seed = 0;
  bool seed_set = false;

  // one-experiment suite sharing the report plumbing with `suite`
  int run_single(Json body) const {
    body["map"] =
        (!map_arg.empty() && map_arg[0] == '{') ? parse_json_arg(map_arg, "--map") : Json(map_arg);
    ExperimentSuite suite;
    suite.output_dir = out_dir;
    if (seed_set) suite.global_seed = seed;
    ExperimentSpec spec;
    spec.kind = body.at("kind").get<std::string>();
    spec.id = id.empty() ? spec.kind : id;
    body["id"] = spec.id;
    detail::reject_unknown_keys(body, detail::allowed_keys(spec.kind), "$");
    spec.body = body;
    suite.experiments.push_back(spec);
    Json raw;
    raw["experiments"] = Json::array({body});
    raw["seed"] = suite.global_seed;
    suite.raw = raw;
    return run_suite(suite);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical experiments on fibers, equilibrium measures, and equidistribution rates"};
  app.require_subcommand(1);

  Cli cli;
  app.add_option("--seed", cli.seed, "override the config seed")
      ->each([&](const std::string&) { cli.seed_set = true; });
  app.add_option("--out-dir", cli.out_dir, "report directory");
  auto add_common = [&](CLI::App* sub) {
    sub->fallthrough();  // lets --seed / --out-dir appear after the subcommand
    sub->add_option("--map", cli.map_arg, "preset name or inline map JSON");
    sub->add_option("--id", cli.id, "experiment id (defaults to the subcommand name)");
  };

  std::string point = "[[2,0],[1,0]]", start = "[[2,0],[1,0]]", base = "[[0,0],[1,0]]";
  std::string phi = "X", mode = "detect", fns = "Z", scales, t_grid, direction, config_path;
  int n = 3, samples = 2000, burn_in = 30, mu_samples = 20000, n_max = 0, pairs = 20,
      num_samples = 200;
  double lambda = 1.9, alpha = 2.0, M = 1.0, delta = 1.5;
  bool csv = false, emit_atoms = false, control = false;
  std::vector<double> theta_list{0.1, 0.03, 0.01};

  auto* c_fiber = app.add_subcommand("fiber", "backward fiber f^{-n}(a) with multiplicities");
  add_common(c_fiber);
  c_fiber->add_option("--point", point, "base point (JSON homogeneous coordinates)");
  c_fiber->add_option("--n", n, "backward depth");
  c_fiber->add_flag("--csv", csv, "also emit the atom table as CSV");

  auto* c_mu = app.add_subcommand("mu-sample", "equilibrium measure by inverse iteration");
  add_common(c_mu);
  c_mu->add_option("--samples", samples, "number of Monte Carlo samples");
  c_mu->add_option("--burn-in", burn_in, "backward walk length");
  c_mu->add_option("--start", start, "start point (JSON)");
  c_mu->add_flag("--emit-atoms", emit_atoms, "include sample atoms in the report");

  auto* c_rate = app.add_subcommand("rate", "equidistribution speed experiment");
  add_common(c_rate);
  c_rate->add_option("--point", point, "base point a (JSON)");
  c_rate->add_option("--fns", fns, "comma-separated observable labels");
  c_rate->add_option("--nmax", n_max, "largest backward depth");
  c_rate->add_option("--lambda", lambda, "target rate lambda in (1, d)");
  c_rate->add_option("--alpha", alpha, "Hölder exponent alpha in (0, 2]");
  c_rate->add_option("--mu-samples", mu_samples, "Monte Carlo samples for mu");
  c_rate->add_flag("--control", control, "exceptional control mode (a in E)");
  c_rate->add_flag("--csv", csv, "emit the e_n table as CSV");

  auto* c_holder = app.add_subcommand("holder", "fiber Hölder-continuity probe");
  add_common(c_holder);
  c_holder->add_option("--base", base, "base point (JSON)");
  c_holder->add_option("--direction", direction, "perturbation direction (JSON, optional)");
  c_holder->add_option("--scales", scales, "comma-separated scales in [1e-8, 1e-2]");

  auto* c_exc = app.add_subcommand("exceptional-scan", "exceptional-set detection and probes");
  add_common(c_exc);
  c_exc->add_option("--mode", mode, "detect | probe-tube | probe-contraction");
  c_exc->add_option("--start", start, "mu start point for probe-tube (JSON)");
  c_exc->add_option("--samples", samples, "mu samples for probe-tube");
  c_exc->add_option("--t-grid", t_grid, "comma-separated tube radii");
  c_exc->add_option("--pairs", pairs, "random pairs for probe-contraction");
  c_exc->add_option("--n", n, "backward depth for probe-contraction");

  auto* c_tel = app.add_subcommand("telescope", "telescoping decomposition diagnostic (k = 1)");
  add_common(c_tel);
  c_tel->add_option("--point", point, "base point a (JSON)");
  c_tel->add_option("--phi", phi, "observable label");
  c_tel->add_option("--n", n, "telescope length");
  c_tel->add_option("--M", M, "schedule constant M");
  c_tel->add_option("--delta", delta, "schedule ratio delta in (1, d)");
  c_tel->add_option("--mu-samples", samples, "Monte Carlo samples for mu");

  auto* c_reg = app.add_subcommand("regularize", "theta-regularization certificates");
  add_common(c_reg);
  c_reg->add_option("--phi", phi, "observable label");
  c_reg->add_option("--thetas", theta_list, "regularization scales");
  c_reg->add_option("--num-samples", num_samples, "group samples per scheme");

  auto* c_suite = app.add_subcommand("suite", "run a JSON experiment suite");
  c_suite->fallthrough();
  c_suite->add_option("config", config_path, "suite config path")->required();

  CLI11_PARSE(app, argc, argv);

  auto split_labels = [](const std::string& s) {
    Json out = Json::array();
    std::string cur;
    for (char c : s + ",") {
      if (c == ',') {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    return out;
  };
  auto split_doubles = [&](const std::string& s) {
    Json out = Json::array();
    for (const auto& tok : split_labels(s)) out.push_back(std::stod(tok.get<std::string>()));
    return out;
  };

  try {
    if (c_suite->parsed()) {
      ExperimentSuite suite = load_config(config_path);
      if (cli.seed_set) suite.global_seed = cli.seed;
      if (app.count("--out-dir")) suite.output_dir = cli.out_dir;
      return run_suite(suite);
    }
    Json body;
    if (c_fiber->parsed()) {
      body = {{"kind", "fiber"}, {"point", parse_json_arg(point, "--point")}, {"n", n}};
      if (csv) body["csv"] = true;
    } else if (c_mu->parsed()) {
      body = {{"kind", "mu"},
              {"samples", samples},
              {"burn_in", burn_in},
              {"start", parse_json_arg(start, "--start")}};
      if (emit_atoms) body["emit_atoms"] = true;
    } else if (c_rate->parsed()) {
      body = {{"kind", "rate"},
              {"point", parse_json_arg(point, "--point")},
              {"fns", split_labels(fns)},
              {"mu_samples", mu_samples},
              {"lambda", lambda},
              {"alpha", alpha}};
      if (n_max > 0) body["n_max"] = n_max;
      if (control) body["control"] = true;
      if (csv) body["csv"] = true;
    } else if (c_holder->parsed()) {
      body = {{"kind", "holder"}, {"base", parse_json_arg(base, "--base")}};
      if (!direction.empty()) body["direction"] = parse_json_arg(direction, "--direction");
      if (!scales.empty()) body["scales"] = split_doubles(scales);
    } else if (c_exc->parsed()) {
      body = {{"kind", "exceptional"}, {"mode", mode}};
      if (mode == "probe-tube") {
        body["start"] = parse_json_arg(start, "--start");
        body["samples"] = samples;
        if (!t_grid.empty()) body["t_grid"] = split_doubles(t_grid);
      } else if (mode == "probe-contraction") {
        body["pairs"] = pairs;
        body["n"] = n;
      }
    } else if (c_tel->parsed()) {
      body = {{"kind", "telescope"},
              {"point", parse_json_arg(point, "--point")},
              {"phi", phi},
              {"n", n},
              {"M", M},
              {"delta", delta},
              {"mu_samples", samples}};
    } else if (c_reg->parsed()) {
      body = {{"kind", "regularize"}, {"phi", phi}, {"num_samples", num_samples}};
      body["thetas"] = theta_list;
    }
    return cli.run_single(body);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
