#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>

#include "CLI11.hpp"
#include "hhsbp/config.hpp"
#include "hhsbp/experiment.hpp"
#include "hhsbp/sbp.hpp"
#include "hhsbp/verification.hpp"

namespace fs = std::filesystem;
using namespace hhsbp;

namespace {

constexpr int kOk = 0;
constexpr int kConfig = 2;
constexpr int kNumerical = 3;
constexpr int kAcceptance = 4;

struct Common {
  std::string out_dir = "out";
  unsigned seed = 12345;
  int threads = 1;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out-dir", c.out_dir, "Directory for output files")->capture_default_str();
  app->add_option("--seed", c.seed, "Seed for randomized checks")->capture_default_str();
  app->add_option("--threads", c.threads, "Worker threads (0 = hardware)")->capture_default_str();
}

int thread_count(int requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

int simulate(const std::string& path, const Common& c) {
  const auto cfg = load_experiment(path);
  const auto res = run_experiment(cfg);
  write_outputs(cfg, res, c.out_dir, {c.seed, thread_count(c.threads)});
  std::cout << cfg.name << ": " << res.run.steps << " steps in " << res.wall_time_s << " s, " << res.potential_dofs
            << " potential / " << res.total_dofs << " total unknowns\n";
  for (std::size_t p = 0; p < res.probes.size() && p < res.spikes.size(); ++p) {
    std::cout << "  " << res.probes[p].label << ": " << res.spikes[p].analysis.count() << " spikes\n";
  }
  for (const auto& pp : res.propagation) {
    std::cout << "  propagation " << pp.from << " -> " << pp.to << ": ";
    if (pp.defined) {
      std::cout << pp.time * 1e3 << " ms\n";
    } else {
      std::cout << "undefined\n";
    }
  }
  return kOk;
}

// {"problem": "junction3", "orders": [...], "N": [...], "dt": 1e-9,
//  "bands": {"2": [1.8, 2.3], ...}}
int converge(const std::string& path, const Common& c) {
  const Json j = read_json_file(path);
  const detail::Node root(j, "");
  root.allow_only({"name", "problem", "orders", "N", "dt", "bands"});
  ManufacturedKind kind{};
  try {
    kind = parse_manufactured_kind(root.at("problem").string());
  } catch (const ConfigError& e) {
    root.at("problem").fail(e.what());
  }
  std::vector<int> orders, Ns;
  const auto on = root.at("orders");
  for (std::size_t i = 0; i < on.size(); ++i) {
    const int o = on.at(i).integer();
    if (o < 2 || o > 5) on.at(i).fail("supported orders are 2, 3, 4 and 5");
    orders.push_back(o);
  }
  const auto nn = root.at("N");
  for (std::size_t i = 0; i < nn.size(); ++i) {
    const int n = nn.at(i).integer();
    if (n < 2) nn.at(i).fail("must be at least 2");
    if (!Ns.empty() && n <= Ns.back()) nn.at(i).fail("N must increase");
    Ns.push_back(n);
  }
  std::map<int, std::pair<double, double>> bands;
  if (root.has("bands")) {
    const auto bn = root.at("bands");
    for (const auto& [key, val] : bn.json().items()) {
      const detail::Node b(val, bn.path() + "." + key);
      if (b.size() != 2) b.fail("expected [low, high]");
      bands[std::stoi(key)] = {b.at(0).number(), b.at(1).number()};
    }
  }
  const double dt = root.positive_or("dt", 1e-9);

  const auto study = run_convergence_study(kind, orders, Ns, dt, {}, {}, thread_count(c.threads));
  fs::create_directories(c.out_dir);
  std::ofstream(fs::path(c.out_dir) / "convergence.csv") << study.csv();

  bool ok = true;
  Json verdict = Json::array();
  for (int o : orders) {
    const auto r = study.finest_rate(o);
    const auto band = bands.count(o) ? bands[o] : std::pair<double, double>{o - 0.5, 1e300};
    const bool pass = r && *r >= band.first && *r <= band.second;
    ok = ok && pass;
    verdict.push_back({{"order", o},
                       {"finest_rate", r ? Json(*r) : Json(nullptr)},
                       {"low", band.first},
                       {"high", band.second < 1e300 ? Json(band.second) : Json(nullptr)},
                       {"pass", pass}});
    std::cout << "order " << o << ": finest rate ";
    if (r) {
      std::cout << *r;
    } else {
      std::cout << "n/a";
    }
    std::cout << (pass ? "  PASS" : "  FAIL") << '\n';
  }
  Json m{{"problem", to_string(kind)},
         {"study_hash", config_hash(j)},
         {"dt_s", dt},
         {"seed", c.seed},
         {"threads", thread_count(c.threads)},
         {"verdict", verdict},
         {"passed", ok}};
  std::ofstream(fs::path(c.out_dir) / "manifest.json") << m.dump(2) << '\n';
  return ok ? kOk : kAcceptance;
}

int validate_operators(const Common& c) {
  fs::create_directories(c.out_dir);
  std::ofstream csv(fs::path(c.out_dir) / "operators.csv");
  csv << "order,N,skew_residual,min_norm_weight,quadrature_residual,max_exactness_residual,"
         "energy_residual_cable_soma,energy_residual_junction3,pass\n";
  csv.precision(6);
  bool ok = true;
  for (int order : {2, 3, 4, 5}) {
    for (int N : {32, 128}) {
      const auto rep = validate_sbp(build_sbp(order, GridSpec::make(1.0, N + 1)));
      double exact = 0.0;
      for (double v : rep.interior_exactness) exact = std::max(exact, v);
      for (double v : rep.boundary_exactness) exact = std::max(exact, v);
      const double e1 = energy_identity_worst(ManufacturedKind::CableSoma, order, N, 20, c.seed);
      const double e2 = energy_identity_worst(ManufacturedKind::Junction3, order, N, 20, c.seed + 1);
      const bool pass = rep.passed() && e1 <= 1e-10 && e2 <= 1e-10;
      ok = ok && pass;
      csv << order << ',' << N << ',' << rep.skew_residual << ',' << rep.min_norm_weight << ','
          << rep.quadrature_residual << ',' << exact << ',' << e1 << ',' << e2 << ',' << (pass ? 1 : 0) << '\n';
      std::cout << "order " << order << " N " << N << (pass ? "  ok" : "  FAILED") << '\n';
    }
  }
  return ok ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High-order SBP-SAT Hodgkin-Huxley cable simulator"};
  app.require_subcommand(1);

  Common sim_opts, conv_opts, val_opts;
  std::string config_path, study_path;
  auto* sim = app.add_subcommand("simulate", "Run an experiment described by a JSON config");
  sim->add_option("config", config_path, "Experiment config")->required();
  add_common(sim, sim_opts);
  auto* conv = app.add_subcommand("converge", "Run a manufactured-solution refinement study");
  conv->add_option("study", study_path, "Study description")->required();
  add_common(conv, conv_opts);
  auto* val = app.add_subcommand("validate-operators", "Check SBP operators and discrete energy identities");
  add_common(val, val_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*sim) return simulate(config_path, sim_opts);
    if (*conv) return converge(study_path, conv_opts);
    return validate_operators(val_opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
}
