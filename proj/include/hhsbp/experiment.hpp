#pragma once

// Runs one configured experiment and writes its output files.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <string>
#include <vector>

#include "hhsbp/config.hpp"
#include "hhsbp/network.hpp"
#include "hhsbp/spikes.hpp"
#include "hhsbp/stimulus.hpp"
#include "hhsbp/time_integration.hpp"

namespace hhsbp {

/// Flat node index of a probe.
inline int resolve_probe(const CableNetwork& net, const ProbeSpec& p) {
  if (p.soma) return net.soma_index();
  const auto& geo = net.geometry(p.branch);
  if (p.end) return net.node_index(p.branch, geo.node(*p.end));
  if (p.node) return net.node_index(p.branch, *p.node);
  int best = 0;
  for (int i = 1; i < geo.size(); ++i) {
    if (std::abs(geo.grid.x(i) - *p.x) < std::abs(geo.grid.x(best) - *p.x)) best = i;
  }
  return net.node_index(p.branch, best);
}

struct PropagationPair {
  std::string from, to;
  double time = 0.0;
  bool defined = false;
};

struct ProbeSpikes {
  SpikeAnalysis analysis;
  std::vector<Peak> candidates;               ///< all local maxima above the bump floor
  std::map<double, std::size_t> band_counts;  ///< threshold -> count
};

struct ExperimentResult {
  AdvanceResult run;
  std::vector<Probe> probes;
  std::vector<ProbeSpikes> spikes;
  std::vector<PropagationPair> propagation;
  int potential_dofs = 0;
  int total_dofs = 0;
  double wall_time_s = 0.0;

  Trace trace(std::size_t p) const { return Trace{probes.at(p).label, run.times, run.probes.at(p)}; }
};

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const CableNetwork net(cfg.constants, cfg.topology, cfg.order);
  const CompiledStimulus stimulus(net, cfg.stimulus);
  const ExternalInputs inputs = stimulus_inputs(stimulus);

  ExperimentResult res;
  for (const auto& p : cfg.probes) res.probes.push_back({p.label, resolve_probe(net, p)});
  res.potential_dofs = net.total_nodes();
  res.total_dofs = 4 * net.total_nodes();

  AdvanceOptions opt;
  opt.scheme = cfg.time.scheme;
  opt.record_every = cfg.time.record_every;
  opt.check_gating = cfg.time.check_gating;
  opt.record_energy = cfg.outputs.energy;
  opt.hines = cfg.time.hines;
  const auto grid = TimeGrid::make(cfg.time.t0, cfg.time.t_end, cfg.time.dt);
  res.run = advance(net, resting_state(net), inputs, grid, res.probes, opt);

  if (cfg.outputs.spikes) {
    const auto& sc = cfg.outputs.spike;
    for (std::size_t p = 0; p < res.probes.size(); ++p) {
      const Trace tr = res.trace(p);
      ProbeSpikes ps;
      ps.analysis = detect_peaks(tr, sc.options);
      ps.candidates = local_maxima(tr, sc.bump_floor);
      const int steps = 7;
      for (int k = 0; k < steps; ++k) {
        const double th = sc.band_low + (sc.band_high - sc.band_low) * k / (steps - 1);
        ps.band_counts[th] = detect_peaks(tr, {th, sc.options.refractory}).count();
      }
      res.spikes.push_back(std::move(ps));
    }
    for (const auto& [from, to] : sc.propagation) {
      PropagationPair pp{from, to};
      std::size_t a = 0, b = 0;
      for (std::size_t p = 0; p < res.probes.size(); ++p) {
        if (res.probes[p].label == from) a = p;
        if (res.probes[p].label == to) b = p;
      }
      const auto& pa = res.spikes[a].analysis.peaks;
      const auto& pb = res.spikes[b].analysis.peaks;
      if (!pa.empty() && !pb.empty()) {
        pp.time = pb.front().time - pa.front().time;
        pp.defined = true;
      }
      res.propagation.push_back(pp);
    }
  }
  res.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

struct RunInfo {
  unsigned seed = 0;
  int threads = 1;
};

inline void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& res, const std::filesystem::path& dir,
                          RunInfo info = {}) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name);
    if (!out) throw ConfigError((dir / name).string() + ": cannot write");
    out << std::setprecision(17);
    return out;
  };
  std::vector<std::string> files;

  if (cfg.outputs.traces) {
    auto out = open("traces.csv");
    out << "time_s";
    for (const auto& p : res.probes) out << ',' << p.label;
    out << '\n';
    for (std::size_t k = 0; k < res.run.times.size(); ++k) {
      out << res.run.times[k];
      for (const auto& col : res.run.probes) out << ',' << col[k];
      out << '\n';
    }
    files.push_back("traces.csv");
  }

  if (cfg.outputs.energy) {
    auto out = open("energy.csv");
    out << "time_s,energy\n";
    for (std::size_t k = 0; k < res.run.energy.size(); ++k) out << res.run.times[k] << ',' << res.run.energy[k] << '\n';
    files.push_back("energy.csv");
  }

  if (cfg.outputs.spikes) {
    Json s = Json::object();
    s["threshold_V"] = cfg.outputs.spike.options.threshold;
    s["refractory_s"] = cfg.outputs.spike.options.refractory;
    Json probes = Json::object();
    for (std::size_t p = 0; p < res.probes.size(); ++p) {
      const auto& ps = res.spikes[p];
      Json j;
      j["count"] = ps.analysis.count();
      j["peak_times_s"] = ps.analysis.times();
      std::vector<double> amps;
      for (const auto& pk : ps.analysis.peaks) amps.push_back(pk.amplitude);
      j["peak_amplitudes_V"] = amps;
      Json sub = Json::array();
      for (const auto& pk : ps.candidates) {
        if (pk.amplitude < cfg.outputs.spike.options.threshold) sub.push_back({{"time_s", pk.time}, {"amplitude_V", pk.amplitude}});
      }
      j["subthreshold_maxima"] = sub;
      Json band = Json::array();
      for (const auto& [th, c] : ps.band_counts) band.push_back({{"threshold_V", th}, {"count", c}});
      j["threshold_band"] = band;
      probes[res.probes[p].label] = j;
    }
    s["probes"] = probes;
    Json pairs = Json::array();
    for (const auto& pp : res.propagation) {
      Json j{{"from", pp.from}, {"to", pp.to}};
      j["propagation_time_s"] = pp.defined ? Json(pp.time) : Json(nullptr);
      pairs.push_back(j);
    }
    s["propagation"] = pairs;
    open("spikes.json") << s.dump(2) << '\n';
    files.push_back("spikes.json");
  }

  Json m;
  m["name"] = cfg.name;
  m["config_hash"] = config_hash(cfg.source);
  m["config"] = cfg.source;
  m["topology"] = cfg.topology_kind;
  m["branches"] = cfg.topology.branches.size();
  m["order"] = cfg.order;
  m["N"] = cfg.intervals;
  m["potential_dofs"] = res.potential_dofs;
  m["total_dofs"] = res.total_dofs;
  m["scheme"] = cfg.time.scheme == Scheme::RK4 ? "rk4" : "hines";
  m["dt_s"] = cfg.time.dt;
  m["steps"] = res.run.steps;
  m["damped_steps"] = res.run.damped_steps;
  m["linear_solver"] = {{"factorizations", res.run.linear.factorizations},
                        {"solves", res.run.linear.solves},
                        {"max_relative_residual", res.run.linear.max_relative_residual}};
  m["gating_range"] = {res.run.gating.min(), res.run.gating.max()};
  m["wall_time_s"] = res.wall_time_s;
  m["seed"] = info.seed;
  m["threads"] = info.threads;
  m["files"] = files;
  open("manifest.json") << m.dump(2) << '\n';
}

}  // namespace hhsbp
