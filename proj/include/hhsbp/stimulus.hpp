#pragma once

// Injected-current protocols: events with a spatial profile on one branch and
// a time window, compiled to nodal current densities (A/m^2).

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "hhsbp/error.hpp"
#include "hhsbp/network.hpp"

namespace hhsbp {

enum class ProfileKind { EndNode, Gaussian };

/// How an event amplitude is read.
enum class AmplitudeUnit {
  Current,  ///< amperes, spread over the membrane area of the support
  Density,  ///< A/m^2 at the profile peak
};

struct StimulusEvent {
  int branch = 0;
  ProfileKind profile = ProfileKind::EndNode;
  End end = End::Left;   ///< EndNode support
  double center = 0.0;   ///< Gaussian centre, m along the branch
  double std = 0.0;      ///< Gaussian width, m
  double amplitude = 0.0;
  AmplitudeUnit unit = AmplitudeUnit::Current;
  double t_on = 0.0;     ///< active for t_on <= t < t_off
  double t_off = 0.0;

  bool active(double t) const { return t >= t_on && t < t_off; }
};

struct StimulusProtocol {
  std::vector<StimulusEvent> events;
};

/// Membrane area 2 pi a P assigned to each node of branch b.
inline Vector nodal_membrane_area(const CableNetwork& net, int b) {
  return 2.0 * std::numbers::pi * net.geometry(b).radius.cwiseProduct(net.ops(b).norm());
}

class CompiledStimulus {
 public:
  struct Entry {
    StimulusEvent event;
    std::vector<int> nodes;        ///< flat indices
    std::vector<double> density;   ///< A/m^2 while active
  };

  CompiledStimulus() = default;

  CompiledStimulus(const CableNetwork& net, const StimulusProtocol& protocol) {
    for (std::size_t k = 0; k < protocol.events.size(); ++k) {
      const auto& ev = protocol.events[k];
      const std::string where = "stimulus event " + std::to_string(k);
      if (ev.branch < 0 || ev.branch >= net.branch_count()) throw ConfigError(where + ": branch out of range");
      if (!(ev.t_on < ev.t_off)) throw ConfigError(where + ": needs t_on < t_off");
      if (!std::isfinite(ev.amplitude)) throw ConfigError(where + ": amplitude must be finite");
      const auto& geo = net.geometry(ev.branch);
      Vector phi = Vector::Zero(geo.size());
      if (ev.profile == ProfileKind::EndNode) {
        phi[geo.node(ev.end)] = 1.0;
      } else {
        if (!(ev.std > 0.0)) throw ConfigError(where + ": Gaussian width must be positive");
        if (ev.center < 0.0 || ev.center > geo.grid.length) throw ConfigError(where + ": centre outside the branch");
        for (int i = 0; i < geo.size(); ++i) {
          const double z = (geo.grid.x(i) - ev.center) / ev.std;
          phi[i] = std::exp(-0.5 * z * z);
        }
      }
      double scale = ev.amplitude;
      if (ev.unit == AmplitudeUnit::Current) scale /= nodal_membrane_area(net, ev.branch).dot(phi);
      Entry e{ev, {}, {}};
      for (int i = 0; i < geo.size(); ++i) {
        if (phi[i] < 1e-300) continue;
        e.nodes.push_back(net.node_index(ev.branch, i));
        e.density.push_back(scale * phi[i]);
      }
      entries_.push_back(std::move(e));
    }
  }

  /// Adds the density of every active event at time t.
  void add(double t, Vector& density) const {
    for (const auto& e : entries_) {
      if (!e.event.active(t)) continue;
      for (std::size_t j = 0; j < e.nodes.size(); ++j) density[e.nodes[j]] += e.density[j];
    }
  }

  /// Total current (A) of the active events at time t.
  double total_current(const CableNetwork& net, double t) const {
    Vector d = Vector::Zero(net.total_nodes());
    add(t, d);
    double total = 0.0;
    for (int b = 0; b < net.branch_count(); ++b) total += nodal_membrane_area(net, b).dot(d.segment(net.offset(b), net.size(b)));
    return total;
  }

  const std::vector<Entry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<Entry> entries_;
};

/// Density at one flat node index and time.
inline double stimulus_density(const CompiledStimulus& s, int index, double t) {
  double d = 0.0;
  for (const auto& e : s.entries()) {
    if (!e.event.active(t)) continue;
    for (std::size_t j = 0; j < e.nodes.size(); ++j) {
      if (e.nodes[j] == index) d += e.density[j];
    }
  }
  return d;
}

/// Inputs that inject the compiled protocol as depolarizing current.
inline ExternalInputs stimulus_inputs(const CompiledStimulus& s) {
  ExternalInputs in;
  if (s.empty()) return in;
  in.injected_current = [&s](double t, Vector& density) { s.add(t, density); };
  for (const auto& e : s.entries()) {
    in.breakpoints.push_back(e.event.t_on);
    in.breakpoints.push_back(e.event.t_off);
  }
  return in;
}

}  // namespace hhsbp
