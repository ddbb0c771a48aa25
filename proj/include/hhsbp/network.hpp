#pragma once

// Semi-discrete SBP-SAT system of a whole neuron: per-branch cable operators
// coupled through junction, soma, sealed and clamp penalties, plus the
// discrete energy and its exact rate identity.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "hhsbp/cable.hpp"
#include "hhsbp/error.hpp"
#include "hhsbp/hh_kinetics.hpp"
#include "hhsbp/sbp.hpp"
#include "hhsbp/topology.hpp"

namespace hhsbp {

/// Potential and gating unknowns of every branch, stored branch after branch.
/// The gating values at the soma end node are the soma's own gating state.
struct NetworkState {
  Vector u, m, h, n;
  double t = 0.0;

  GatingState gating() const { return {m, h, n}; }
};

/// Time-dependent inputs layered on top of the homogeneous cable equations.
struct ExternalInputs {
  /// Adds injected (depolarizing) current density, A/m^2, at every node.
  std::function<void(double t, Vector& density)> injected_current;
  /// Adds a direct forcing of u_t, V/s, at every node.
  std::function<void(double t, Vector& forcing)> potential_forcing;
  /// Adds forcing terms, 1/s, to the three gating equations given the current potential.
  std::function<void(double t, const Vector& u, Vector& fm, Vector& fh, Vector& fn)> gating_forcing;
  /// Times at which the inputs jump; implicit steppers damp the step that contains one.
  std::vector<double> breakpoints;

  bool empty() const { return !injected_current && !potential_forcing && !gating_forcing; }
};

class CableNetwork {
 public:
  CableNetwork(HHConstants constants, TreeTopology topology, int order)
      : k_(constants), topo_(std::move(topology)), order_(order) {
    k_.validate();
    topo_.validate();
    int offset = 0;
    for (const auto& spec : topo_.branches) {
      geometry_.push_back(spec.geometry());
      ops_.push_back(build_sbp(order, geometry_.back().grid));
      offsets_.push_back(offset);
      offset += spec.n_points;
    }
    total_ = offset;
    junctions_ = topo_.junctions();
    soma_ = topo_.soma();
    mass_ = Vector(total_);
    for (int b = 0; b < branch_count(); ++b) mass_.segment(offsets_[b], size(b)) = geometry_[b].radius;
    if (soma_) {
      const auto& soma = std::get<SomaEnd>(topo_.branches[soma_->branch].at(soma_->end));
      eta_ = soma.eta(k_);
      const int e = geometry_[soma_->branch].node(soma_->end);
      mass_[offsets_[soma_->branch] + e] -= SatCoefficients::soma(k_, eta_) / ops_[soma_->branch].norm()[e];
    }
  }

  const HHConstants& constants() const { return k_; }
  const TreeTopology& topology() const { return topo_; }
  int order() const { return order_; }
  int branch_count() const { return static_cast<int>(geometry_.size()); }
  int total_nodes() const { return total_; }
  int offset(int b) const { return offsets_.at(b); }
  int size(int b) const { return geometry_.at(b).size(); }
  const BranchGeometry& geometry(int b) const { return geometry_.at(b); }
  const SbpOperatorSet& ops(int b) const { return ops_.at(b); }
  const std::map<int, std::vector<EndRef>>& junctions() const { return junctions_; }

  std::optional<EndRef> soma() const { return soma_; }
  double soma_eta() const { return eta_; }
  /// Flat index of the node carrying the soma, or -1.
  int soma_index() const {
    return soma_ ? offsets_[soma_->branch] + geometry_[soma_->branch].node(soma_->end) : -1;
  }
  int node_index(int b, int i) const { return offsets_.at(b) + i; }
  int end_index(const EndRef& r) const { return offsets_.at(r.branch) + geometry_.at(r.branch).node(r.end); }

  /// Diagonal of the mass matrix M in M u_t = rhs: the radii, with the soma
  /// node increased by mu / (eta P_NN).
  const Vector& mass() const { return mass_; }

  /// du/dt for given nodal conductance g (S/m^2) and source density f (A/m^2).
  /// With clamp_data == false the voltage-clamp data is replaced by zero.
  Vector potential_rhs(const Vector& u, const Vector& g, const Vector& f, double t,
                       bool clamp_data = true) const {
    require_size(static_cast<std::size_t>(u.size()), static_cast<std::size_t>(total_), "potential_rhs u");
    require_size(static_cast<std::size_t>(g.size()), static_cast<std::size_t>(total_), "potential_rhs g");
    require_size(static_cast<std::size_t>(f.size()), static_cast<std::size_t>(total_), "potential_rhs f");
    Vector rhs(total_);
    std::vector<Vector> ub(branch_count());
    for (int b = 0; b < branch_count(); ++b) {
      const auto& geo = geometry_[b];
      const auto& op = ops_[b];
      const int o = offsets_[b], n = size(b);
      ub[b] = u.segment(o, n);
      const Vector gb = g.segment(o, n), fb = f.segment(o, n);
      auto seg = rhs.segment(o, n);
      if (soma_ && soma_->branch == b) {
        const auto& soma = std::get<SomaEnd>(topo_.branches[b].at(soma_->end));
        seg = soma_system(k_, geo, op, ub[b], gb, fb, soma_->end, soma).rhs;
      } else {
        seg = geo.radius.cwiseProduct(cable_interior_rhs(k_, geo, op, ub[b], gb, fb));
      }
      for (End e : {End::Left, End::Right}) {
        const auto& bc = topo_.branches[b].at(e);
        if (std::holds_alternative<SealedEnd>(bc)) {
          seg += geo.radius.cwiseProduct(sat_sealed(k_, geo, op, ub[b], e));
        } else if (const auto* c = std::get_if<VoltageClamp>(&bc)) {
          const double data = clamp_data ? c->u0(t) : 0.0;
          seg += geo.radius.cwiseProduct(sat_clamp(k_, geo, op, ub[b], e, data));
        }
      }
    }
    for (const auto& [id, members] : junctions_) {
      std::vector<JunctionMemberView> views;
      views.reserve(members.size());
      for (const auto& m : members) views.push_back({&geometry_[m.branch], &ops_[m.branch], &ub[m.branch], m.end});
      const auto pens = sat_junction(k_, views);
      for (std::size_t i = 0; i < members.size(); ++i) {
        const int b = members[i].branch;
        rhs.segment(offsets_[b], size(b)) += geometry_[b].radius.cwiseProduct(pens[i]);
      }
    }
    return rhs.cwiseQuotient(mass_);
  }

  /// Nodal coordinate along branch b.
  Vector nodes(int b) const { return geometry_.at(b).grid.nodes(); }

 private:
  HHConstants k_;
  TreeTopology topo_;
  int order_;
  std::vector<BranchGeometry> geometry_;
  std::vector<SbpOperatorSet> ops_;
  std::vector<int> offsets_;
  int total_ = 0;
  std::map<int, std::vector<EndRef>> junctions_;
  std::optional<EndRef> soma_;
  double eta_ = 0.0;
  Vector mass_;
};

/// u = u0 everywhere with every gate at its steady state for that potential.
inline NetworkState resting_state(const CableNetwork& net, double u0 = 0.0) {
  const auto w = steady_gating(u0);
  const auto n = net.total_nodes();
  return {Vector::Constant(n, u0), Vector::Constant(n, w[0]), Vector::Constant(n, w[1]),
          Vector::Constant(n, w[2]), 0.0};
}

inline Vector nodal_conductance(const HHConstants& k, const NetworkState& s) {
  Vector g(s.u.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = conductance(k, s.m[i], s.h[i], s.n[i]);
  return g;
}

/// f = g1 E1 m^3 h + g2 E2 n^4 + g3 E3 + injected density + C_m * forcing.
inline Vector nodal_source(const CableNetwork& net, const NetworkState& s, const ExternalInputs& in, double t) {
  const auto& k = net.constants();
  Vector f(s.u.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = source_f(k, s.m[i], s.h[i], s.n[i], 0.0);
  if (in.injected_current) {
    Vector inj = Vector::Zero(f.size());
    in.injected_current(t, inj);
    f += inj;
  }
  if (in.potential_forcing) {
    Vector F = Vector::Zero(f.size());
    in.potential_forcing(t, F);
    f += k.C_m * F;
  }
  return f;
}

struct NetworkDerivative {
  Vector du, dm, dh, dn;
  Vector mass;
};

/// Time derivative of the full semi-discrete system at `t`.
inline NetworkDerivative network_rhs(const CableNetwork& net, const NetworkState& s, const ExternalInputs& in,
                                     double t) {
  require_size(static_cast<std::size_t>(s.u.size()), static_cast<std::size_t>(net.total_nodes()), "network_rhs");
  NetworkDerivative d;
  const Vector g = nodal_conductance(net.constants(), s);
  const Vector f = nodal_source(net, s, in, t);
  d.du = net.potential_rhs(s.u, g, f, t);
  const auto gr = gating_rhs(s.u, s.gating());
  d.dm = gr.m;
  d.dh = gr.h;
  d.dn = gr.n;
  if (in.gating_forcing) in.gating_forcing(t, s.u, d.dm, d.dh, d.dn);
  d.mass = net.mass();
  return d;
}

/// sum_b u_b^T P_b A_b u_b + (mu / eta) u_soma^2.
inline double discrete_energy(const CableNetwork& net, const Vector& u) {
  require_size(static_cast<std::size_t>(u.size()), static_cast<std::size_t>(net.total_nodes()), "discrete_energy");
  double e = 0.0;
  for (int b = 0; b < net.branch_count(); ++b) {
    const auto ub = u.segment(net.offset(b), net.size(b));
    e += (ub.array().square() * net.ops(b).norm().array() * net.geometry(b).radius.array()).sum();
  }
  if (net.soma()) {
    const double us = u[net.soma_index()];
    e += net.constants().mu() / net.soma_eta() * us * us;
  }
  return e;
}

struct EnergyRate {
  double rate = 0.0;         ///< d/dt of discrete_energy along network_rhs
  double dissipation = 0.0;  ///< 2 mu ||A u_x||^2 + 2 ||sqrt(G / C_m) u||_*^2
  double residual = 0.0;     ///< rate + dissipation

  double scale() const { return std::abs(rate) + std::abs(dissipation); }
  double relative() const { return scale() > 0.0 ? std::abs(residual) / scale() : std::abs(residual); }
};

/// Discrete energy identity of the homogeneous problem for nodal conductances g.
/// Clamp data and all sources are taken as zero.
inline EnergyRate energy_rate_residual(const CableNetwork& net, const Vector& u, const Vector& g) {
  const auto& k = net.constants();
  const Vector zero = Vector::Zero(net.total_nodes());
  const Vector du = net.potential_rhs(u, g, zero, 0.0, false);
  EnergyRate r;
  for (int b = 0; b < net.branch_count(); ++b) {
    const auto& op = net.ops(b);
    const auto& a = net.geometry(b).radius;
    const Vector ub = u.segment(net.offset(b), net.size(b));
    const Vector dub = du.segment(net.offset(b), net.size(b));
    const Vector gb = g.segment(net.offset(b), net.size(b));
    const Vector ux = op.d1() * ub;
    r.rate += 2.0 * (ub.array() * op.norm().array() * a.array() * dub.array()).sum();
    r.dissipation += 2.0 * k.mu() * (ux.array().square() * op.norm().array() * a.array().square()).sum();
    r.dissipation += 2.0 / k.C_m * (ub.array().square() * op.norm().array() * a.array() * gb.array()).sum();
  }
  if (net.soma()) {
    const int s = net.soma_index();
    const double w = k.mu() / net.soma_eta();
    r.rate += 2.0 * w * u[s] * du[s];
    r.dissipation += 2.0 * w * g[s] * u[s] * u[s] / k.C_m;
  }
  r.residual = r.rate + r.dissipation;
  return r;
}

/// Energy identity at a network state; rejects states carrying external inputs.
inline EnergyRate energy_rate_residual(const CableNetwork& net, const NetworkState& s,
                                       const ExternalInputs& inputs = {}) {
  if (!inputs.empty()) {
    throw ContractError("energy_rate_residual requires the homogeneous problem (no inputs or forcing)");
  }
  return energy_rate_residual(net, s.u, nodal_conductance(net.constants(), s));
}

}  // namespace hhsbp
