#pragma once

// Semi-discrete cable operator and the SAT penalties of the four end
// conditions. All penalty vectors returned here are contributions to u_t
// (already divided by the radius matrix A) unless stated otherwise.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include "hhsbp/error.hpp"
#include "hhsbp/hh_kinetics.hpp"
#include "hhsbp/sbp.hpp"

namespace hhsbp {

enum class End { Left, Right };

/// Outward normal of an end: -1 at x = 0, +1 at x = L. Equals B(end, end).
inline double outward_normal(End e) { return e == End::Left ? -1.0 : 1.0; }

inline const char* to_string(End e) { return e == End::Left ? "left" : "right"; }

/// One cable discretized on a uniform grid, with the radius sampled at the nodes.
struct BranchGeometry {
  GridSpec grid;
  Vector radius;

  static BranchGeometry sampled(double length, int n_points, const std::function<double(double)>& a) {
    BranchGeometry b{GridSpec::make(length, n_points), Vector(n_points)};
    for (int i = 0; i < n_points; ++i) b.radius[i] = a(b.grid.x(i));
    b.validate();
    return b;
  }

  static BranchGeometry uniform(double length, int n_points, double a) {
    return sampled(length, n_points, [a](double) { return a; });
  }

  void validate() const {
    require_size(static_cast<std::size_t>(radius.size()), static_cast<std::size_t>(grid.n_points),
                 "branch radius samples");
    if (!(radius.minCoeff() > 0.0) || !radius.allFinite()) {
      throw ConfigError("branch radius must be strictly positive");
    }
  }

  int size() const { return grid.n_points; }
  int node(End e) const { return e == End::Left ? 0 : grid.n_points - 1; }
  double end_radius(End e) const { return radius[node(e)]; }
};

struct SealedEnd {};

struct VoltageClamp {
  std::function<double(double)> u0 = [](double) { return 0.0; };
};

struct SomaEnd {
  double area = 0.0;  ///< soma membrane area, m^2

  double eta(const HHConstants& k) const {
    if (!(area > 0.0)) throw ConfigError("soma area must be positive");
    return std::numbers::pi / (area * k.R_i * k.C_m);
  }
};

struct JunctionMember {
  int junction = 0;
};

using BoundaryCondition = std::variant<SealedEnd, VoltageClamp, SomaEnd, JunctionMember>;

inline std::string describe(const BoundaryCondition& bc) {
  switch (bc.index()) {
    case 0: return "sealed";
    case 1: return "clamp";
    case 2: return "soma";
    default: return "junction " + std::to_string(std::get<JunctionMember>(bc).junction);
  }
}

/// Penalty coefficients dictated by the discrete energy estimate.
struct SatCoefficients {
  /// Sealed end and voltage clamp: mu a_0^2 on the left, -mu a_N^2 on the right.
  static double boundary(const HHConstants& k, double end_radius, End e) {
    return -outward_normal(e) * k.mu() * end_radius * end_radius;
  }
  static double soma(const HHConstants& k, double eta) { return -k.mu() / eta; }
  /// Flux penalty, shared by every member of an n-way junction.
  static double junction_flux(const HHConstants& k, int members) { return k.mu() / members; }
  /// Continuity penalty in the equation of a member with junction-end radius a.
  static double junction_continuity(const HHConstants& k, int members, double a) {
    return k.mu() / members * a * a;
  }
};

/// u_t of the cable equation before boundary terms:
///   mu A^{-1} D1 (A^2 D1 u) - g u / C_m + f / C_m.
inline Vector cable_interior_rhs(const HHConstants& k, const BranchGeometry& branch,
                                 const SbpOperatorSet& ops, const Vector& u, const Vector& g,
                                 const Vector& f) {
  const auto n = static_cast<std::size_t>(ops.size());
  require_size(static_cast<std::size_t>(branch.size()), n, "cable_interior_rhs geometry");
  require_size(static_cast<std::size_t>(u.size()), n, "cable_interior_rhs u");
  require_size(static_cast<std::size_t>(g.size()), n, "cable_interior_rhs g");
  require_size(static_cast<std::size_t>(f.size()), n, "cable_interior_rhs f");
  if (!(branch.radius.minCoeff() > 0.0)) throw ConfigError("non-positive radius");
  const Vector a2 = branch.radius.array().square();
  const Vector flux = a2.cwiseProduct(ops.d1() * u);
  Vector out = k.mu() * (ops.d1() * flux).cwiseQuotient(branch.radius);
  out.array() += (f.array() - g.array() * u.array()) / k.C_m;
  return out;
}

/// Weak zero-flux condition at one end.
inline Vector sat_sealed(const HHConstants& k, const BranchGeometry& branch, const SbpOperatorSet& ops,
                         const Vector& u, End end) {
  require_size(static_cast<std::size_t>(u.size()), static_cast<std::size_t>(ops.size()), "sat_sealed");
  const int e = branch.node(end);
  const double sigma = SatCoefficients::boundary(k, branch.radius[e], end);
  Vector out = Vector::Zero(ops.size());
  out[e] = sigma * ops.derivative_at(u, e) / (ops.norm()[e] * branch.radius[e]);
  return out;
}

/// Dual-consistent weak potential condition u_end = u0.
inline Vector sat_clamp(const HHConstants& k, const BranchGeometry& branch, const SbpOperatorSet& ops,
                        const Vector& u, End end, double u0) {
  require_size(static_cast<std::size_t>(u.size()), static_cast<std::size_t>(ops.size()), "sat_clamp");
  const int e = branch.node(end);
  const double sigma = SatCoefficients::boundary(k, branch.radius[e], end);
  Vector out = ops.d1_transpose_column(e);
  out = (sigma * (u[e] - u0)) * out.cwiseQuotient(ops.norm()).cwiseQuotient(branch.radius);
  return out;
}

/// Mass diagonal and right-hand side with M u_t = rhs for a branch ending in the soma.
struct SomaSystem {
  Vector mass;
  Vector rhs;
};

/// The soma SAT contains u_t at the end node; it is moved to the left-hand
/// side, which changes only the mass entry of that node. `g` and `f` at the
/// end node are the soma's own conductance and source.
inline SomaSystem soma_system(const HHConstants& k, const BranchGeometry& branch,
                              const SbpOperatorSet& ops, const Vector& u, const Vector& g,
                              const Vector& f, End end, const SomaEnd& soma) {
  const double eta = soma.eta(k);
  if (!(eta > 0.0)) throw ConfigError("soma eta must be positive");
  const int e = branch.node(end);
  const double sigma = SatCoefficients::soma(k, eta);
  const double pe = ops.norm()[e];
  const double ae = branch.radius[e];
  SomaSystem sys;
  sys.rhs = branch.radius.cwiseProduct(cable_interior_rhs(k, branch, ops, u, g, f));
  sys.mass = branch.radius;
  sys.mass[e] -= sigma / pe;
  const double residual_explicit =
      outward_normal(end) * eta * ae * ae * ops.derivative_at(u, e) + (g[e] * u[e] - f[e]) / k.C_m;
  sys.rhs[e] += sigma / pe * residual_explicit;
  return sys;
}

/// One member of a junction as seen by the junction SAT.
struct JunctionMemberView {
  const BranchGeometry* branch;
  const SbpOperatorSet* ops;
  const Vector* u;
  End end;
};

/// Continuity and current-conservation penalties for every member of a junction.
inline std::vector<Vector> sat_junction(const HHConstants& k, const std::vector<JunctionMemberView>& members) {
  const int nc = static_cast<int>(members.size());
  if (nc < 2) throw ConfigError("a junction needs at least two members");
  double flux = 0.0;
  std::vector<double> u_end(nc);
  for (int j = 0; j < nc; ++j) {
    const auto& m = members[j];
    require_size(static_cast<std::size_t>(m.u->size()), static_cast<std::size_t>(m.ops->size()),
                 "sat_junction");
    const int e = m.branch->node(m.end);
    const double a = m.branch->radius[e];
    flux += outward_normal(m.end) * a * a * m.ops->derivative_at(*m.u, e);
    u_end[j] = (*m.u)[e];
  }
  const double s_flux = SatCoefficients::junction_flux(k, nc);
  std::vector<Vector> out;
  out.reserve(nc);
  for (int i = 0; i < nc; ++i) {
    const auto& m = members[i];
    const int e = m.branch->node(m.end);
    const double nu = outward_normal(m.end);
    double jump = 0.0;
    for (int j = 0; j < nc; ++j) jump += u_end[i] - u_end[j];
    const double s_cont = -nu * SatCoefficients::junction_continuity(k, nc, m.branch->radius[e]);
    Vector pen = (s_cont * jump) * m.ops->d1_transpose_column(e);
    pen[e] -= s_flux * flux;
    out.push_back(pen.cwiseQuotient(m.ops->norm()).cwiseQuotient(m.branch->radius));
  }
  return out;
}

}  // namespace hhsbp
