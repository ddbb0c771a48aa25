#pragma once

// Fixed-step time integration: classical RK4 on the full state and the
// staggered second-order Hines scheme (implicit gating at half steps,
// Crank-Nicolson potential solve).

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "hhsbp/error.hpp"
#include "hhsbp/hh_kinetics.hpp"
#include "hhsbp/network.hpp"

namespace hhsbp {

struct TimeGrid {
  double t0 = 0.0;
  double t_end = 0.0;
  double dt = 0.0;
  long steps = 0;

  /// Rounds the step count and re-derives dt so the last step lands on t_end.
  static TimeGrid make(double t0, double t_end, double dt_nominal) {
    if (!(dt_nominal > 0.0) || !std::isfinite(dt_nominal)) throw ConfigError("time step must be positive");
    if (!(t_end >= t0)) throw ConfigError("end time precedes start time");
    TimeGrid g{t0, t_end, dt_nominal, std::lround((t_end - t0) / dt_nominal)};
    if (g.steps > 0) g.dt = (t_end - t0) / static_cast<double>(g.steps);
    return g;
  }

  double time(long k) const { return k == steps ? t_end : t0 + static_cast<double>(k) * dt; }
};

using VectorRhs = std::function<Vector(double, const Vector&)>;

/// One classical four-stage Runge-Kutta step of y' = f(t, y).
inline Vector rk4_step(const VectorRhs& f, const Vector& y, double t, double dt) {
  const Vector k1 = f(t, y);
  const Vector k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1);
  const Vector k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2);
  const Vector k4 = f(t + dt, y + dt * k3);
  return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace detail {

inline Vector pack(const NetworkState& s) {
  const auto n = s.u.size();
  Vector y(4 * n);
  y << s.u, s.m, s.h, s.n;
  return y;
}

inline void unpack(const Vector& y, NetworkState& s) {
  const auto n = y.size() / 4;
  s.u = y.segment(0, n);
  s.m = y.segment(n, n);
  s.h = y.segment(2 * n, n);
  s.n = y.segment(3 * n, n);
}

[[noreturn]] inline void diverged(double t, const Vector& u) {
  double umax = 0.0;
  for (double v : u) umax = std::isfinite(v) ? std::max(umax, std::abs(v)) : std::numeric_limits<double>::infinity();
  std::ostringstream os;
  os << "solution diverged at t = " << t << " s (max |u| = " << umax << " V)";
  throw NumericalError(os.str());
}

}  // namespace detail

/// RK4 step of the coupled potential/gating system.
inline NetworkState rk4_step(const CableNetwork& net, const NetworkState& s, const ExternalInputs& in, double dt) {
  const auto n = s.u.size();
  NetworkState tmp = s;
  VectorRhs f = [&](double t, const Vector& y) {
    detail::unpack(y, tmp);
    const auto d = network_rhs(net, tmp, in, t);
    Vector out(4 * n);
    out << d.du, d.dm, d.dh, d.dn;
    return out;
  };
  NetworkState out = s;
  try {
    detail::unpack(rk4_step(f, detail::pack(s), s.t, dt), out);
  } catch (const DomainError&) {
    detail::diverged(s.t + dt, tmp.u);
  }
  out.t = s.t + dt;
  if (!out.u.allFinite() || !out.m.allFinite() || !out.h.allFinite() || !out.n.allFinite()) {
    detail::diverged(out.t, out.u);
  }
  return out;
}

/// Trapezoidal update of one gate over dt with frozen rates:
/// w+ = [(1 - dt/2 (a + b)) w- + dt (a + F)] / [1 + dt/2 (a + b)].
/// Stays in [0, 1] for w- in [0, 1] whenever dt (a + b) <= 2.
inline double hines_gate_update(double w, double alpha, double beta, double forcing, double dt) {
  const double s = alpha + beta;
  const double denom = 1.0 + 0.5 * dt * s;
  if (!(denom > 0.0)) {
    std::ostringstream os;
    os << "gating step size invalid: dt = " << dt << " s with alpha + beta = " << s << " 1/s";
    throw NumericalError(os.str());
  }
  return ((1.0 - 0.5 * dt * s) * w + dt * (alpha + forcing)) / denom;
}

/// How a gate is advanced over one step with frozen rates.
enum class GateRule {
  Trapezoidal,  ///< closed-form trapezoidal rule everywhere
  Guarded,      ///< trapezoidal while dt (a + b) <= 2, exact exponential beyond
};

/// Exact solution of w' = a (1 - w) - b w + F over dt with constant coefficients.
inline double exponential_gate_update(double w, double alpha, double beta, double forcing, double dt) {
  const double s = alpha + beta;
  if (s <= 0.0) return w + dt * (alpha + forcing);
  const double w_inf = (alpha + forcing) / s;
  return w_inf + (w - w_inf) * std::exp(-s * dt);
}

inline double gate_update(GateRule rule, double w, double alpha, double beta, double forcing, double dt) {
  if (rule == GateRule::Guarded && dt * (alpha + beta) > 2.0) {
    return exponential_gate_update(w, alpha, beta, forcing, dt);
  }
  return hines_gate_update(w, alpha, beta, forcing, dt);
}

/// Advances every gate by dt with rates evaluated at the frozen potential u.
/// `forcing` may be empty; otherwise it holds F_m, F_h, F_n per node.
inline GatingState hines_gating_half_step(const Vector& u, const GatingState& w, double dt,
                                          const GatingState* forcing = nullptr,
                                          GateRule rule = GateRule::Guarded) {
  const auto n = static_cast<std::size_t>(u.size());
  require_size(static_cast<std::size_t>(w.size()), n, "hines_gating_half_step");
  GatingState out{Vector(u.size()), Vector(u.size()), Vector(u.size())};
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const auto r = GateRates::at(u[i]);
    const double fm = forcing ? forcing->m[i] : 0.0;
    const double fh = forcing ? forcing->h[i] : 0.0;
    const double fn = forcing ? forcing->n[i] : 0.0;
    out.m[i] = gate_update(rule, w.m[i], r.am, r.bm, fm, dt);
    out.h[i] = gate_update(rule, w.h[i], r.ah, r.bh, fh, dt);
    out.n[i] = gate_update(rule, w.n[i], r.an, r.bn, fn, dt);
  }
  return out;
}

/// Gating at t0 - dt/2 from gating at t0, by the same rule run backwards.
inline GatingState hines_gating_startup(const Vector& u, const GatingState& w0, double dt,
                                        const GatingState* forcing = nullptr,
                                        GateRule rule = GateRule::Guarded) {
  GatingState out{Vector(u.size()), Vector(u.size()), Vector(u.size())};
  const double tau = 0.5 * dt;
  auto back = [tau, rule](double w, double a, double b, double f) {
    const double s = a + b;
    // Running a fast gate backwards is ill-conditioned; it starts from w0.
    if (rule == GateRule::Guarded && tau * s > 2.0) return w;
    return ((1.0 + 0.5 * tau * s) * w - tau * (a + f)) / (1.0 - 0.5 * tau * s);
  };
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const auto r = GateRates::at(u[i]);
    out.m[i] = back(w0.m[i], r.am, r.bm, forcing ? forcing->m[i] : 0.0);
    out.h[i] = back(w0.h[i], r.ah, r.bh, forcing ? forcing->h[i] : 0.0);
    out.n[i] = back(w0.n[i], r.an, r.bn, forcing ? forcing->n[i] : 0.0);
  }
  return out;
}

struct LinearSolveStats {
  long factorizations = 0;
  long solves = 0;
  long refinement_iterations = 0;
  double max_relative_residual = 0.0;
};

/// Implicit potential solver for (I - dt/2 A1(w)) u+ = (I + dt/2 A1(w)) u + dt b1, where
/// A1(w) = K - diag(g(w) / C_m) and K = M^{-1} K0 is the constant coupling part.
class HinesSolver {
 public:
  struct Options {
    bool frozen_factorization = false;  ///< reuse one LU and correct by iterative refinement
    GateRule gate_rule = GateRule::Guarded;
    bool damp_breakpoints = true;  ///< backward Euler half steps across input jumps
    double residual_tolerance = 1e-10;
    int max_refinement = 30;
  };

  HinesSolver(const CableNetwork& net, double dt, Options opt) : net_(&net), dt_(dt), opt_(opt) {
    if (!(dt > 0.0)) throw ConfigError("Hines solver needs dt > 0");
    k_ = coupling_matrix(net);
    const auto n = net.total_nodes();
    SparseMatrix id(n, n);
    id.setIdentity();
    base_ = id - 0.5 * dt_ * k_;
    base_.makeCompressed();
    system_ = base_;
    col_major_ = Eigen::SparseMatrix<double>(system_);
    lu_.analyzePattern(col_major_);
  }

  /// K, built column by column from the homogeneous, conductance-free right-hand side.
  static SparseMatrix coupling_matrix(const CableNetwork& net) {
    const auto n = net.total_nodes();
    const Vector zero = Vector::Zero(n);
    std::vector<Eigen::Triplet<double>> trip;
    Vector e = Vector::Zero(n);
    for (int j = 0; j < n; ++j) {
      e[j] = 1.0;
      const Vector col = net.potential_rhs(e, zero, zero, 0.0, false);
      e[j] = 0.0;
      for (int i = 0; i < n; ++i) {
        if (col[i] != 0.0) trip.emplace_back(i, j, col[i]);
      }
    }
    SparseMatrix k(n, n);
    k.setFromTriplets(trip.begin(), trip.end());
    k.makeCompressed();
    return k;
  }

  const SparseMatrix& coupling() const { return k_; }
  const LinearSolveStats& stats() const { return stats_; }
  double dt() const { return dt_; }

  /// u+ for conductances g at the half level and the explicit part b1.
  Vector step(const Vector& u, const Vector& g, const Vector& b1) {
    const Vector rhs = u + 0.5 * dt_ * (k_ * u - (g / net_->constants().C_m).cwiseProduct(u)) + dt_ * b1;
    assemble(g);
    return solve(rhs);
  }

  /// Two backward Euler half steps with the same matrix; b1a and b1b are the
  /// explicit parts at the two half-step ends.
  Vector damped_step(const Vector& u, const Vector& g, const Vector& b1a, const Vector& b1b) {
    assemble(g);
    const Vector mid = solve(u + 0.5 * dt_ * b1a);
    return solve(mid + 0.5 * dt_ * b1b);
  }

  /// Hager/Higham estimate of cond_1 of the current system matrix.
  double condition_estimate() {
    const auto n = system_.rows();
    double norm_a = 0.0;
    const Eigen::SparseMatrix<double> a(system_);
    for (int j = 0; j < a.outerSize(); ++j) {
      double s = 0.0;
      for (Eigen::SparseMatrix<double>::InnerIterator it(a, j); it; ++it) s += std::abs(it.value());
      norm_a = std::max(norm_a, s);
    }
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    Vector x = Vector::Constant(n, 1.0 / static_cast<double>(n));
    double est = 0.0;
    for (int iter = 0; iter < 5; ++iter) {
      const Vector y = lu.solve(x);
      est = y.lpNorm<1>();
      const Vector xi = y.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
      const Vector z = lu.transpose().solve(xi);
      Eigen::Index j = 0;
      if (z.cwiseAbs().maxCoeff(&j) <= z.dot(x)) break;
      x.setZero();
      x[j] = 1.0;
    }
    return norm_a * est;
  }

 private:
  void assemble(const Vector& g) {
    const double c = 0.5 * dt_ / net_->constants().C_m;
    system_ = base_;
    for (int i = 0; i < system_.rows(); ++i) system_.coeffRef(i, i) += c * g[i];
    if (!opt_.frozen_factorization || !factored_) factorize();
  }

  Vector solve(const Vector& rhs) {
    Vector x = lu_.solve(rhs);
    ++stats_.solves;
    double rel = relative_residual(x, rhs);
    if (opt_.frozen_factorization) {
      int it = 0;
      while (rel > opt_.residual_tolerance && it < opt_.max_refinement) {
        x += lu_.solve(Vector(rhs - system_ * x));
        rel = relative_residual(x, rhs);
        ++it;
      }
      stats_.refinement_iterations += it;
      if (rel > opt_.residual_tolerance) {
        factorize();
        x = lu_.solve(rhs);
        rel = relative_residual(x, rhs);
      }
    }
    if (rel > opt_.residual_tolerance) {
      x += lu_.solve(Vector(rhs - system_ * x));
      rel = relative_residual(x, rhs);
    }
    if (!(rel <= opt_.residual_tolerance) || !x.allFinite()) {
      std::ostringstream os;
      os << "implicit potential solve failed: relative residual " << rel << ", estimated 1-norm condition number "
         << condition_estimate();
      throw NumericalError(os.str());
    }
    stats_.max_relative_residual = std::max(stats_.max_relative_residual, rel);
    return x;
  }

  void factorize() {
    col_major_ = Eigen::SparseMatrix<double>(system_);
    lu_.factorize(col_major_);
    if (lu_.info() != Eigen::Success) {
      std::ostringstream os;
      os << "implicit potential matrix is singular (" << lu_.lastErrorMessage()
         << "); estimated 1-norm condition number " << condition_estimate();
      throw NumericalError(os.str());
    }
    factored_ = true;
    ++stats_.factorizations;
  }

  double relative_residual(const Vector& x, const Vector& rhs) const {
    const double scale = std::max(rhs.norm(), std::numeric_limits<double>::min());
    return (rhs - system_ * x).norm() / scale;
  }

  const CableNetwork* net_;
  double dt_;
  Options opt_;
  SparseMatrix k_;
  SparseMatrix base_;
  SparseMatrix system_;
  Eigen::SparseMatrix<double> col_major_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  bool factored_ = false;
  LinearSolveStats stats_;
};

namespace detail {

inline GatingState gating_forcing_at(const ExternalInputs& in, double t, const Vector& u) {
  GatingState f = GatingState::constant(u.size(), 0.0, 0.0, 0.0);
  if (in.gating_forcing) in.gating_forcing(t, u, f.m, f.h, f.n);
  return f;
}

}  // namespace detail

/// Explicit part b1(w, t) = f(w, t) / C_m + M^{-1} c(t) of the potential equation.
inline Vector hines_explicit_part(const CableNetwork& net, const NetworkState& half, const ExternalInputs& in,
                                  double t) {
  const Vector f = nodal_source(net, half, in, t);
  return net.potential_rhs(Vector::Zero(net.total_nodes()), Vector::Zero(net.total_nodes()), f, t, true);
}

/// Stepper for the staggered scheme. The gating held in the state lags the
/// potential by half a step after `start`.
class HinesIntegrator {
 public:
  HinesIntegrator(const CableNetwork& net, const ExternalInputs& in, double dt, HinesSolver::Options opt = {})
      : net_(&net), in_(&in), opt_(opt), solver_(net, dt, opt) {}

  /// Replaces w(t0) by w(t0 - dt/2).
  void start(NetworkState& s) const {
    const double dt = solver_.dt();
    const auto f = detail::gating_forcing_at(*in_, s.t, s.u);
    const auto w = hines_gating_startup(s.u, s.gating(), dt, in_->gating_forcing ? &f : nullptr, opt_.gate_rule);
    s.m = w.m;
    s.h = w.h;
    s.n = w.n;
  }

  /// (u^n, w^{n-1/2}) -> (u^{n+1}, w^{n+1/2}).
  void step(NetworkState& s) {
    const double dt = solver_.dt();
    const auto f = detail::gating_forcing_at(*in_, s.t, s.u);
    const auto w = hines_gating_half_step(s.u, s.gating(), dt, in_->gating_forcing ? &f : nullptr, opt_.gate_rule);
    NetworkState half{s.u, w.m, w.h, w.n, s.t + 0.5 * dt};
    const Vector g = nodal_conductance(net_->constants(), half);
    if (opt_.damp_breakpoints && jumps_within(s.t, s.t + dt)) {
      half.t = s.t + 0.5 * dt;
      const Vector b1a = hines_explicit_part(*net_, half, *in_, half.t);
      half.t = s.t + dt;
      const Vector b1b = hines_explicit_part(*net_, half, *in_, half.t);
      s.u = solver_.damped_step(s.u, g, b1a, b1b);
      ++damped_;
    } else {
      const Vector b1 = hines_explicit_part(*net_, half, *in_, half.t);
      s.u = solver_.step(s.u, g, b1);
    }
    s.m = w.m;
    s.h = w.h;
    s.n = w.n;
    s.t += dt;
    if (!s.u.allFinite()) detail::diverged(s.t, s.u);
  }

  long damped_steps() const { return damped_; }
  const HinesSolver& solver() const { return solver_; }

 private:
  bool jumps_within(double t0, double t1) const {
    const double eps = 1e-6 * (t1 - t0);
    for (double b : in_->breakpoints) {
      if (b >= t0 - eps && b < t1 - eps) return true;
    }
    return false;
  }

  const CableNetwork* net_;
  const ExternalInputs* in_;
  HinesSolver::Options opt_;
  HinesSolver solver_;
  long damped_ = 0;
};

enum class Scheme { RK4, Hines };

inline Scheme parse_scheme(const std::string& s) {
  if (s == "rk4" || s == "RK4") return Scheme::RK4;
  if (s == "hines" || s == "Hines") return Scheme::Hines;
  throw ConfigError("unknown time scheme '" + s + "' (expected rk4 or hines)");
}

struct Probe {
  std::string label;
  int index = 0;  ///< flat node index in the network
};

struct AdvanceOptions {
  Scheme scheme = Scheme::RK4;
  int record_every = 1;
  bool check_gating = true;
  double gating_tolerance = 1e-10;
  bool record_energy = false;
  HinesSolver::Options hines{};
};

struct GatingExtremes {
  double min_m = 1.0, max_m = 0.0, min_h = 1.0, max_h = 0.0, min_n = 1.0, max_n = 0.0;

  void update(const NetworkState& s) {
    min_m = std::min(min_m, s.m.minCoeff());
    max_m = std::max(max_m, s.m.maxCoeff());
    min_h = std::min(min_h, s.h.minCoeff());
    max_h = std::max(max_h, s.h.maxCoeff());
    min_n = std::min(min_n, s.n.minCoeff());
    max_n = std::max(max_n, s.n.maxCoeff());
  }
  double min() const { return std::min({min_m, min_h, min_n}); }
  double max() const { return std::max({max_m, max_h, max_n}); }
};

struct AdvanceResult {
  NetworkState state;
  std::vector<double> times;
  std::vector<std::vector<double>> probes;  ///< probes[p][sample]
  std::vector<double> energy;
  GatingExtremes gating;
  LinearSolveStats linear;
  long steps = 0;
  long damped_steps = 0;  ///< Hines steps taken as two backward Euler halves
};

/// Fixed-step march from state.t over `grid`, sampling probes every record_every steps.
inline AdvanceResult advance(const CableNetwork& net, NetworkState state, const ExternalInputs& inputs,
                             const TimeGrid& grid, const std::vector<Probe>& probes, const AdvanceOptions& opt) {
  if (opt.record_every < 1) throw ConfigError("record_every must be at least 1");
  for (const auto& p : probes) {
    if (p.index < 0 || p.index >= net.total_nodes()) {
      throw ConfigError("probe '" + p.label + "' index out of range");
    }
  }
  AdvanceResult res;
  res.probes.resize(probes.size());
  state.t = grid.t0;
  auto record = [&](const NetworkState& s) {
    res.times.push_back(s.t);
    for (std::size_t p = 0; p < probes.size(); ++p) res.probes[p].push_back(s.u[probes[p].index]);
    if (opt.record_energy) res.energy.push_back(discrete_energy(net, s.u));
  };
  auto check = [&](const NetworkState& s) {
    res.gating.update(s);
    if (!opt.check_gating) return;
    const auto rep = check_gating_bounds(s.gating(), opt.gating_tolerance);
    if (!rep.ok) {
      std::ostringstream os;
      os << rep.message << " at t = " << s.t << " s";
      throw NumericalError(os.str());
    }
  };
  record(state);
  check(state);
  if (grid.steps == 0) {
    res.state = state;
    return res;
  }
  if (opt.scheme == Scheme::RK4) {
    for (long k = 1; k <= grid.steps; ++k) {
      state = rk4_step(net, state, inputs, grid.dt);
      state.t = grid.time(k);
      check(state);
      if (k % opt.record_every == 0 || k == grid.steps) record(state);
    }
  } else {
    HinesIntegrator hines(net, inputs, grid.dt, opt.hines);
    hines.start(state);
    for (long k = 1; k <= grid.steps; ++k) {
      hines.step(state);
      state.t = grid.time(k);
      check(state);
      if (k % opt.record_every == 0 || k == grid.steps) record(state);
    }
    res.linear = hines.solver().stats();
    res.damped_steps = hines.damped_steps();
  }
  res.steps = grid.steps;
  res.state = state;
  return res;
}

}  // namespace hhsbp
