#pragma once

// Manufactured solutions for the cable+soma and three-branch junction
// problems, their forcing terms, and grid-refinement studies.

#include <atomic>
#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hhsbp/error.hpp"
#include "hhsbp/hh_kinetics.hpp"
#include "hhsbp/network.hpp"
#include "hhsbp/time_integration.hpp"
#include "hhsbp/topology.hpp"

namespace hhsbp {

enum class ManufacturedKind { CableSoma, Junction3 };

inline const char* to_string(ManufacturedKind k) {
  return k == ManufacturedKind::CableSoma ? "cable_soma" : "junction3";
}

inline ManufacturedKind parse_manufactured_kind(const std::string& s) {
  if (s == "cable_soma") return ManufacturedKind::CableSoma;
  if (s == "junction3") return ManufacturedKind::Junction3;
  throw ConfigError("unknown manufactured problem '" + s + "' (expected cable_soma or junction3)");
}

/// Root of tan(b) / b = -c in (pi/2, pi), c = mu / (eta a0 L) > 0, by bisection.
inline double solve_beta(double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw ConfigError("soma eigenvalue equation needs mu / (eta a0 L) > 0, got " + std::to_string(c));
  }
  auto phi = [c](double b) { return std::tan(b) / b + c; };
  double lo = std::nextafter(std::numbers::pi / 2.0, 4.0);
  double hi = std::nextafter(std::numbers::pi, 0.0);
  if (!(phi(lo) < 0.0 && phi(hi) > 0.0)) throw ConfigError("no root of the soma eigenvalue equation in (pi/2, pi)");
  while (hi - lo > 1e-14 * hi) {
    const double mid = 0.5 * (lo + hi);
    (phi(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace detail {

// Forward-mode dual number; nesting gives second derivatives.
template <class T>
struct Dual {
  T v{}, d{};
};

template <class T> Dual<T> operator+(Dual<T> a, Dual<T> b) { return {a.v + b.v, a.d + b.d}; }
template <class T> Dual<T> operator-(Dual<T> a, Dual<T> b) { return {a.v - b.v, a.d - b.d}; }
template <class T> Dual<T> operator-(Dual<T> a) { return {-a.v, -a.d}; }
template <class T> Dual<T> operator*(Dual<T> a, Dual<T> b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
template <class T> Dual<T> operator*(double s, Dual<T> a) { return {s * a.v, s * a.d}; }
template <class T> Dual<T> exp(Dual<T> a) {
  using std::exp;
  const T e = exp(a.v);
  return {e, a.d * e};
}
template <class T> Dual<T> sin(Dual<T> a) {
  using std::cos, std::sin;
  return {sin(a.v), a.d * cos(a.v)};
}
template <class T> Dual<T> cos(Dual<T> a) {
  using std::cos, std::sin;
  return {cos(a.v), -(a.d * sin(a.v))};
}

}  // namespace detail

/// Geometry of the manufactured problems (branch 3 of the junction problem is derived from a0 and L).
struct ManufacturedGeometry {
  double a0 = 0.476e-3;        ///< m
  double L = 0.05;             ///< m
  double soma_radius = 2e-3;   ///< m, spherical soma
};

struct ManufacturedValues {
  double u = 0.0, m = 1.0, h = 1.0, n = 1.0;
};

struct ManufacturedForcing {
  double F_u = 0.0, F_m = 0.0, F_h = 0.0, F_n = 0.0;
  double F_b = 0.0;  ///< soma boundary forcing (cable+soma problem only)
};

class ManufacturedProblem {
 public:
  static constexpr double kFinalTime = 1e-5;

  static ManufacturedProblem make(ManufacturedKind kind, HHConstants k = {}, ManufacturedGeometry geo = {}) {
    ManufacturedProblem p;
    p.kind_ = kind;
    p.k_ = k;
    k.validate();
    if (!(geo.a0 > 0.0) || !(geo.L > 0.0) || !(geo.soma_radius > 0.0)) {
      throw ConfigError("manufactured geometry needs positive radius, length and soma radius");
    }
    p.a0_ = geo.a0;
    p.L_ = geo.L;
    p.soma_radius_ = geo.soma_radius;
    const double gsum = k.g1 + k.g2 + k.g3;
    if (kind == ManufacturedKind::CableSoma) {
      p.soma_area_ = 4.0 * std::numbers::pi * p.soma_radius_ * p.soma_radius_;
      const double eta = SomaEnd{p.soma_area_}.eta(k);
      p.beta_ = solve_beta(k.mu() / (eta * p.a0_ * p.L_));
      p.wavenumber_ = p.beta_ / p.L_;
    } else {
      p.wavenumber_ = 3.0 * std::numbers::pi / (2.0 * p.L_);
    }
    p.lambda_ = gsum / k.C_m + k.mu() * p.a0_ * p.wavenumber_ * p.wavenumber_;
    return p;
  }

  ManufacturedKind kind() const { return kind_; }
  const HHConstants& constants() const { return k_; }
  double final_time() const { return kFinalTime; }
  double decay_rate() const { return lambda_; }
  double wavenumber() const { return wavenumber_; }
  /// Dimensionless root of the soma eigenvalue equation (cable+soma only).
  double beta() const { return beta_; }
  double reference_length() const { return L_; }
  double soma_area() const { return soma_area_; }

  int branch_count() const { return kind_ == ManufacturedKind::CableSoma ? 1 : 3; }
  double length(int b) const {
    check_branch(b);
    return b == 2 ? std::cbrt(2.0) * L_ : L_;
  }
  double radius(int b) const {
    check_branch(b);
    return b == 2 ? std::pow(2.0, 2.0 / 3.0) * a0_ : a0_;
  }

  /// Closed-form u on branch b; templated so derivatives can be taken by automatic differentiation.
  template <class T>
  T u(int b, T x, T t) const {
    using std::cos, std::exp, std::sin;
    const T decay = exp(-lambda_ * t);
    if (kind_ == ManufacturedKind::CableSoma) return decay * cos(wavenumber_ * x);
    if (b < 2) return decay * sin(wavenumber_ * x);
    return decay * sin(-(wavenumber_ * std::pow(2.0, -1.0 / 3.0)) * x);
  }

  ManufacturedValues eval(int b, double x, double t) const {
    check_point(b, x);
    return {u(b, x, t), 1.0, 1.0, 1.0};
  }

  ManufacturedForcing eval_forcing(int b, double x, double t) const {
    const auto v = eval(b, x, t);
    return forcing_at(v.u);
  }

  /// Forcing with the gating terms taken at potential `u`.
  ManufacturedForcing forcing_at(double u) const {
    ManufacturedForcing f;
    f.F_u = -(k_.g1 * k_.E1 + k_.g2 * k_.E2 + k_.g3 * k_.E3) / k_.C_m;
    f.F_m = rate(RateKind::BetaM, u);
    f.F_h = rate(RateKind::BetaH, u);
    f.F_n = rate(RateKind::BetaN, u);
    if (kind_ == ManufacturedKind::CableSoma) f.F_b = f.F_u;
    return f;
  }

  /// Clamp data at the far end of branch 3 (junction problem).
  double clamp_data(double t) const { return std::exp(-lambda_ * t); }

  /// Network with `n_points` nodes on every branch (N + 1 for N intervals).
  TreeTopology topology(int n_points) const {
    TreeTopology topo;
    if (kind_ == ManufacturedKind::CableSoma) {
      topo.add_branch({"cable", L_, n_points, [a = a0_](double) { return a; }, SealedEnd{}, SomaEnd{soma_area_}});
      return topo;
    }
    for (int b = 0; b < 3; ++b) {
      BranchSpec s;
      s.name = "branch" + std::to_string(b + 1);
      s.length = length(b);
      s.n_points = n_points;
      s.radius = [a = radius(b)](double) { return a; };
      s.left = JunctionMember{0};
      if (b < 2) {
        s.right = SealedEnd{};
      } else {
        s.right = VoltageClamp{[lam = lambda_](double t) { return std::exp(-lam * t); }};
      }
      topo.add_branch(std::move(s));
    }
    return topo;
  }

  /// Forcing inputs for a network built from topology(). The gating forcing
  /// uses the numerical potential so that m = h = n = 1 is preserved exactly.
  ExternalInputs inputs() const {
    ExternalInputs in;
    const double fu = forcing_at(0.0).F_u;
    in.potential_forcing = [fu](double, Vector& F) { F.array() += fu; };
    in.gating_forcing = [](double, const Vector& u, Vector& fm, Vector& fh, Vector& fn) {
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        fm[i] += rate(RateKind::BetaM, u[i]);
        fh[i] += rate(RateKind::BetaH, u[i]);
        fn[i] += rate(RateKind::BetaN, u[i]);
      }
    };
    return in;
  }

  Vector exact_u(const CableNetwork& net, double t) const {
    Vector out(net.total_nodes());
    for (int b = 0; b < net.branch_count(); ++b) {
      const auto& g = net.geometry(b).grid;
      for (int i = 0; i < g.n_points; ++i) out[net.node_index(b, i)] = u(b, g.x(i), t);
    }
    return out;
  }

  NetworkState initial_state(const CableNetwork& net) const {
    const auto n = net.total_nodes();
    return {exact_u(net, 0.0), Vector::Ones(n), Vector::Ones(n), Vector::Ones(n), 0.0};
  }

  /// sqrt(sum over branches of e^T P e) with e = u - exact at time t.
  double error_norm(const CableNetwork& net, const Vector& u_num, double t) const {
    const Vector e = u_num - exact_u(net, t);
    double s = 0.0;
    for (int b = 0; b < net.branch_count(); ++b) {
      const Vector eb = e.segment(net.offset(b), net.size(b));
      s += p_inner(net.ops(b), eb, eb);
    }
    return std::sqrt(s);
  }

 private:
  void check_branch(int b) const {
    if (b < 0 || b >= branch_count()) throw DomainError("branch " + std::to_string(b) + " out of range");
  }
  void check_point(int b, double x) const {
    check_branch(b);
    const double len = length(b);
    if (!(x >= -1e-12 * len && x <= len * (1.0 + 1e-12))) {
      throw DomainError("x = " + std::to_string(x) + " outside branch " + std::to_string(b));
    }
  }

  ManufacturedKind kind_ = ManufacturedKind::CableSoma;
  HHConstants k_;
  double a0_ = 0.476e-3;
  double L_ = 0.05;
  double soma_radius_ = 2e-3;
  double soma_area_ = 0.0;
  double beta_ = 0.0;
  double wavenumber_ = 0.0;
  double lambda_ = 0.0;
};

/// Derivatives of the closed form by nested forward-mode differentiation.
struct ManufacturedDerivatives {
  double u, u_t, u_x, u_xx;
};

inline ManufacturedDerivatives manufactured_derivatives(const ManufacturedProblem& p, int b, double x, double t) {
  using D = detail::Dual<double>;
  using DD = detail::Dual<D>;
  const D ut = p.u<D>(b, D{x, 0.0}, D{t, 1.0});
  const DD ux = p.u<DD>(b, DD{D{x, 1.0}, D{1.0, 0.0}}, DD{D{t, 0.0}, D{0.0, 0.0}});
  return {ut.v, ut.d, ux.v.d, ux.d.d};
}

struct ManufacturedResidualReport {
  int samples = 0;
  double pde = 0.0;        ///< max relative residual of the forced cable equation
  double gating = 0.0;     ///< max |m_t - rhs| with m = h = n = 1 (absolute)
  double boundary = 0.0;   ///< sealed, clamp and soma conditions (relative)
  double interface = 0.0;  ///< junction continuity and flux balance (relative)

  double worst() const { return std::max({pde, gating, boundary, interface}); }
};

/// Substitutes the closed forms into the forced continuous equations on an
/// nx-by-nt sample per branch and at every boundary for each sample time.
inline ManufacturedResidualReport manufactured_residuals(const ManufacturedProblem& p, int nx, int nt) {
  if (nx < 2 || nt < 2) throw ConfigError("residual sample needs at least 2 points in x and t");
  const auto& k = p.constants();
  const double gsum = conductance(k, 1.0, 1.0, 1.0);
  const double fsum = source_f(k, 1.0, 1.0, 1.0, 0.0);
  const double T = p.final_time();
  ManufacturedResidualReport rep;
  auto rel = [](double r, double scale) { return scale > 0.0 ? std::abs(r) / scale : std::abs(r); };
  for (int j = 0; j < nt; ++j) {
    const double t = T * j / (nt - 1);
    for (int b = 0; b < p.branch_count(); ++b) {
      const double a = p.radius(b);
      const double len = p.length(b);
      for (int i = 0; i < nx; ++i) {
        const double x = len * i / (nx - 1);
        const auto d = manufactured_derivatives(p, b, x, t);
        const auto f = p.eval_forcing(b, x, t);
        const double diff = k.mu() / a * (a * a * d.u_xx);
        const double r = d.u_t - (diff - gsum * d.u / k.C_m + fsum / k.C_m + f.F_u);
        const double scale = std::abs(d.u_t) + std::abs(diff) + std::abs(gsum * d.u / k.C_m) +
                             std::abs(fsum / k.C_m) + std::abs(f.F_u);
        rep.pde = std::max(rep.pde, rel(r, scale));
        const auto rates = GateRates::at(d.u);
        // m_t = 0 for m = 1
        rep.gating = std::max({rep.gating, std::abs(rates.am * 0.0 - rates.bm + f.F_m),
                               std::abs(rates.ah * 0.0 - rates.bh + f.F_h),
                               std::abs(rates.an * 0.0 - rates.bn + f.F_n)});
        ++rep.samples;
      }
    }
    if (p.kind() == ManufacturedKind::CableSoma) {
      const double a = p.radius(0), L = p.length(0);
      const auto d0 = manufactured_derivatives(p, 0, 0.0, t);
      const double scale0 = std::abs(p.wavenumber() * std::exp(-p.decay_rate() * t));
      rep.boundary = std::max(rep.boundary, rel(d0.u_x, scale0));
      const auto dL = manufactured_derivatives(p, 0, L, t);
      const double eta = SomaEnd{p.soma_area()}.eta(k);
      const double fb = p.eval_forcing(0, L, t).F_b;
      const double r = dL.u_t - (-eta * a * a * dL.u_x - gsum * dL.u / k.C_m + fsum / k.C_m + fb);
      const double scale = std::abs(dL.u_t) + std::abs(eta * a * a * dL.u_x) + std::abs(gsum * dL.u / k.C_m) +
                           std::abs(fsum / k.C_m) + std::abs(fb);
      rep.boundary = std::max(rep.boundary, rel(r, scale));
    } else {
      double flux = 0.0, flux_scale = 0.0, umax = 0.0;
      std::vector<double> u0(3);
      for (int b = 0; b < 3; ++b) {
        const auto d = manufactured_derivatives(p, b, 0.0, t);
        const double term = -p.radius(b) * p.radius(b) * d.u_x;  // outward normal -1 at x = 0
        flux += term;
        flux_scale += std::abs(term);
        u0[b] = d.u;
        umax = std::max(umax, std::abs(d.u));
      }
      const double amp = std::exp(-p.decay_rate() * t);
      rep.interface = std::max({rep.interface, rel(flux, flux_scale), rel(u0[0] - u0[1], amp),
                                rel(u0[1] - u0[2], amp)});
      for (int b = 0; b < 2; ++b) {
        const auto d = manufactured_derivatives(p, b, p.length(b), t);
        rep.boundary = std::max(rep.boundary, rel(d.u_x, p.wavenumber() * amp));
      }
      const double u3 = p.u(2, p.length(2), t);
      rep.boundary = std::max(rep.boundary, rel(u3 - p.clamp_data(t), amp));
    }
  }
  return rep;
}

/// Uniformly drawn state with u in [-0.12, 0.12] V and gates in [0, 1].
inline NetworkState random_network_state(const CableNetwork& net, std::mt19937& rng) {
  std::uniform_real_distribution<double> du(-0.12, 0.12), dw(0.0, 1.0);
  NetworkState s = resting_state(net);
  for (int i = 0; i < net.total_nodes(); ++i) {
    s.u[i] = du(rng);
    s.m[i] = dw(rng);
    s.h[i] = dw(rng);
    s.n[i] = dw(rng);
  }
  return s;
}

/// Largest relative energy-identity residual over random states of the
/// manufactured problem's network (homogeneous version).
inline double energy_identity_worst(ManufacturedKind kind, int order, int N, int samples, unsigned seed) {
  const auto p = ManufacturedProblem::make(kind);
  const CableNetwork net(p.constants(), p.topology(N + 1), order);
  std::mt19937 rng(seed);
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) worst = std::max(worst, energy_rate_residual(net, random_network_state(net, rng)).relative());
  return worst;
}

struct RateResult {
  double q = 0.0;
  bool exact = false;  ///< a zero error makes the rate undefined
};

/// q = log10(e1 / e2) / log10(h1 / h2).
inline RateResult convergence_rate(double e1, double e2, double h1, double h2) {
  if (!(h1 > 0.0) || !(h2 > 0.0) || h1 == h2) throw DomainError("convergence rate needs distinct positive spacings");
  if (!(e1 >= 0.0) || !(e2 >= 0.0)) throw DomainError("convergence rate needs non-negative errors");
  if (e1 == 0.0 || e2 == 0.0) return {std::numeric_limits<double>::quiet_NaN(), true};
  return {std::log10(e1 / e2) / std::log10(h1 / h2), false};
}

struct ConvergenceCell {
  int order = 0;
  int N = 0;  ///< intervals per branch
  double h = 0.0;
  double error = 0.0;
  std::optional<double> rate;
  double wall_time_s = 0.0;
  bool ok = true;
  std::string failure;
};

/// Solves one (order, N) cell with RK4 to the final time and measures the P-norm error.
inline ConvergenceCell run_convergence_cell(const ManufacturedProblem& p, int order, int N, double dt) {
  ConvergenceCell c;
  c.order = order;
  c.N = N;
  c.h = p.reference_length() / N;
  const auto start = std::chrono::steady_clock::now();
  try {
    CableNetwork net(p.constants(), p.topology(N + 1), order);
    const auto in = p.inputs();
    const auto grid = TimeGrid::make(0.0, p.final_time(), dt);
    NetworkState s = p.initial_state(net);
    for (long k = 1; k <= grid.steps; ++k) {
      s = rk4_step(net, s, in, grid.dt);
      s.t = grid.time(k);
    }
    c.error = p.error_norm(net, s.u, grid.t_end);
  } catch (const std::exception& e) {
    c.ok = false;
    c.failure = e.what();
  }
  c.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return c;
}

struct ConvergenceStudy {
  ManufacturedKind kind = ManufacturedKind::Junction3;
  double dt = 1e-9;
  std::vector<ConvergenceCell> cells;  ///< ordered by order, then N

  /// Rate between the two finest successful cells of `order`.
  std::optional<double> finest_rate(int order) const {
    std::optional<double> r;
    for (const auto& c : cells) {
      if (c.order == order && c.rate) r = c.rate;
    }
    return r;
  }

  /// Every order reaches a finest-pair rate of at least order - 0.5.
  bool passed() const {
    bool any = false;
    for (const auto& c : cells) {
      if (c.N == 0) continue;
      any = true;
      const auto r = finest_rate(c.order);
      if (!r || *r < c.order - 0.5) return false;
    }
    return any;
  }

  std::string csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "order,N,h,error,rate,wall_time_s\n";
    for (const auto& c : cells) {
      os << c.order << ',' << c.N << ',' << c.h << ',';
      if (c.ok) os << c.error;
      os << ',';
      if (c.rate) os << *c.rate;
      os << ',' << c.wall_time_s << '\n';
    }
    return os.str();
  }
};

/// Grid-refinement study over independent (order, N) cells, run on up to
/// `threads` workers. A failed cell is recorded and breaks the rate chain for
/// that order without aborting the study.
inline ConvergenceStudy run_convergence_study(ManufacturedKind kind, const std::vector<int>& orders,
                                              const std::vector<int>& Ns, double dt = 1e-9,
                                              const HHConstants& k = {}, const ManufacturedGeometry& geo = {},
                                              int threads = 1) {
  const auto p = ManufacturedProblem::make(kind, k, geo);
  ConvergenceStudy study;
  study.kind = kind;
  study.dt = dt;
  for (int order : orders) {
    for (int N : Ns) study.cells.push_back({order, N});
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < study.cells.size(); i = next++) {
      study.cells[i] = run_convergence_cell(p, study.cells[i].order, study.cells[i].N, dt);
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(study.cells.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t i = 1; i < study.cells.size(); ++i) {
    auto& c = study.cells[i];
    const auto& prev = study.cells[i - 1];
    if (prev.order != c.order || !c.ok || !prev.ok) continue;
    const auto r = convergence_rate(prev.error, c.error, prev.h, c.h);
    if (!r.exact) c.rate = r.q;
  }
  return study;
}

}  // namespace hhsbp
