#pragma once

// Hodgkin-Huxley membrane kinetics in SI units (V, s, F/m^2, ohm m, S/m^2).
// Potentials are measured relative to rest, depolarization positive.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "hhsbp/error.hpp"

namespace hhsbp {

using Vector = Eigen::VectorXd;

struct HHConstants {
  double C_m = 1e-2;     // F/m^2
  double R_i = 0.354;    // ohm m
  double g1 = 1200.0;    // S/m^2, sodium
  double g2 = 360.0;     // S/m^2, potassium
  double g3 = 3.0;       // S/m^2, leak
  double E1 = 0.115;     // V
  double E2 = -0.012;    // V
  double E3 = 0.010613;  // V

  double mu() const { return 1.0 / (2.0 * C_m * R_i); }
  double g_min() const { return g3; }
  double g_max() const { return g1 + g2 + g3; }

  void validate() const {
    if (!(C_m > 0.0) || !(R_i > 0.0) || !(g1 > 0.0) || !(g2 > 0.0) || !(g3 > 0.0)) {
      throw ConfigError("membrane constants C_m, R_i, g1, g2, g3 must be positive");
    }
    for (double e : {E1, E2, E3}) {
      if (!std::isfinite(e)) throw ConfigError("equilibrium potentials must be finite");
    }
  }
};

enum class RateKind { AlphaM, BetaM, AlphaH, BetaH, AlphaN, BetaN };

namespace detail {

// s / (exp(s / c) - 1), with the removable singularity at s = 0.
inline double exprel_ratio(double s, double c) {
  if (std::abs(s) < 1e-6) {
    const double z = s / c;
    return c * (1.0 - z / 2.0 + z * z / 12.0 - z * z * z * z / 720.0);
  }
  return s / std::expm1(s / c);
}

}  // namespace detail

inline double rate(RateKind kind, double u) {
  if (!std::isfinite(u)) throw DomainError("gating rate evaluated at non-finite potential");
  switch (kind) {
    case RateKind::AlphaM: return 1e5 * detail::exprel_ratio(0.025 - u, 0.01);
    case RateKind::BetaM: return 4e3 * std::exp(-u / 0.018);
    case RateKind::AlphaH: return 70.0 * std::exp(-u / 0.02);
    case RateKind::BetaH: return 1e3 / (std::exp((0.03 - u) / 0.01) + 1.0);
    case RateKind::AlphaN: return 1e4 * detail::exprel_ratio(0.01 - u, 0.01);
    case RateKind::BetaN: return 125.0 * std::exp(-u / 0.08);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

/// All six rates at one potential.
struct GateRates {
  double am, bm, ah, bh, an, bn;

  static GateRates at(double u) {
    return {rate(RateKind::AlphaM, u), rate(RateKind::BetaM, u), rate(RateKind::AlphaH, u),
            rate(RateKind::BetaH, u),  rate(RateKind::AlphaN, u), rate(RateKind::BetaN, u)};
  }
};

/// Steady-state open fractions alpha / (alpha + beta) at a fixed potential.
inline std::array<double, 3> steady_gating(double u) {
  const auto r = GateRates::at(u);
  return {r.am / (r.am + r.bm), r.ah / (r.ah + r.bh), r.an / (r.an + r.bn)};
}

inline double conductance(const HHConstants& k, double m, double h, double n) {
  return k.g1 * m * m * m * h + k.g2 * n * n * n * n + k.g3;
}

/// g1 E1 m^3 h + g2 E2 n^4 + g3 E3 - I, with I the membrane current density.
inline double source_f(const HHConstants& k, double m, double h, double n, double current_density) {
  return k.g1 * k.E1 * m * m * m * h + k.g2 * k.E2 * n * n * n * n + k.g3 * k.E3 - current_density;
}

struct GatingState {
  Vector m, h, n;

  static GatingState constant(Eigen::Index size, double m0, double h0, double n0) {
    return {Vector::Constant(size, m0), Vector::Constant(size, h0), Vector::Constant(size, n0)};
  }
  Eigen::Index size() const { return m.size(); }
};

/// Pointwise right-hand sides of the three gating ODEs.
inline GatingState gating_rhs(const Vector& u, const GatingState& w) {
  const auto n = static_cast<std::size_t>(u.size());
  require_size(static_cast<std::size_t>(w.m.size()), n, "gating_rhs m");
  require_size(static_cast<std::size_t>(w.h.size()), n, "gating_rhs h");
  require_size(static_cast<std::size_t>(w.n.size()), n, "gating_rhs n");
  GatingState out{Vector(u.size()), Vector(u.size()), Vector(u.size())};
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const auto r = GateRates::at(u[i]);
    out.m[i] = r.am * (1.0 - w.m[i]) - r.bm * w.m[i];
    out.h[i] = r.ah * (1.0 - w.h[i]) - r.bh * w.h[i];
    out.n[i] = r.an * (1.0 - w.n[i]) - r.bn * w.n[i];
  }
  return out;
}

struct GatingBoundsReport {
  bool ok = true;
  double min_m = 0, max_m = 0, min_h = 0, max_h = 0, min_n = 0, max_n = 0;
  std::string message;  ///< first violation, empty when ok
};

/// Checks every gate lies in [-tol, 1 + tol].
inline GatingBoundsReport check_gating_bounds(const GatingState& w, double tol = 1e-10) {
  GatingBoundsReport rep;
  auto scan = [&](const Vector& v, const char* name, double& lo, double& hi) {
    if (v.size() == 0) return;
    lo = v.minCoeff();
    hi = v.maxCoeff();
    if (!rep.ok) return;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (!(v[i] >= -tol && v[i] <= 1.0 + tol)) {
        std::ostringstream os;
        os << "gating variable " << name << "[" << i << "] = " << v[i] << " outside [0, 1]";
        rep.ok = false;
        rep.message = os.str();
        return;
      }
    }
  };
  scan(w.m, "m", rep.min_m, rep.max_m);
  scan(w.h, "h", rep.min_h, rep.max_h);
  scan(w.n, "n", rep.min_n, rep.max_n);
  return rep;
}

}  // namespace hhsbp
