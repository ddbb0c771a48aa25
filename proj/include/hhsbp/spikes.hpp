#pragma once

// Spike detection on uniformly sampled potential traces.

#include <cmath>
#include <string>
#include <vector>

#include "hhsbp/error.hpp"

namespace hhsbp {

struct Trace {
  std::string label;
  std::vector<double> t;  ///< s, uniformly spaced
  std::vector<double> v;  ///< V relative to rest

  double dt() const { return t.size() > 1 ? (t.back() - t.front()) / static_cast<double>(t.size() - 1) : 0.0; }

  void validate() const {
    if (t.empty() || t.size() != v.size()) throw DomainError("trace '" + label + "' is empty or ragged");
    const double step = dt();
    for (std::size_t i = 1; i < t.size(); ++i) {
      const double d = t[i] - t[i - 1];
      if (!(d > 0.0) || std::abs(d - step) > 1e-6 * step) {
        throw DomainError("trace '" + label + "' is not uniformly sampled");
      }
    }
  }
};

struct Peak {
  double time = 0.0;
  double amplitude = 0.0;
  std::size_t index = 0;  ///< sample of the discrete maximum
};

struct SpikeAnalysis {
  std::vector<Peak> peaks;

  std::size_t count() const { return peaks.size(); }
  std::vector<double> times() const {
    std::vector<double> out;
    for (const auto& p : peaks) out.push_back(p.time);
    return out;
  }
};

struct SpikeOptions {
  double threshold = 0.05;    ///< V above rest
  double refractory = 5e-3;   ///< s
};

namespace detail {

// Vertex of the parabola through three equally spaced samples around sample i.
inline Peak refine_peak(const Trace& tr, std::size_t i) {
  Peak p{tr.t[i], tr.v[i], i};
  if (i == 0 || i + 1 >= tr.v.size()) return p;
  const double y0 = tr.v[i - 1], y1 = tr.v[i], y2 = tr.v[i + 1];
  const double den = y0 - 2.0 * y1 + y2;
  if (den >= 0.0) return p;
  const double delta = 0.5 * (y0 - y2) / den;
  p.time = tr.t[i] + delta * tr.dt();
  p.amplitude = y1 - 0.25 * (y0 - y2) * delta;
  return p;
}

}  // namespace detail

/// Local maxima at or above a floor, without the refractory merge.
inline std::vector<Peak> local_maxima(const Trace& tr, double floor) {
  tr.validate();
  std::vector<Peak> out;
  for (std::size_t i = 1; i + 1 < tr.v.size(); ++i) {
    if (tr.v[i] >= floor && tr.v[i] > tr.v[i - 1] && tr.v[i] >= tr.v[i + 1]) out.push_back(detail::refine_peak(tr, i));
  }
  return out;
}

/// Maxima above the threshold; of two maxima closer than the refractory window the higher one is kept.
inline SpikeAnalysis detect_peaks(const Trace& tr, SpikeOptions opt = {}) {
  SpikeAnalysis out;
  for (const auto& p : local_maxima(tr, opt.threshold)) {
    if (!out.peaks.empty() && p.time - out.peaks.back().time < opt.refractory) {
      if (p.amplitude > out.peaks.back().amplitude) out.peaks.back() = p;
      continue;
    }
    out.peaks.push_back(p);
  }
  return out;
}

/// First soma spike time minus first injection-site spike time.
inline double propagation_time(const Trace& injection, const Trace& soma, SpikeOptions opt = {}) {
  const auto a = detect_peaks(injection, opt);
  const auto b = detect_peaks(soma, opt);
  if (a.peaks.empty()) throw DomainError("no spike in trace '" + injection.label + "'");
  if (b.peaks.empty()) throw DomainError("no spike in trace '" + soma.label + "'");
  return b.peaks.front().time - a.peaks.front().time;
}

}  // namespace hhsbp
