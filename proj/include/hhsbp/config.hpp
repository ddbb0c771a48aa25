#pragma once

// JSON experiment description. Every parse error names the offending path,
// e.g. "topology.branches[2].length: must be positive".

#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hhsbp/error.hpp"
#include "hhsbp/hh_kinetics.hpp"
#include "hhsbp/spikes.hpp"
#include "hhsbp/stimulus.hpp"
#include "hhsbp/time_integration.hpp"
#include "hhsbp/topology.hpp"

namespace hhsbp {

using Json = nlohmann::json;

namespace detail {

/// Cursor into a JSON document that remembers where it is.
class Node {
 public:
  Node(const Json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const Json& json() const { return *j_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& msg) const { throw ConfigError(path_ + ": " + msg); }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

  Node at(const std::string& key) const {
    if (!j_->is_object()) fail("expected an object");
    if (!j_->contains(key)) fail("missing key '" + key + "'");
    return Node(j_->at(key), child(key));
  }

  Node at(std::size_t i) const { return Node(j_->at(i), path_ + "[" + std::to_string(i) + "]"); }

  std::size_t size() const {
    if (!j_->is_array()) fail("expected an array");
    return j_->size();
  }

  double number() const {
    if (!j_->is_number()) fail("expected a number");
    const double v = j_->get<double>();
    if (!std::isfinite(v)) fail("must be finite");
    return v;
  }

  double positive() const {
    const double v = number();
    if (!(v > 0.0)) fail("must be positive");
    return v;
  }

  int integer() const {
    if (!j_->is_number_integer()) fail("expected an integer");
    return j_->get<int>();
  }

  bool boolean() const {
    if (!j_->is_boolean()) fail("expected true or false");
    return j_->get<bool>();
  }

  std::string string() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }

  double number_or(const std::string& key, double fallback) const { return has(key) ? at(key).number() : fallback; }
  double positive_or(const std::string& key, double fallback) const {
    return has(key) ? at(key).positive() : fallback;
  }
  int integer_or(const std::string& key, int fallback) const { return has(key) ? at(key).integer() : fallback; }
  bool boolean_or(const std::string& key, bool fallback) const { return has(key) ? at(key).boolean() : fallback; }
  std::string string_or(const std::string& key, std::string fallback) const {
    return has(key) ? at(key).string() : fallback;
  }

  void allow_only(std::initializer_list<const char*> keys) const {
    if (!j_->is_object()) fail("expected an object");
    for (const auto& [k, v] : j_->items()) {
      bool ok = false;
      for (const char* a : keys) ok = ok || k == a;
      if (!ok) Node(v, child(k)).fail("unknown key");
    }
  }

 private:
  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json* j_;
  std::string path_;
};

inline double sphere_area(double r) { return 4.0 * std::numbers::pi * r * r; }

}  // namespace detail

/// Location of a recorded potential.
struct ProbeSpec {
  std::string label;
  bool soma = false;
  int branch = 0;
  std::optional<End> end;
  std::optional<double> x;  ///< m along the branch, nearest node
  std::optional<int> node;  ///< local node index
};

struct SpikeConfig {
  SpikeOptions options;
  double band_low = 0.04;   ///< threshold-stability band, V
  double band_high = 0.07;
  double bump_floor = 0.005;  ///< smallest local maximum reported as a sub-threshold bump, V
  std::vector<std::pair<std::string, std::string>> propagation;  ///< (injection probe, downstream probe)
};

struct OutputConfig {
  bool traces = true;
  bool energy = true;
  bool spikes = true;
  SpikeConfig spike;
};

struct TimeConfig {
  Scheme scheme = Scheme::Hines;
  double t0 = 0.0;
  double t_end = 0.0;
  double dt = 0.0;
  int record_every = 1;
  bool check_gating = true;
  HinesSolver::Options hines{};
};

struct ExperimentConfig {
  std::string name = "experiment";
  HHConstants constants{};
  std::string topology_kind;
  TreeTopology topology;
  std::vector<int> leaves;  ///< tree leaves, empty for other kinds
  int order = 5;
  int intervals = 0;        ///< N; every branch has N + 1 nodes
  TimeConfig time;
  StimulusProtocol stimulus;
  std::vector<ProbeSpec> probes;
  OutputConfig outputs;
  Json source;
};

namespace detail {

inline HHConstants parse_constants(const Node& n) {
  n.allow_only({"C_m", "R_i", "g1", "g2", "g3", "E1", "E2", "E3"});
  HHConstants k;
  k.C_m = n.positive_or("C_m", k.C_m);
  k.R_i = n.positive_or("R_i", k.R_i);
  k.g1 = n.positive_or("g1", k.g1);
  k.g2 = n.positive_or("g2", k.g2);
  k.g3 = n.positive_or("g3", k.g3);
  k.E1 = n.number_or("E1", k.E1);
  k.E2 = n.number_or("E2", k.E2);
  k.E3 = n.number_or("E3", k.E3);
  return k;
}

inline End parse_end(const Node& n) {
  const auto s = n.string();
  if (s == "left") return End::Left;
  if (s == "right") return End::Right;
  n.fail("expected 'left' or 'right'");
}

inline BoundaryCondition parse_condition(const Node& n) {
  if (n.json().is_string()) {
    const auto s = n.string();
    if (s == "sealed") return SealedEnd{};
    if (s == "clamp") return VoltageClamp{};
    n.fail("unknown end condition '" + s + "'");
  }
  const auto type = n.at("type").string();
  if (type == "sealed") {
    n.allow_only({"type"});
    return SealedEnd{};
  }
  if (type == "clamp") {
    n.allow_only({"type", "value"});
    const double v = n.number_or("value", 0.0);
    return VoltageClamp{[v](double) { return v; }};
  }
  if (type == "junction") {
    n.allow_only({"type", "id"});
    const int id = n.at("id").integer();
    if (id < 0) n.at("id").fail("must be non-negative");
    return JunctionMember{id};
  }
  if (type == "soma") {
    n.allow_only({"type", "radius", "area"});
    if (n.has("area")) return SomaEnd{n.at("area").positive()};
    return SomaEnd{sphere_area(n.at("radius").positive())};
  }
  n.at("type").fail("unknown end condition '" + type + "'");
}

inline std::function<double(double)> parse_radius(const Node& n, double length) {
  if (n.json().is_number()) {
    const double a = n.positive();
    return [a](double) { return a; };
  }
  n.allow_only({"left", "right"});
  const double a0 = n.at("left").positive(), a1 = n.at("right").positive();
  return [a0, a1, length](double x) { return a0 + (a1 - a0) * x / length; };
}

inline void parse_topology(const Node& n, int points, ExperimentConfig& cfg) {
  cfg.topology_kind = n.at("kind").string();
  if (cfg.topology_kind == "cable_soma") {
    n.allow_only({"kind", "length", "radius", "soma_radius"});
    BranchSpec b;
    b.name = "cable";
    b.length = n.positive_or("length", 0.05);
    b.n_points = points;
    const double a = n.positive_or("radius", 0.476e-3);
    b.radius = [a](double) { return a; };
    b.left = SealedEnd{};
    b.right = SomaEnd{sphere_area(n.positive_or("soma_radius", 2e-3))};
    cfg.topology.add_branch(std::move(b));
  } else if (cfg.topology_kind == "rallpack_tree") {
    n.allow_only({"kind", "soma_radius", "levels"});
    auto levels = rallpack_levels();
    if (n.has("levels")) {
      const auto ls = n.at("levels");
      levels.clear();
      for (std::size_t i = 0; i < ls.size(); ++i) {
        const auto l = ls.at(i);
        l.allow_only({"count", "length", "radius"});
        levels.push_back({l.at("count").integer(), l.at("length").positive(), l.at("radius").positive()});
      }
    }
    try {
      auto tree = build_rallpack_tree(levels, points, sphere_area(n.at("soma_radius").positive()));
      cfg.topology = std::move(tree.topology);
      cfg.leaves = std::move(tree.leaves);
    } catch (const ConfigError& e) {
      n.fail(e.what());
    }
  } else if (cfg.topology_kind == "explicit") {
    n.allow_only({"kind", "branches"});
    const auto bs = n.at("branches");
    for (std::size_t i = 0; i < bs.size(); ++i) {
      const auto bn = bs.at(i);
      bn.allow_only({"name", "length", "radius", "left", "right"});
      BranchSpec b;
      b.name = bn.string_or("name", "b" + std::to_string(i));
      b.length = bn.at("length").positive();
      b.n_points = points;
      b.radius = parse_radius(bn.at("radius"), b.length);
      b.left = bn.has("left") ? parse_condition(bn.at("left")) : SealedEnd{};
      b.right = bn.has("right") ? parse_condition(bn.at("right")) : SealedEnd{};
      cfg.topology.add_branch(std::move(b));
    }
  } else {
    n.at("kind").fail("unknown topology kind '" + cfg.topology_kind +
                      "' (expected cable_soma, rallpack_tree or explicit)");
  }
  try {
    cfg.topology.validate();
  } catch (const ConfigError& e) {
    n.fail(e.what());
  }
}

inline int parse_branch(const Node& n, const ExperimentConfig& cfg) {
  const int count = static_cast<int>(cfg.topology.branches.size());
  if (n.json().is_string()) {
    const auto name = n.string();
    for (int b = 0; b < count; ++b) {
      if (cfg.topology.branches[b].name == name) return b;
    }
    n.fail("no branch named '" + name + "'");
  }
  const int b = n.integer();
  if (b < 0 || b >= count) n.fail("branch index out of range");
  return b;
}

inline AmplitudeUnit parse_unit(const Node& n) {
  const auto s = n.string();
  if (s == "A") return AmplitudeUnit::Current;
  if (s == "A/m^2") return AmplitudeUnit::Density;
  n.fail("expected unit 'A' or 'A/m^2'");
}

inline void parse_profile(const Node& n, const ExperimentConfig& cfg, StimulusEvent& e) {
  const auto kind = n.string_or("profile", "end_node");
  const double length = cfg.topology.branches[e.branch].length;
  if (kind == "end_node") {
    e.profile = ProfileKind::EndNode;
    e.end = n.has("end") ? parse_end(n.at("end")) : End::Left;
  } else if (kind == "gaussian") {
    e.profile = ProfileKind::Gaussian;
    e.center = n.number_or("center", 0.0);
    e.std = n.positive_or("std", length / 20.0);
    if (e.center < 0.0 || e.center > length) n.at("center").fail("outside the branch");
  } else {
    n.at("profile").fail("unknown profile '" + kind + "' (expected end_node or gaussian)");
  }
}

inline void parse_stimulus(const Node& n, ExperimentConfig& cfg) {
  n.allow_only({"events", "trains"});
  if (n.has("events")) {
    const auto evs = n.at("events");
    for (std::size_t i = 0; i < evs.size(); ++i) {
      const auto en = evs.at(i);
      en.allow_only({"branch", "profile", "end", "center", "std", "amplitude", "unit", "t_on", "t_off"});
      StimulusEvent e;
      e.branch = parse_branch(en.at("branch"), cfg);
      parse_profile(en, cfg, e);
      e.amplitude = en.at("amplitude").number();
      e.unit = en.has("unit") ? parse_unit(en.at("unit")) : AmplitudeUnit::Current;
      e.t_on = en.at("t_on").number();
      e.t_off = en.at("t_off").number();
      if (!(e.t_on < e.t_off)) en.fail("needs t_on < t_off");
      cfg.stimulus.events.push_back(e);
    }
  }
  if (n.has("trains")) {
    const auto trs = n.at("trains");
    for (std::size_t i = 0; i < trs.size(); ++i) {
      const auto tn = trs.at(i);
      tn.allow_only({"branches", "onsets", "duration", "profile", "end", "center", "std", "amplitude", "unit"});
      std::vector<int> branches;
      const auto bn = tn.at("branches");
      if (bn.json().is_string() && bn.string() == "leaves") {
        if (cfg.leaves.empty()) bn.fail("'leaves' needs a rallpack_tree topology");
        branches = cfg.leaves;
      } else {
        for (std::size_t k = 0; k < bn.size(); ++k) branches.push_back(parse_branch(bn.at(k), cfg));
      }
      if (branches.empty()) bn.fail("needs at least one branch");
      const auto on = tn.at("onsets");
      const double duration = tn.at("duration").positive();
      for (std::size_t k = 0; k < on.size(); ++k) {
        StimulusEvent e;
        e.branch = branches[k % branches.size()];
        parse_profile(tn, cfg, e);
        e.amplitude = tn.at("amplitude").number();
        e.unit = tn.has("unit") ? parse_unit(tn.at("unit")) : AmplitudeUnit::Current;
        e.t_on = on.at(k).number();
        e.t_off = e.t_on + duration;
        cfg.stimulus.events.push_back(e);
      }
    }
  }
}

inline void parse_probes(const Node& n, ExperimentConfig& cfg) {
  for (std::size_t i = 0; i < n.size(); ++i) {
    const auto pn = n.at(i);
    pn.allow_only({"label", "at", "branch", "end", "x", "node"});
    ProbeSpec p;
    p.label = pn.at("label").string();
    for (const auto& q : cfg.probes) {
      if (q.label == p.label) pn.at("label").fail("duplicate probe label '" + p.label + "'");
    }
    if (pn.has("at")) {
      if (pn.at("at").string() != "soma") pn.at("at").fail("only 'soma' is a named location");
      if (!cfg.topology.soma()) pn.at("at").fail("topology has no soma");
      p.soma = true;
    } else {
      p.branch = parse_branch(pn.at("branch"), cfg);
      const int given = int(pn.has("end")) + int(pn.has("x")) + int(pn.has("node"));
      if (given != 1) pn.fail("give exactly one of 'end', 'x' or 'node'");
      if (pn.has("end")) p.end = parse_end(pn.at("end"));
      if (pn.has("x")) {
        p.x = pn.at("x").number();
        if (*p.x < 0.0 || *p.x > cfg.topology.branches[p.branch].length) pn.at("x").fail("outside the branch");
      }
      if (pn.has("node")) {
        p.node = pn.at("node").integer();
        if (*p.node < 0 || *p.node > cfg.intervals) pn.at("node").fail("node index out of range");
      }
    }
    cfg.probes.push_back(p);
  }
}

inline void parse_outputs(const Node& n, ExperimentConfig& cfg) {
  n.allow_only({"traces", "energy", "spikes"});
  auto& o = cfg.outputs;
  o.traces = n.boolean_or("traces", true);
  o.energy = n.boolean_or("energy", true);
  if (!n.has("spikes")) return;
  const auto s = n.at("spikes");
  if (s.json().is_boolean()) {
    o.spikes = s.boolean();
    return;
  }
  s.allow_only({"threshold", "refractory", "threshold_band", "bump_floor", "propagation"});
  o.spike.options.threshold = s.positive_or("threshold", o.spike.options.threshold);
  o.spike.bump_floor = s.positive_or("bump_floor", o.spike.bump_floor);
  o.spike.options.refractory = s.positive_or("refractory", o.spike.options.refractory);
  if (s.has("threshold_band")) {
    const auto b = s.at("threshold_band");
    if (b.size() != 2) b.fail("expected [low, high]");
    o.spike.band_low = b.at(0).positive();
    o.spike.band_high = b.at(1).positive();
    if (!(o.spike.band_low <= o.spike.band_high)) b.fail("needs low <= high");
  }
  if (s.has("propagation")) {
    const auto ps = s.at("propagation");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const auto pair = ps.at(i);
      if (pair.size() != 2) pair.fail("expected [injection probe, downstream probe]");
      std::pair<std::string, std::string> p{pair.at(0).string(), pair.at(1).string()};
      for (const auto* label : {&p.first, &p.second}) {
        bool found = false;
        for (const auto& q : cfg.probes) found = found || q.label == *label;
        if (!found) pair.fail("unknown probe '" + *label + "'");
      }
      o.spike.propagation.push_back(p);
    }
  }
}

}  // namespace detail

inline ExperimentConfig parse_experiment(const Json& j) {
  using detail::Node;
  const Node root(j, "");
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  root.allow_only({"name", "constants", "topology", "discretization", "time", "stimulus", "probes", "outputs"});
  ExperimentConfig cfg;
  cfg.source = j;
  cfg.name = root.string_or("name", cfg.name);
  if (root.has("constants")) cfg.constants = detail::parse_constants(root.at("constants"));

  const auto disc = root.at("discretization");
  disc.allow_only({"order", "N"});
  cfg.order = disc.at("order").integer();
  if (cfg.order < 2 || cfg.order > 5) disc.at("order").fail("supported orders are 2, 3, 4 and 5");
  cfg.intervals = disc.at("N").integer();
  if (cfg.intervals + 1 < minimum_points(cfg.order)) {
    disc.at("N").fail("order " + std::to_string(cfg.order) + " needs at least " +
                      std::to_string(minimum_points(cfg.order)) + " points per branch");
  }
  detail::parse_topology(root.at("topology"), cfg.intervals + 1, cfg);

  const auto t = root.at("time");
  t.allow_only({"scheme", "dt", "t0", "t_end", "record_every", "check_gating", "gate_rule", "damp_breakpoints",
                "frozen_factorization"});
  try {
    cfg.time.scheme = parse_scheme(t.string_or("scheme", "hines"));
  } catch (const ConfigError& e) {
    t.at("scheme").fail(e.what());
  }
  cfg.time.dt = t.at("dt").positive();
  cfg.time.t0 = t.number_or("t0", 0.0);
  cfg.time.t_end = t.at("t_end").number();
  if (!(cfg.time.t_end > cfg.time.t0)) t.at("t_end").fail("must exceed t0");
  cfg.time.record_every = t.integer_or("record_every", 1);
  if (cfg.time.record_every < 1) t.at("record_every").fail("must be at least 1");
  cfg.time.check_gating = t.boolean_or("check_gating", true);
  const auto rule = t.string_or("gate_rule", "guarded");
  if (rule == "guarded") {
    cfg.time.hines.gate_rule = GateRule::Guarded;
  } else if (rule == "trapezoidal") {
    cfg.time.hines.gate_rule = GateRule::Trapezoidal;
  } else {
    t.at("gate_rule").fail("expected 'guarded' or 'trapezoidal'");
  }
  cfg.time.hines.damp_breakpoints = t.boolean_or("damp_breakpoints", true);
  cfg.time.hines.frozen_factorization = t.boolean_or("frozen_factorization", false);

  if (root.has("stimulus")) detail::parse_stimulus(root.at("stimulus"), cfg);
  if (root.has("probes")) detail::parse_probes(root.at("probes"), cfg);
  if (root.has("outputs")) detail::parse_outputs(root.at("outputs"), cfg);
  return cfg;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open file");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline ExperimentConfig load_experiment(const std::string& path) { return parse_experiment(read_json_file(path)); }

/// FNV-1a 64 of the canonical (key-sorted, compact) serialization.
inline std::string config_hash(const Json& j) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace hhsbp
