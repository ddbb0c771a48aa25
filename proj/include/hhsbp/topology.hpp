#pragma once

// Branch/junction graph of a neuron and the Rallpack-style binary tree builder.

#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "hhsbp/cable.hpp"
#include "hhsbp/error.hpp"

namespace hhsbp {

struct EndRef {
  int branch = 0;
  End end = End::Left;

  bool operator==(const EndRef&) const = default;
};

struct BranchSpec {
  std::string name;
  double length = 0.0;
  int n_points = 0;
  std::function<double(double)> radius;
  BoundaryCondition left = SealedEnd{};
  BoundaryCondition right = SealedEnd{};

  const BoundaryCondition& at(End e) const { return e == End::Left ? left : right; }
  BranchGeometry geometry() const { return BranchGeometry::sampled(length, n_points, radius); }
};

class TreeTopology {
 public:
  std::vector<BranchSpec> branches;

  int add_branch(BranchSpec b) {
    branches.push_back(std::move(b));
    return static_cast<int>(branches.size()) - 1;
  }

  /// Members of each junction id, in branch order.
  std::map<int, std::vector<EndRef>> junctions() const {
    std::map<int, std::vector<EndRef>> out;
    for (int b = 0; b < static_cast<int>(branches.size()); ++b) {
      for (End e : {End::Left, End::Right}) {
        if (const auto* j = std::get_if<JunctionMember>(&branches[b].at(e))) out[j->junction].push_back({b, e});
      }
    }
    return out;
  }

  std::optional<EndRef> soma() const {
    for (int b = 0; b < static_cast<int>(branches.size()); ++b) {
      for (End e : {End::Left, End::Right}) {
        if (std::holds_alternative<SomaEnd>(branches[b].at(e))) return EndRef{b, e};
      }
    }
    return std::nullopt;
  }

  /// Throws ConfigError unless the branches form one connected tree.
  void validate() const {
    if (branches.empty()) throw ConfigError("topology has no branches");
    int somas = 0;
    for (const auto& b : branches) {
      if (!b.radius) throw ConfigError("branch '" + b.name + "' has no radius profile");
      if (!(b.length > 0.0)) throw ConfigError("branch '" + b.name + "' has non-positive length");
      for (End e : {End::Left, End::Right}) somas += std::holds_alternative<SomaEnd>(b.at(e)) ? 1 : 0;
    }
    if (somas > 1) throw ConfigError("at most one soma attachment is supported");

    const auto js = junctions();
    for (const auto& [id, members] : js) {
      if (members.size() < 2) {
        throw ConfigError("junction " + std::to_string(id) + " has a single member (dangling end)");
      }
    }

    // Union-find over junction vertices and one private vertex per terminal end.
    std::map<int, int> vertex_of_junction;
    int next = 0;
    for (const auto& [id, members] : js) vertex_of_junction[id] = next++;
    auto vertex = [&](int b, End e) {
      if (const auto* j = std::get_if<JunctionMember>(&branches[b].at(e))) return vertex_of_junction[j->junction];
      return -1;
    };
    std::vector<int> endpoints;
    for (int b = 0; b < static_cast<int>(branches.size()); ++b) {
      for (End e : {End::Left, End::Right}) {
        const int v = vertex(b, e);
        endpoints.push_back(v >= 0 ? v : next++);
      }
    }
    std::vector<int> parent(next);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int v) { return parent[v] == v ? v : parent[v] = find(parent[v]); };
    for (int b = 0; b < static_cast<int>(branches.size()); ++b) {
      const int ra = find(endpoints[2 * b]), rb = find(endpoints[2 * b + 1]);
      if (ra == rb) throw ConfigError("topology contains a cycle through branch '" + branches[b].name + "'");
      parent[ra] = rb;
    }
    const int root = find(0);
    for (int v = 0; v < next; ++v) {
      if (find(v) != root) throw ConfigError("topology is not connected");
    }
  }
};

/// One level of a binary dendritic tree.
struct TreeLevel {
  int count = 1;
  double length = 0.0;
  double radius = 0.0;
};

/// Branch dimensions of the 15-branch Rallpack-style tree.
inline std::vector<TreeLevel> rallpack_levels() {
  return {{1, 32.0e-6, 8.0e-6}, {2, 25.4e-6, 5.04e-6}, {4, 20.16e-6, 3.18e-6}, {8, 16.0e-6, 2.0e-6}};
}

struct RallCheck {
  int level = 0;            ///< parent level (1-based)
  double parent_term = 0;   ///< a_parent^{3/2}
  double children_term = 0; ///< sum of a_child^{3/2}
  double relative_mismatch = 0;
};

/// a_parent^{3/2} versus the sum over children, per parent level.
inline std::vector<RallCheck> rall_three_halves(const std::vector<TreeLevel>& levels) {
  std::vector<RallCheck> out;
  for (std::size_t l = 0; l + 1 < levels.size(); ++l) {
    RallCheck c;
    c.level = static_cast<int>(l) + 1;
    c.parent_term = std::pow(levels[l].radius, 1.5);
    c.children_term = (levels[l + 1].count / levels[l].count) * std::pow(levels[l + 1].radius, 1.5);
    c.relative_mismatch = std::abs(c.parent_term - c.children_term) / c.parent_term;
    out.push_back(c);
  }
  return out;
}

struct RallpackTree {
  TreeTopology topology;
  std::vector<int> leaves;          ///< branch ids of the last level, left to right
  std::vector<RallCheck> rall;      ///< per-junction 3/2-law check
  std::vector<std::string> warnings;
};

/// Binary tree with the root branch attached to the soma. Every branch runs
/// from its distal end (x = 0) to its proximal end (x = L); leaf tips are sealed.
inline RallpackTree build_rallpack_tree(const std::vector<TreeLevel>& levels, int n_points,
                                        double soma_area, double rall_tolerance = 0.01) {
  if (levels.empty()) throw ConfigError("tree needs at least one level");
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const int expected = 1 << l;
    if (levels[l].count != expected) {
      throw ConfigError("level " + std::to_string(l + 1) + " must have " + std::to_string(expected) +
                        " branches (binary tree)");
    }
  }
  RallpackTree out;
  out.rall = rall_three_halves(levels);
  for (const auto& c : out.rall) {
    if (c.relative_mismatch > rall_tolerance) {
      out.warnings.push_back("3/2 law mismatch of " + std::to_string(100.0 * c.relative_mismatch) +
                             "% below level " + std::to_string(c.level));
    }
  }
  int next_junction = 0;
  std::vector<int> previous;  // junction ids at the distal ends of the previous level
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const bool last = l + 1 == levels.size();
    std::vector<int> distal;
    for (int k = 0; k < levels[l].count; ++k) {
      BranchSpec b;
      b.name = "L" + std::to_string(l + 1) + "_" + std::to_string(k);
      b.length = levels[l].length;
      b.n_points = n_points;
      b.radius = [a = levels[l].radius](double) { return a; };
      if (l == 0) {
        b.right = SomaEnd{soma_area};
      } else {
        b.right = JunctionMember{previous[k / 2]};
      }
      if (last) {
        b.left = SealedEnd{};
      } else {
        const int j = next_junction++;
        b.left = JunctionMember{j};
        distal.push_back(j);
      }
      const int id = out.topology.add_branch(std::move(b));
      if (last) out.leaves.push_back(id);
    }
    previous = std::move(distal);
  }
  out.topology.validate();
  return out;
}

}  // namespace hhsbp
