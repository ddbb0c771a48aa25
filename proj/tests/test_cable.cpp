#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hhsbp/network.hpp"
#include "hhsbp/topology.hpp"

using namespace hhsbp;

namespace {

constexpr double kA0 = 0.476e-3;
constexpr double kL = 0.05;

TreeTopology cable_soma(int n_points) {
  TreeTopology t;
  t.add_branch({"cable", kL, n_points, [](double) { return kA0; }, SealedEnd{},
                SomaEnd{4.0 * std::numbers::pi * 4e-6}});
  return t;
}

TreeTopology junction3(int n_points) {
  TreeTopology t;
  const double a3 = std::pow(2.0, 2.0 / 3.0) * kA0;
  t.add_branch({"b1", kL, n_points, [](double) { return kA0; }, JunctionMember{0}, SealedEnd{}});
  t.add_branch({"b2", kL, n_points, [](double) { return kA0; }, JunctionMember{0}, SealedEnd{}});
  t.add_branch({"b3", std::cbrt(2.0) * kL, n_points, [a3](double) { return a3; }, JunctionMember{0},
                VoltageClamp{[](double t) { return std::exp(-1e5 * t); }}});
  return t;
}

// Tapered branches, junctions at both ends of the middle branch, soma on the right.
TreeTopology mixed(int n_points) {
  TreeTopology t;
  auto taper = [](double a0, double a1, double len) {
    return [=](double x) { return a0 + (a1 - a0) * x / len; };
  };
  t.add_branch({"distal_a", 2e-3, n_points, taper(1.0e-6, 1.5e-6, 2e-3), SealedEnd{}, JunctionMember{1}});
  t.add_branch({"distal_b", 1e-3, n_points, taper(1.2e-6, 1.2e-6, 1e-3), VoltageClamp{}, JunctionMember{1}});
  t.add_branch({"middle", 3e-3, n_points, taper(2.0e-6, 3.0e-6, 3e-3), JunctionMember{1}, JunctionMember{0}});
  t.add_branch({"side", 1e-3, n_points, taper(1.0e-6, 1.0e-6, 1e-3), SealedEnd{}, JunctionMember{0}});
  t.add_branch({"root", 4e-3, n_points, taper(4.0e-6, 3.5e-6, 4e-3), JunctionMember{0}, SomaEnd{1e-9}});
  return t;
}

// Random in-range state: |u| <= 0.12 V and gating in [0, 1].
NetworkState random_state(const CableNetwork& net, std::mt19937& rng) {
  std::uniform_real_distribution<double> du(-0.12, 0.12), dw(0.0, 1.0);
  auto s = resting_state(net);
  for (int i = 0; i < net.total_nodes(); ++i) {
    s.u[i] = du(rng);
    s.m[i] = dw(rng);
    s.h[i] = dw(rng);
    s.n[i] = dw(rng);
  }
  return s;
}

}  // namespace

TEST(Sat, CoefficientsFollowTheOutwardNormal) {
  const HHConstants k;
  EXPECT_DOUBLE_EQ(SatCoefficients::boundary(k, 2.0, End::Left), k.mu() * 4.0);
  EXPECT_DOUBLE_EQ(SatCoefficients::boundary(k, 2.0, End::Right), -k.mu() * 4.0);
  EXPECT_DOUBLE_EQ(SatCoefficients::soma(k, 5.0), -k.mu() / 5.0);
  EXPECT_DOUBLE_EQ(SatCoefficients::junction_flux(k, 3), k.mu() / 3.0);
  EXPECT_DOUBLE_EQ(SatCoefficients::junction_continuity(k, 3, 2.0), k.mu() * 4.0 / 3.0);
}

TEST(Sat, SealedPenaltyVanishesForZeroFluxData) {
  const HHConstants k;
  const auto geo = BranchGeometry::uniform(1.0, 41, 1e-3);
  for (int order : {2, 3, 4, 5}) {
    const auto ops = build_sbp(order, geo.grid);
    // cos(pi x) has zero slope at both ends; the penalty is proportional to the discrete slope.
    Vector u(41);
    for (int i = 0; i < 41; ++i) u[i] = std::cos(std::numbers::pi * geo.grid.x(i));
    const Vector pen = sat_sealed(k, geo, ops, u, End::Left);
    const double scale = k.mu() * 1e-3 * std::numbers::pi / ops.norm()[0];
    EXPECT_LT(std::abs(pen[0]) / scale, 0.05) << order;
    EXPECT_EQ(pen.tail(40).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Sat, ClampPenaltyIsZeroWhenDataIsMatched) {
  const HHConstants k;
  const auto geo = BranchGeometry::uniform(1.0, 30, 1e-3);
  const auto ops = build_sbp(4, geo.grid);
  Vector u = Vector::LinSpaced(30, 0.2, -0.3);
  EXPECT_EQ(sat_clamp(k, geo, ops, u, End::Right, -0.3).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(sat_clamp(k, geo, ops, u, End::Right, 0.0).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Sat, JunctionPenaltyZeroForConsistentData) {
  // Linear profiles meeting at x = 0 with equal potential and balanced a^2 u_x.
  const HHConstants k;
  const double a1 = 1e-3, a2 = 2e-3;
  const auto g1 = BranchGeometry::uniform(1.0, 25, a1);
  const auto g2 = BranchGeometry::uniform(2.0, 25, a2);
  for (int order : {2, 3, 4, 5}) {
    const auto o1 = build_sbp(order, g1.grid);
    const auto o2 = build_sbp(order, g2.grid);
    Vector u1(25), u2(25);
    const double s1 = 1.0, s2 = -s1 * a1 * a1 / (a2 * a2);
    for (int i = 0; i < 25; ++i) {
      u1[i] = 0.3 + s1 * g1.grid.x(i);
      u2[i] = 0.3 + s2 * g2.grid.x(i);
    }
    const auto pens = sat_junction(k, {{&g1, &o1, &u1, End::Left}, {&g2, &o2, &u2, End::Left}});
    EXPECT_LT(pens[0].cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT(pens[1].cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Sat, JunctionNeedsTwoMembers) {
  const HHConstants k;
  const auto g = BranchGeometry::uniform(1.0, 10, 1e-3);
  const auto o = build_sbp(2, g.grid);
  Vector u = Vector::Zero(10);
  EXPECT_THROW(sat_junction(k, {{&g, &o, &u, End::Left}}), ConfigError);
}

TEST(Cable, InteriorOperatorReproducesSecondDerivativeOfTaperedCable) {
  // (a^2 u_x)_x / a for a = 1 + x, u = x^2: (2 (1+x)^2 x)' / (1+x) = 2 (1+x) + 4 x.
  HHConstants k;
  const auto geo = BranchGeometry::sampled(1.0, 101, [](double x) { return 1.0 + x; });
  const auto ops = build_sbp(5, geo.grid);
  Vector u(101);
  for (int i = 0; i < 101; ++i) u[i] = geo.grid.x(i) * geo.grid.x(i);
  const Vector zero = Vector::Zero(101);
  const Vector r = cable_interior_rhs(k, geo, ops, u, zero, zero) / k.mu();
  for (int i = 0; i < 101; ++i) {
    const double x = geo.grid.x(i);
    EXPECT_NEAR(r[i], 2.0 * (1.0 + x) + 4.0 * x, 1e-8) << i;
  }
}

TEST(Cable, ReactionTermsEnterPointwise) {
  HHConstants k;
  const auto geo = BranchGeometry::uniform(1.0, 20, 1e-3);
  const auto ops = build_sbp(3, geo.grid);
  const Vector u = Vector::Constant(20, 0.01);
  const Vector g = Vector::Constant(20, 100.0);
  const Vector f = Vector::Constant(20, 2.0);
  const Vector r = cable_interior_rhs(k, geo, ops, u, g, f);
  EXPECT_NEAR(r[7], (2.0 - 100.0 * 0.01) / k.C_m, 1e-9);
  EXPECT_THROW(cable_interior_rhs(k, geo, ops, Vector::Zero(19), g, f), DimensionError);
}

TEST(Topology, RallpackTreeShape) {
  const auto tree = build_rallpack_tree(rallpack_levels(), 31, 1e-9);
  EXPECT_EQ(tree.topology.branches.size(), 15u);
  EXPECT_EQ(tree.leaves.size(), 8u);
  const auto js = tree.topology.junctions();
  EXPECT_EQ(js.size(), 7u);
  for (const auto& [id, members] : js) EXPECT_EQ(members.size(), 3u) << id;
  ASSERT_TRUE(tree.topology.soma().has_value());
  EXPECT_EQ(tree.topology.soma()->branch, 0);
  EXPECT_TRUE(tree.warnings.empty());
}

TEST(Topology, RallThreeHalvesLawOnTableRadii) {
  const auto checks = rall_three_halves(rallpack_levels());
  ASSERT_EQ(checks.size(), 3u);
  EXPECT_NEAR(std::pow(8.0, 1.5), 22.627, 1e-3);
  EXPECT_NEAR(2.0 * std::pow(5.04, 1.5), 22.630, 1e-3);
  EXPECT_LT(checks[0].relative_mismatch, 1e-3);
  for (const auto& c : checks) EXPECT_LT(c.relative_mismatch, 1e-2) << c.level;
}

TEST(Topology, SingleLevelTreeIsOneCable) {
  const auto tree = build_rallpack_tree({{1, 1e-4, 1e-6}}, 20, 1e-9);
  EXPECT_EQ(tree.topology.branches.size(), 1u);
  EXPECT_TRUE(tree.topology.junctions().empty());
  EXPECT_TRUE(std::holds_alternative<SealedEnd>(tree.topology.branches[0].left));
}

TEST(Topology, ThreeHalvesViolationWarnsButBuilds) {
  auto levels = rallpack_levels();
  levels[1].radius *= 1.2;
  const auto tree = build_rallpack_tree(levels, 20, 1e-9);
  EXPECT_FALSE(tree.warnings.empty());
}

TEST(Topology, RejectsNonBinaryCounts) {
  auto levels = rallpack_levels();
  levels[2].count = 3;
  EXPECT_THROW(build_rallpack_tree(levels, 20, 1e-9), ConfigError);
}

TEST(Topology, ValidationCatchesBrokenGraphs) {
  TreeTopology dangling;
  dangling.add_branch({"a", 1.0, 10, [](double) { return 1e-3; }, JunctionMember{4}, SealedEnd{}});
  EXPECT_THROW(dangling.validate(), ConfigError);

  TreeTopology cycle;
  cycle.add_branch({"a", 1.0, 10, [](double) { return 1e-3; }, JunctionMember{0}, JunctionMember{1}});
  cycle.add_branch({"b", 1.0, 10, [](double) { return 1e-3; }, JunctionMember{0}, JunctionMember{1}});
  EXPECT_THROW(cycle.validate(), ConfigError);

  TreeTopology split;
  split.add_branch({"a", 1.0, 10, [](double) { return 1e-3; }, SealedEnd{}, SealedEnd{}});
  split.add_branch({"b", 1.0, 10, [](double) { return 1e-3; }, SealedEnd{}, SealedEnd{}});
  EXPECT_THROW(split.validate(), ConfigError);

  TreeTopology two_somas;
  two_somas.add_branch({"a", 1.0, 10, [](double) { return 1e-3; }, SomaEnd{1e-6}, SomaEnd{1e-6}});
  EXPECT_THROW(two_somas.validate(), ConfigError);
}

TEST(Network, ConstantPotentialIsSteadyWithoutReaction) {
  const HHConstants k;
  for (int order : {2, 3, 4, 5}) {
    TreeTopology t = mixed(20);
    std::get<VoltageClamp>(t.branches[1].left).u0 = [](double) { return 0.07; };
    const CableNetwork net(k, t, order);
    const Vector zero = Vector::Zero(net.total_nodes());
    const Vector u = Vector::Constant(net.total_nodes(), 0.07);
    EXPECT_LT(net.potential_rhs(u, zero, zero, 0.0).cwiseAbs().maxCoeff(), 1e-6) << order;
  }
}

TEST(Network, ChargeIsConservedWithSealedEndsAndNoReaction) {
  // d/dt sum_b 1^T P A u + (mu/eta) u_soma = 0 when only sealed, junction and soma ends are present.
  const HHConstants k;
  std::mt19937 rng(3);
  for (int order : {2, 3, 4, 5}) {
    TreeTopology t = mixed(24);
    t.branches[1].left = SealedEnd{};
    const CableNetwork net(k, t, order);
    const auto s = random_state(net, rng);
    const Vector zero = Vector::Zero(net.total_nodes());
    const Vector du = net.potential_rhs(s.u, zero, zero, 0.0);
    double rate = 0.0, scale = 0.0;
    for (int b = 0; b < net.branch_count(); ++b) {
      const auto w = net.ops(b).norm().cwiseProduct(net.geometry(b).radius);
      rate += w.dot(du.segment(net.offset(b), net.size(b)));
      scale += w.cwiseAbs().dot(du.segment(net.offset(b), net.size(b)).cwiseAbs());
    }
    rate += k.mu() / net.soma_eta() * du[net.soma_index()];
    EXPECT_LT(std::abs(rate), 1e-12 * scale) << order;
  }
}

class EnergyIdentity : public ::testing::TestWithParam<int> {};

TEST_P(EnergyIdentity, HoldsForRandomStates) {
  const int order = GetParam();
  const HHConstants k;
  std::mt19937 rng(11 + order);
  for (auto make : {&cable_soma, &junction3, &mixed}) {
    const CableNetwork net(k, make(33), order);
    for (int trial = 0; trial < 20; ++trial) {
      const auto s = random_state(net, rng);
      const auto r = energy_rate_residual(net, s);
      EXPECT_LE(std::abs(r.residual), 1e-10 * r.scale());
      EXPECT_LE(r.rate, 1e-10 * r.scale());  // energy never grows
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Orders, EnergyIdentity, ::testing::Values(2, 3, 4, 5));

TEST(Energy, RejectsForcedProblems) {
  const HHConstants k;
  const CableNetwork net(k, cable_soma(20), 2);
  ExternalInputs in;
  in.injected_current = [](double, Vector& d) { d[0] += 1.0; };
  EXPECT_THROW(energy_rate_residual(net, resting_state(net), in), ContractError);
}

TEST(Network, SomaMassAndEnergyWeights) {
  const HHConstants k;
  const CableNetwork net(k, cable_soma(17), 5);
  const int s = net.soma_index();
  EXPECT_EQ(s, 16);
  const double eta = std::numbers::pi / (4.0 * std::numbers::pi * 4e-6 * k.R_i * k.C_m);
  EXPECT_NEAR(net.soma_eta(), eta, 1e-6 * eta);
  EXPECT_NEAR(net.mass()[s], kA0 + k.mu() / (eta * net.ops(0).norm()[16]), 1e-15);
  Vector u = Vector::Zero(17);
  u[s] = 2.0;
  const double e = discrete_energy(net, u);
  EXPECT_NEAR(e, 4.0 * net.ops(0).norm()[16] * kA0 + k.mu() / eta * 4.0, 1e-18);
}

TEST(Network, SomaNodeFollowsTheSomaEquationForUniformPotential) {
  // Uniform u has zero slope, so the soma node obeys u_t = (f - g u) / C_m exactly.
  const HHConstants k;
  const CableNetwork net(k, cable_soma(20), 3);
  const Vector u = Vector::Constant(20, 0.02);
  const Vector g = Vector::Constant(20, 50.0);
  const Vector f = Vector::Constant(20, 3.0);
  const Vector du = net.potential_rhs(u, g, f, 0.0);
  EXPECT_NEAR(du[19], (3.0 - 50.0 * 0.02) / k.C_m, 1e-9);
  EXPECT_NEAR(du[5], (3.0 - 50.0 * 0.02) / k.C_m, 1e-9);
}
