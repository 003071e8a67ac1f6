#include <gtest/gtest.h>

#include <cmath>

#include "blp/spine_sim.hpp"

using blp::BranchingMeasure;
using blp::BranchingTriplet;
using blp::PointSequence;

TEST(HatMeasure, Examples) {
  auto h = blp::hat_measure(BranchingMeasure({{0.5, PointSequence::canonicalize({0, 0})}}));
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[0].mass, 0.5);
  EXPECT_EQ(h[1].mass, 0.5);
  EXPECT_EQ(h[0].k, 1u);
  EXPECT_EQ(h[1].k, 2u);
  auto l = blp::hat_measure(BranchingMeasure({{1.0, PointSequence::canonicalize({std::log(2.0)})}}));
  ASSERT_EQ(l.size(), 1u);
  EXPECT_NEAR(l[0].mass, 0.5, 1e-15);
  EXPECT_TRUE(blp::hat_measure(BranchingMeasure()).empty());
  EXPECT_NEAR(blp::hat_mass(BranchingMeasure({{0.5, PointSequence::canonicalize({0, 0})}})), 1.0, 1e-15);
}

TEST(PHat, NoBranchingIsSpineOnly) {
  BranchingTriplet t{1.0, 0.0, BranchingMeasure()};
  blp::SimOptions opt;
  opt.dt = 0.01;
  blp::Rng rng(1);
  auto tr = blp::simulate_P_hat(t, opt, rng);
  EXPECT_EQ(tr.particles.size(), 1u);
  EXPECT_EQ(tr.spine_events, 0u);
  const auto& s = tr.snapshots.back();
  ASSERT_EQ(s.x.size(), 1u);
  EXPECT_EQ(s.spine, s.id[0]);
  EXPECT_EQ(tr.spine_positions.back(), s.x[0]);
}

TEST(PHat, SpineEventRate) {
  // |Lambda-hat| = 1 for the boundary branching Brownian motion.
  auto t = blp::presets::boundary_bbm();
  blp::SimOptions opt;
  opt.dt = 0.01;
  opt.record_events = false;
  auto v = blp::run_replicas<double>(10000, 2, [&](std::size_t, blp::Rng& rng) {
    return static_cast<double>(blp::simulate_P_hat(t, opt, rng).spine_events);
  });
  EXPECT_TRUE(blp::summarize(v, 1.0).within(3.0));
}

TEST(PHat, SpineChildChoice) {
  // Atom (-1, 2): k = 1 carries mass e, k = 2 carries e^{-2}.
  BranchingTriplet t{0.0, 0.0, BranchingMeasure({{1.0, PointSequence::canonicalize({-1.0, 2.0})}})};
  blp::SimOptions opt;
  opt.T = 1.0;
  opt.dt = 0.01;
  std::size_t first = 0, total = 0;
  blp::Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    auto tr = blp::simulate_P_hat(t, opt, rng);
    for (const auto& e : tr.events) {
      if (e.spine_child == 0) continue;
      ++total;
      first += e.spine_child == 1 ? 1 : 0;
    }
  }
  const double p = std::exp(1.0) / (std::exp(1.0) + std::exp(-2.0));
  const double n = static_cast<double>(total);
  EXPECT_NEAR(static_cast<double>(first) / n, p, 3.0 * std::sqrt(p * (1 - p) / n));
}

TEST(PHat, SpinePathFollowsSpine) {
  auto t = blp::presets::boundary_bbm();
  blp::SimOptions opt;
  opt.observe = {0.5, 1.0};
  opt.dt = 0.01;
  blp::Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    auto tr = blp::simulate_P_hat(t, opt, rng);
    auto rec = blp::spine_record(tr);
    EXPECT_EQ(rec.spine_events.size(), tr.spine_events);
    for (const auto& snap : tr.snapshots) {
      auto it = std::find(snap.id.begin(), snap.id.end(), snap.spine);
      ASSERT_NE(it, snap.id.end());
      const auto g = std::find(tr.grid.begin(), tr.grid.end(), snap.t);
      ASSERT_NE(g, tr.grid.end());
      EXPECT_EQ(tr.spine_positions[static_cast<std::size_t>(g - tr.grid.begin())],
                snap.x[static_cast<std::size_t>(it - snap.id.begin())]);
    }
    EXPECT_LE(tr.spine_min, *std::min_element(tr.spine_positions.begin(), tr.spine_positions.end()));
  }
}

TEST(SizeBiased, BoundaryBbm) {
  for (const auto& c : blp::size_biased_checks(blp::presets::boundary_bbm(), 1.0, 2000, 5, 0.01)) {
    EXPECT_TRUE(c.report.within(3.0)) << c.name << " z = " << c.report.z;
  }
}

TEST(SizeBiased, CompoundPoissonWalk) {
  for (const auto& c : blp::size_biased_checks(blp::presets::compound_poisson_walk(), 1.0, 2000, 6, 0.01)) {
    EXPECT_TRUE(c.report.within(3.0)) << c.name << " z = " << c.report.z;
  }
}

TEST(SpineSelection, BoundaryBbm) {
  auto t = blp::presets::boundary_bbm();
  blp::SimOptions opt;
  opt.T = 1.0;
  opt.dt = 0.01;
  opt.record_events = false;
  auto runs = blp::run_replicas<blp::PopulationTrajectory>(4000, 7, [&](std::size_t, blp::Rng& rng) {
    return blp::simulate_P_hat(t, opt, rng);
  });
  blp::Rng rng(8);
  auto r = blp::spine_selection_check(runs, rng);
  EXPECT_EQ(r.runs, 4000u);
  EXPECT_TRUE(r.within(3.0)) << r.z_leftmost << " " << r.z_pit;
}

TEST(SpineSelection, SingleParticle) {
  BranchingTriplet t{1.0, 0.0, BranchingMeasure()};
  blp::SimOptions opt;
  opt.dt = 0.1;
  blp::Rng rng(9);
  std::vector<blp::PopulationTrajectory> runs;
  for (int i = 0; i < 200; ++i) runs.push_back(blp::simulate_P_hat(t, opt, rng));
  auto r = blp::spine_selection_check(runs, rng);
  EXPECT_EQ(r.leftmost_observed, 1.0);
  EXPECT_EQ(r.leftmost_expected, 1.0);
  EXPECT_EQ(r.z_leftmost, 0.0);
  EXPECT_TRUE(r.within(3.0));
}

TEST(Compensator, IndicatorFunctions) {
  // Spine children sit at the parent position, so under Q-hat^b spine events
  // arrive at rate |Lambda-hat| = 1.
  auto t = blp::presets::boundary_bbm();
  auto R = blp::RenewalModel::brownian();
  const double T = 1.0;
  auto one = blp::compensator_check(t, R, 1.0, [](double, const blp::AtomView&, std::size_t) { return 1.0; }, T, 4000,
                                    10, 0.01, T);
  EXPECT_TRUE(one.lhs.within(3.0)) << one.lhs.estimate;
  EXPECT_TRUE(one.rhs.within(3.0)) << one.rhs.estimate;
  EXPECT_TRUE(one.difference.within(3.0));
  auto zero = blp::compensator_check(t, R, 1.0, [](double, const blp::AtomView&, std::size_t) { return 0.0; }, T, 200,
                                     11, 0.01);
  EXPECT_EQ(zero.lhs.estimate, 0.0);
  EXPECT_EQ(zero.rhs.estimate, 0.0);
  auto half = blp::compensator_check(
      t, R, 1.0, [&](double s, const blp::AtomView&, std::size_t) { return s <= T / 2 ? 1.0 : 0.0; }, T, 4000, 12,
      0.01, T / 2);
  EXPECT_TRUE(half.lhs.within(3.0)) << half.lhs.estimate;
  EXPECT_TRUE(half.difference.within(3.0));
}

TEST(Compensator, JumpingChildren) {
  // Children displaced from the parent make the compensator depend on R.
  BranchingTriplet t{1.0, 0.0, BranchingMeasure({{0.5, PointSequence::canonicalize({-0.3, 0.4})}})};
  t = blp::to_boundary_case(t);
  auto law = blp::derive_spine_law(t);
  auto R = blp::renewal_model(law);
  auto r = blp::compensator_check(t, R, 1.0, [](double, const blp::AtomView&, std::size_t k) { return k == 2 ? 1.0 : 0.0; },
                                  1.0, 4000, 13, 0.01);
  EXPECT_TRUE(r.difference.within(3.0)) << r.lhs.estimate << " vs " << r.rhs.estimate;
}

TEST(QHat, BoundaryBbm) {
  auto t = blp::presets::boundary_bbm();
  auto R = blp::RenewalModel::brownian();
  auto q = blp::q_hat_checks(t, R, 1.0, 1.0, 4000, 14, 0.01);
  EXPECT_TRUE(q.weight_mean.within(3.0)) << q.weight_mean.estimate;
  EXPECT_GT(q.ess, 100.0);
  EXPECT_TRUE(q.capped_count.report.within(3.0)) << q.capped_count.report.z;
  EXPECT_TRUE(q.spine_min.report.within(3.0)) << q.spine_min.report.z;
  EXPECT_TRUE(q.spine_end.report.within(3.0)) << q.spine_end.report.z;
  EXPECT_EQ(q.min_level, 0.5);
  EXPECT_EQ(q.exact_min_law, 0.5);
  EXPECT_THROW(blp::q_hat_checks(t, R, 0.0, 1.0, 10, 1), blp::Error);
}
