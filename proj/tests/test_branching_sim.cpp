#include <gtest/gtest.h>

#include <cmath>

#include "blp/branching_sim.hpp"

using blp::BranchingMeasure;
using blp::BranchingTriplet;
using blp::PointSequence;

namespace {

// Column k holds f(trajectory)[k] across replicas.
std::vector<std::vector<double>> sample(const BranchingTriplet& t, const blp::SimOptions& opt, std::size_t n,
                                        std::uint64_t seed,
                                        const std::function<std::vector<double>(const blp::PopulationTrajectory&)>& f) {
  auto rows = blp::run_replicas<std::vector<double>>(n, seed, [&](std::size_t, blp::Rng& rng) {
    return f(blp::simulate_population(t, opt, rng));
  });
  std::vector<std::vector<double>> cols(rows.front().size());
  for (const auto& r : rows)
    for (std::size_t k = 0; k < r.size(); ++k) cols[k].push_back(r[k]);
  return cols;
}

}  // namespace

TEST(Population, NoBranchingSingleParticle) {
  BranchingTriplet t{1.0, 0.0, BranchingMeasure()};
  blp::SimOptions opt;
  opt.T = 2.0;
  opt.dt = 0.01;
  blp::Rng rng(1);
  auto tr = blp::simulate_population(t, opt, rng);
  EXPECT_EQ(tr.particles.size(), 1u);
  EXPECT_EQ(tr.event_count, 0u);
  ASSERT_EQ(tr.snapshots.size(), 1u);
  EXPECT_EQ(tr.snapshots[0].x.size(), 1u);
  EXPECT_LE(tr.snapshots[0].ancestral_min[0], std::min(0.0, tr.snapshots[0].x[0]));
}

TEST(Population, BinaryMeanGrowth) {
  // Binary splitting at rate 1/2: E N_1 = e^{1/2}.
  BranchingTriplet t{1.0, 0.0, BranchingMeasure({{0.5, PointSequence::canonicalize({0, 0})}})};
  blp::SimOptions opt;
  opt.dt = 0.01;
  auto cols = sample(t, opt, 20000, 2, [](const auto& tr) { return blp::population_size(tr); });
  EXPECT_TRUE(blp::summarize(cols[0], std::exp(0.5)).within(3.0));
}

TEST(Population, Deterministic) {
  auto t = blp::presets::compound_poisson_walk();
  blp::SimOptions opt;
  opt.observe = {0.5, 1.0};
  blp::Rng a(42), b(42);
  auto x = blp::simulate_population(t, opt, a);
  auto y = blp::simulate_population(t, opt, b);
  ASSERT_EQ(x.snapshots.size(), y.snapshots.size());
  for (std::size_t k = 0; k < x.snapshots.size(); ++k) {
    EXPECT_EQ(x.snapshots[k].x, y.snapshots[k].x);
    EXPECT_EQ(x.snapshots[k].id, y.snapshots[k].id);
  }
  EXPECT_EQ(x.event_count, y.event_count);
}

TEST(Population, ParentJumpsAndChildrenOffsets) {
  // Deterministic motion, one atom (-1, 2): after each event the parent sits
  // one unit lower and a child is born two units above the pre-jump position.
  BranchingTriplet t{0.0, 0.0, BranchingMeasure({{1.0, PointSequence::canonicalize({-1.0, 2.0})}})};
  blp::SimOptions opt;
  opt.T = 0.5;
  opt.dt = 0.01;
  blp::Rng rng(3);
  auto tr = blp::simulate_population(t, opt, rng);
  const auto& s = tr.snapshots.back();
  for (std::size_t i = 0; i < s.x.size(); ++i) EXPECT_NEAR(s.x[i], std::round(s.x[i]), 1e-12);
  for (const auto& e : tr.events) EXPECT_NEAR(e.pre_position, std::round(e.pre_position), 1e-12);
}

TEST(Martingales, AtTimeZero) {
  auto t = blp::presets::boundary_bbm();
  blp::SimOptions opt;
  opt.observe = {0.0, 1.0};
  blp::Rng rng(4);
  auto tr = blp::simulate_population(t, opt, rng);
  ASSERT_EQ(tr.snapshots.front().t, 0.0);
  EXPECT_EQ(blp::additive_martingale(tr, 1.0, 0.0).front(), 1.0);
  EXPECT_EQ(blp::derivative_martingale(tr).front(), 0.0);
  auto R = blp::RenewalModel::brownian();
  EXPECT_EQ(blp::truncated_martingale(tr, R, 1.0).front(), 1.0);
  EXPECT_THROW(blp::truncated_martingale(tr, R, 0.0), blp::Error);
}

TEST(Martingales, BrownianWithNegativeKappa) {
  BranchingTriplet t{1.0, 1.0, BranchingMeasure()};
  const double k = blp::kappa(t, 1.0);
  ASSERT_NEAR(k, -0.5, 1e-15);
  blp::SimOptions opt;
  opt.dt = 0.01;
  auto cols = sample(t, opt, 20000, 5, [&](const auto& tr) { return blp::additive_martingale(tr, 1.0, k); });
  EXPECT_TRUE(blp::summarize(cols[0], 1.0).within(3.0));
}

TEST(Martingales, MeansOnBoundaryBbm) {
  auto t = blp::presets::boundary_bbm();
  auto R = blp::RenewalModel::brownian();
  blp::SimOptions opt;
  opt.observe = {0.5, 1.0};
  opt.dt = 0.005;
  auto W = sample(t, opt, 4000, 6, [](const auto& tr) { return blp::additive_martingale(tr, 1.0, 0.0); });
  auto Z = sample(t, opt, 4000, 7, [](const auto& tr) { return blp::derivative_martingale(tr); });
  for (std::size_t k = 0; k < 2; ++k) {
    EXPECT_TRUE(blp::summarize(W[k], 1.0).within(3.0)) << k;
    EXPECT_TRUE(blp::summarize(Z[k], 0.0).within(3.0)) << k;
  }
  for (double b : {0.5, 1.0, 2.0}) {
    auto Zb = sample(t, opt, 4000, 8, [&](const auto& tr) { return blp::truncated_martingale(tr, R, b); });
    EXPECT_TRUE(blp::summarize(Zb[1], b).within(3.0)) << b;
  }
}

TEST(Martingales, TruncatedMonotoneAndNonNegative) {
  auto t = blp::presets::boundary_bbm();
  auto R = blp::RenewalModel::brownian();
  blp::SimOptions opt;
  blp::Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    auto tr = blp::simulate_population(t, opt, rng);
    double prev = 0.0;
    for (double b : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      const double z = blp::truncated_martingale(tr, R, b).back();
      EXPECT_GE(z, 0.0);
      EXPECT_GE(z, prev);
      prev = z;
    }
  }
}

TEST(Genealogy, LabelsAndAncestors) {
  auto t = blp::presets::boundary_bbm();
  blp::SimOptions opt;
  opt.T = 2.0;
  opt.dt = 0.01;
  opt.observe = {1.0, 2.0};
  blp::Rng rng(10);
  blp::PopulationTrajectory tr;
  do tr = blp::simulate_population(t, opt, rng);
  while (tr.snapshots.back().x.size() < 4);
  EXPECT_TRUE(tr.label(0).empty());
  const auto& last = tr.snapshots.back();
  for (std::size_t id : last.id) {
    const auto l = tr.label(id);
    EXPECT_EQ(l.empty(), id == 0);
    for (const auto& [ev, rank] : l) {
      EXPECT_LT(ev, tr.events.size());
      EXPECT_GE(rank, 2u);
    }
    const std::size_t a = tr.ancestor_at(id, 1.0);
    EXPECT_LE(tr.particles[a].birth_time, 1.0);
    ASSERT_TRUE(tr.position_at(id, 1.0).has_value());
    EXPECT_EQ(*tr.position_at(id, 2.0), last.x[static_cast<std::size_t>(
                                             std::find(last.id.begin(), last.id.end(), id) - last.id.begin())]);
  }
}

TEST(Caps, MarkPartial) {
  BranchingTriplet t{1.0, 0.0, BranchingMeasure({{5.0, PointSequence::canonicalize({0, 0, 0})}})};
  blp::SimOptions opt;
  opt.T = 3.0;
  opt.dt = 0.01;
  opt.caps.max_particles = 100;
  blp::Rng rng(11);
  auto tr = blp::simulate_population(t, opt, rng);
  EXPECT_TRUE(tr.partial);
  opt.caps.max_particles = 1000000;
  opt.caps.max_events = 5;
  EXPECT_TRUE(blp::simulate_population(t, opt, rng).partial);
}

TEST(ManyToOne, CountOnBbm) {
  // Binary splitting at rate 1/2, so E N_1 = e^{1/2} on both sides.
  auto r = blp::many_to_one_check(blp::presets::boundary_bbm(), [](double, double) { return 1.0; }, 1.0, 4000, 12,
                                  0.01, std::exp(0.5));
  EXPECT_TRUE(r.comparison.left.within(3.0));
  EXPECT_TRUE(r.comparison.right.within(3.0));
  EXPECT_TRUE(r.comparison.within(3.0));
  EXPECT_EQ(r.partial_fraction, 0.0);
}

TEST(ManyToOne, MinimumIndicatorOnCompoundPoissonWalk) {
  auto r = blp::many_to_one_check(blp::presets::compound_poisson_walk(),
                                  [](double, double m) { return m > -1.0 ? 1.0 : 0.0; }, 1.0, 4000, 13, 0.01);
  EXPECT_TRUE(r.comparison.within(3.0)) << r.comparison.z;
}
