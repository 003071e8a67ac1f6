#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "blp/io.hpp"
#include "blp/point_sequence.hpp"

using blp::PointSequence;

TEST(PointSequence, CanonicalizeSorts) {
  auto x = PointSequence::canonicalize({0.3, -1.2});
  ASSERT_EQ(x.size(), 2u);
  EXPECT_EQ(x[0], -1.2);
  EXPECT_EQ(x[1], 0.3);
}

TEST(PointSequence, EmptyIsCemetery) {
  auto x = PointSequence::canonicalize(std::span<const double>{});
  EXPECT_TRUE(x.empty());
  EXPECT_EQ(blp::functional_Y(x), 0.0);
  EXPECT_EQ(blp::functional_Ybar(x), 0.0);
}

TEST(PointSequence, DuplicatesKept) {
  auto x = PointSequence::canonicalize({0, 0, 0});
  EXPECT_EQ(x.size(), 3u);
}

TEST(PointSequence, RejectsNonFinite) {
  EXPECT_THROW(PointSequence::canonicalize({1.0, NAN}), blp::Error);
  EXPECT_THROW(PointSequence::canonicalize({INFINITY}), blp::Error);
}

TEST(PointSequence, Translate) {
  EXPECT_EQ(PointSequence::canonicalize({-1, 2}).translate(1), PointSequence::canonicalize({0, 3}));
  EXPECT_TRUE(PointSequence().translate(5).empty());
  EXPECT_EQ(PointSequence::canonicalize({0, 0}).translate(-0.5), PointSequence::canonicalize({-0.5, -0.5}));
}

TEST(Functionals, Y) {
  EXPECT_DOUBLE_EQ(blp::functional_Y(PointSequence::canonicalize({0})), 1.0);
  EXPECT_DOUBLE_EQ(blp::functional_Y(PointSequence::canonicalize({0, 0})), 2.0);
  EXPECT_NEAR(blp::functional_Y(PointSequence::canonicalize({-std::log(2.0), std::log(2.0)})), 2.5, 1e-15);
}

TEST(Functionals, Ytilde) {
  EXPECT_EQ(blp::functional_Ytilde(PointSequence::canonicalize({0, 0})), 0.0);
  EXPECT_NEAR(blp::functional_Ytilde(PointSequence::canonicalize({1})), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(blp::functional_Ytilde(PointSequence::canonicalize({-3, 1, 2})), std::exp(-1.0) + 2 * std::exp(-2.0),
              1e-15);
  EXPECT_NEAR(std::exp(-1.0) + 2 * std::exp(-2.0), 0.63855, 1e-5);
}

TEST(Functionals, Ybar) {
  EXPECT_DOUBLE_EQ(blp::functional_Ybar(PointSequence::canonicalize({0, 0})), 2.0);
  EXPECT_NEAR(blp::functional_Ybar(PointSequence::canonicalize({1})), 2 * std::exp(-1.0), 1e-15);
}

TEST(Functionals, Ybar2SkipsFirst) {
  auto x = PointSequence::canonicalize({-1, 0, 2});
  EXPECT_NEAR(blp::functional_Ybar2(x), 1.0 + 3.0 * std::exp(-2.0), 1e-15);
}

class RandomSequences : public ::testing::Test {
protected:
  std::mt19937_64 rng{2024};
  std::vector<double> draw() {
    std::uniform_int_distribution<int> len(0, 8);
    std::normal_distribution<double> g(0.0, 2.0);
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    for (double& x : v) x = g(rng);
    return v;
  }
};

TEST_F(RandomSequences, YbarIsSum) {
  for (int i = 0; i < 500; ++i) {
    auto x = PointSequence::canonicalize(draw());
    EXPECT_EQ(blp::functional_Ybar(x), blp::functional_Y(x) + blp::functional_Ytilde(x));
  }
}

TEST_F(RandomSequences, TranslateComposes) {
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 200; ++i) {
    auto x = PointSequence::canonicalize(draw());
    const double a = u(rng), b = u(rng);
    auto l = x.translate(a).translate(b);
    auto r = x.translate(a + b);
    ASSERT_EQ(l.size(), r.size());
    for (std::size_t k = 0; k < l.size(); ++k) EXPECT_NEAR(l[k], r[k], 1e-12);
  }
}

TEST_F(RandomSequences, YScalesUnderTranslation) {
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 200; ++i) {
    auto x = PointSequence::canonicalize(draw());
    const double y = u(rng);
    EXPECT_NEAR(blp::functional_Y(x.translate(y)), std::exp(-y) * blp::functional_Y(x),
                1e-12 * (1 + blp::functional_Y(x.translate(y))));
  }
}

TEST_F(RandomSequences, PermutationInvariant) {
  for (int i = 0; i < 200; ++i) {
    auto v = draw();
    auto x = PointSequence::canonicalize(v);
    std::shuffle(v.begin(), v.end(), rng);
    auto y = PointSequence::canonicalize(v);
    EXPECT_EQ(x, y);
    EXPECT_EQ(blp::functional_Y(x), blp::functional_Y(y));
    EXPECT_EQ(blp::functional_Ytilde(x), blp::functional_Ytilde(y));
  }
}

TEST(PointSequenceJson, RoundTripSorted) {
  auto x = PointSequence::canonicalize({2.5, -1.0, 0.0});
  auto j = blp::io::to_json(x);
  EXPECT_EQ(j.dump(), "[-1.0,0.0,2.5]");
  EXPECT_EQ(blp::io::point_sequence_from_json(blp::io::json::parse("[2.5,-1,0]")), x);
  EXPECT_THROW(blp::io::point_sequence_from_json(blp::io::json::parse("{\"a\":1}")), blp::Error);
}
