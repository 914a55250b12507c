#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rieszlab/measure.hpp"

using namespace rieszlab;

namespace {

CantorSet quarter_set(int d, int n) {
  return build_cantor(regularize(SigmaSequence::geometric(4.0, n), 0.0625, 4.0), d);
}

}  // namespace

TEST(Discretize, CentersWeightsAndTags) {
  CantorSet set = quarter_set(2, 2);
  DiscreteMeasure nu = discretize_centers(set);
  ASSERT_EQ(nu.size(), 16u);
  EXPECT_DOUBLE_EQ(nu.total_mass(), 1.0);
  for (std::size_t i = 0; i < nu.size(); ++i) {
    EXPECT_DOUBLE_EQ(nu.w[i], 1.0 / 16.0);
    EXPECT_EQ(nu.tag[i], i);
    double c[2];
    set.center_of(2, i, c);
    EXPECT_DOUBLE_EQ(nu.point(i)[0], c[0]);
    EXPECT_DOUBLE_EQ(nu.point(i)[1], c[1]);
  }
}

TEST(Discretize, GridCountsAndSymmetry) {
  CantorSet set = quarter_set(2, 2);
  DiscreteMeasure nu = discretize_grid(set, 3);
  EXPECT_EQ(nu.size(), 16u * 9u);
  EXPECT_NEAR(nu.total_mass(), 1.0, 1e-15);

  // q = 1 degenerates to the center measure
  DiscreteMeasure nu1 = discretize_grid(set, 1);
  DiscreteMeasure nc = discretize_centers(set);
  ASSERT_EQ(nu1.size(), nc.size());
  for (std::size_t i = 0; i < nc.size(); ++i) {
    EXPECT_DOUBLE_EQ(nu1.point(i)[0], nc.point(i)[0]);
    EXPECT_DOUBLE_EQ(nu1.w[i], nc.w[i]);
  }

  // each cube's grid is symmetric through the cube center
  double c[2];
  set.center_of(2, 5, c);
  int hits = 0;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    if (nu.tag[i] != 5) continue;
    double m[2] = {2 * c[0] - nu.point(i)[0], 2 * c[1] - nu.point(i)[1]};
    bool found = false;
    for (std::size_t j = 0; j < nu.size(); ++j)
      if (nu.tag[j] == 5 && std::abs(nu.point(j)[0] - m[0]) <= 1e-12 &&
          std::abs(nu.point(j)[1] - m[1]) <= 1e-12)
        found = true;
    EXPECT_TRUE(found);
    ++hits;
  }
  EXPECT_EQ(hits, 9);

  EXPECT_THROW(discretize_grid(set, 2), ConfigError);
  EXPECT_THROW(discretize_grid(set, 0), ConfigError);
  EXPECT_THROW(discretize_grid(quarter_set(2, 3), 1023), ConfigError);  // over the cap
}

TEST(BallMass, ClosedBallIncludesBoundary) {
  DiscreteMeasure nu;
  nu.d = 1;
  double p0 = 0.0, p1 = 1.0;
  nu.push(&p0, 0.25, 0);
  nu.push(&p1, 0.75, 1);
  EXPECT_DOUBLE_EQ(ball_mass(nu, &p0, 1.0), 1.0);       // boundary atom counts
  EXPECT_DOUBLE_EQ(ball_mass(nu, &p0, 0.9999), 0.25);
  EXPECT_DOUBLE_EQ(ball_mass(nu, &p1, 0.0), 0.75);      // zero radius keeps the atom itself
}

TEST(GrowthProbe, TwoAtomHandTrace) {
  DiscreteMeasure nu;
  nu.d = 1;
  double p0 = 0.0, p1 = 1.0;
  nu.push(&p0, 0.25, 0);
  nu.push(&p1, 0.75, 1);
  GrowthReport rep = growth_constant(nu, 1.0, {0.5, 1.0});
  // best ratio: the heavy atom alone over radius 1/2
  EXPECT_DOUBLE_EQ(rep.constant, 1.5);
  EXPECT_EQ(rep.arg_point, 1u);
  EXPECT_DOUBLE_EQ(rep.arg_radius, 0.5);
  EXPECT_THROW(growth_constant(nu, 1.0, {}), ConfigError);
  EXPECT_THROW(growth_constant(nu, 1.0, {-1.0}), ConfigError);
}

TEST(GrowthProbe, LadderRadiiCoverAllScales) {
  CantorSet set = quarter_set(2, 3);
  std::vector<double> radii = growth_radii(set);
  ASSERT_EQ(radii.size(), 4u);  // one per level plus half the bottom edge
  DiscreteMeasure nu = discretize_centers(set);
  GrowthReport rep = growth_constant(nu, 1.0, radii);
  EXPECT_GT(rep.constant, 0.0);
  EXPECT_TRUE(std::isfinite(rep.constant));
}

TEST(ContentBounds, HalfLineHandTrace) {
  // d = 1, n = 1, h = t: cover upper bound is 2 h(ell_1 / 2) = ell_1
  SigmaSequence seq;
  seq.sigma = {0.125};
  CantorSet set = build_cantor(regularize(seq, 0.0625, 4.0), 1);
  GaugeFunction h = GaugeFunction::power(1.0, 1);
  ContentBounds cb = content_bounds(set, h);
  EXPECT_DOUBLE_EQ(cb.upper, 0.125);
  EXPECT_EQ(cb.upper_level, 1);
  EXPECT_GT(cb.lower, 0.0);
  EXPECT_LE(cb.lower, cb.upper * (1.0 + 1e-12));
  EXPECT_DOUBLE_EQ(cb.psi_mass, 2.0 * 0.125);  // 2^d h(sigma_1)
}

TEST(ContentBounds, SandwichHoldsAcrossFamiliesAndGauges) {
  for (double beta : {0.8, 1.0, 1.5}) {
    for (int n = 1; n <= 3; ++n) {
      CantorSet set = quarter_set(2, n);
      GaugeFunction h = GaugeFunction::power(beta, 2);
      ContentBounds cb;
      ASSERT_NO_THROW(cb = content_bounds(set, h)) << "beta=" << beta << " n=" << n;
      EXPECT_GT(cb.lower, 0.0);
      EXPECT_LE(cb.lower, cb.upper * (1.0 + 1e-12));
    }
  }
  for (int n = 1; n <= 4; ++n) {
    CantorSet set = quarter_set(1, n);
    GaugeFunction h = GaugeFunction::power(0.7, 1);
    ASSERT_NO_THROW(content_bounds(set, h)) << "n=" << n;
  }
}

TEST(PsiWitness, MassMatchesGaugeAtTheAnchor) {
  CantorSet set = quarter_set(2, 2);
  GaugeFunction h = GaugeFunction::power(1.0, 2);
  PsiWitness psi = psi_witness(set, h);
  // 2^d h(sigma_1) = 4 * 0.25 = h(sigma_0) for the quarter family
  EXPECT_DOUBLE_EQ(psi.mass, 1.0);
  EXPECT_NEAR(psi.measure.total_mass(), psi.mass, 1e-15);
  EXPECT_GT(psi.frostman_constant, 0.0);
}

TEST(MeasureOps, FilterAndScale) {
  CantorSet set = quarter_set(2, 1);
  DiscreteMeasure nu = discretize_centers(set);
  DiscreteMeasure half = scale_measure(nu, 0.5);
  EXPECT_DOUBLE_EQ(half.total_mass(), 0.5);

  std::vector<char> keep = {1, 0, 0, 1};
  DiscreteMeasure sub = filter_measure(nu, keep);
  ASSERT_EQ(sub.size(), 2u);
  EXPECT_EQ(sub.tag[0], 0u);
  EXPECT_EQ(sub.tag[1], 3u);
  EXPECT_THROW(filter_measure(nu, {1, 0}), ConfigError);
}

TEST(MeasureIO, HeaderAndLines) {
  CantorSet set = quarter_set(2, 1);
  DiscreteMeasure nu = discretize_centers(set);
  std::ostringstream os;
  write_measure(os, nu);
  std::string text = os.str();
  EXPECT_NE(text.find("\"count\":4"), std::string::npos);
  int lines = 0;
  for (char c : text) lines += c == '\n';
  EXPECT_EQ(lines, 5);
}
