#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rieszlab/geometry.hpp"

using namespace rieszlab;

namespace {

CantorSet quarter_set(int d, int n) {
  return build_cantor(regularize(SigmaSequence::geometric(4.0, n), 0.0625, 4.0), d);
}

CantorSet unit_first_level() {
  SigmaSequence seq;
  seq.sigma = {1.0};
  return build_cantor(regularize(seq, 0.0625, 4.0), 2);
}

}  // namespace

TEST(CantorSet, FirstLevelCornerPlacement) {
  CantorSet set = unit_first_level();
  EXPECT_DOUBLE_EQ(set.edge_of(0), 8.0);  // root edge 2 T ell_1
  EXPECT_DOUBLE_EQ(set.edge_of(1), 1.0);
  ASSERT_EQ(set.level_count(1), 4u);
  const double expected[4][2] = {
      {-3.5, -3.5}, {3.5, -3.5}, {-3.5, 3.5}, {3.5, 3.5}};
  for (std::uint64_t k = 0; k < 4; ++k) {
    double c[2];
    set.center_of(1, k, c);
    EXPECT_DOUBLE_EQ(c[0], expected[k][0]) << "k=" << k;
    EXPECT_DOUBLE_EQ(c[1], expected[k][1]) << "k=" << k;
  }
}

TEST(CantorSet, AncestorChainsAndNesting) {
  CantorSet set = quarter_set(2, 3);
  for (std::uint64_t k = 0; k < set.level_count(3); k += 7) {
    EXPECT_EQ(set.ancestor(k, 3, 2), k >> 2);
    EXPECT_EQ(set.ancestor(k, 3, 1), k >> 4);
    EXPECT_EQ(set.ancestor(k, 3, 0), std::uint64_t(0));
    // child cube lies inside its parent
    Cube child = set.cube(3, k);
    Cube parent = set.cube(2, k >> 2);
    for (int a = 0; a < 2; ++a)
      EXPECT_LE(std::abs(child.center[a] - parent.center[a]) + 0.5 * child.edge,
                0.5 * parent.edge + 1e-15);
  }
}

TEST(CantorSet, AddressCodecRoundTrip) {
  CantorSet set = quarter_set(2, 3);
  for (std::uint64_t k = 0; k < set.level_count(3); ++k) {
    std::vector<int> signs = address_signs(set, k);
    EXPECT_EQ(index_from_signs(set, signs), k);
  }
  // flipping one address bit flips exactly one sign
  std::uint64_t k = 0b010111;
  std::uint64_t flipped = flip_address_bit(set, k, 2, 1);
  std::vector<int> a = address_signs(set, k);
  std::vector<int> b = address_signs(set, flipped);
  int diffs = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diffs += a[i] != b[i];
  EXPECT_EQ(diffs, 1);
  EXPECT_NE(a[1 * 3 + 1], b[1 * 3 + 1]);  // axis 1, level 2 slot
}

TEST(CantorSet, MirrorIndexNegatesCentersExactly) {
  for (int d : {1, 2, 3}) {
    CantorSet set = quarter_set(d, d == 3 ? 2 : 3);
    std::uint64_t mask = set.level_count(set.n) - 1;
    for (std::uint64_t k = 0; k <= mask; k += 5) {
      double c[max_dim], m[max_dim];
      set.center_of(set.n, k, c);
      set.center_of(set.n, (~k) & mask, m);
      for (int a = 0; a < d; ++a)
        EXPECT_EQ(m[a], -c[a]) << "d=" << d << " k=" << k;  // exact reflection
    }
  }
}

TEST(CantorSet, FrameLayout) {
  CantorSet set = quarter_set(2, 3);  // stages {1, 3}
  ASSERT_EQ(set.stages(), 2);
  EXPECT_EQ(set.stage_level(1), 1);
  EXPECT_EQ(set.stage_level(2), 3);
  EXPECT_EQ(set.frame_count(1), 1u);
  EXPECT_EQ(set.frame_count(2), set.level_count(2));
  EXPECT_DOUBLE_EQ(set.frame_edge(1), 8.0 * set.ladder.ell[0]);
  EXPECT_DOUBLE_EQ(set.frame_edge(2), 8.0 * set.ladder.ell[2]);
  // the stage-2 frame sits at its parent's center and contains both children
  Cube fr = set.frame(2, 3);
  double pc[2];
  set.center_of(2, 3, pc);
  EXPECT_DOUBLE_EQ(fr.center[0], pc[0]);
  EXPECT_DOUBLE_EQ(fr.center[1], pc[1]);
  for (std::uint64_t g = 0; g < 4; ++g) {
    Cube child = set.cube(3, (std::uint64_t(3) << 2) | g);
    EXPECT_TRUE(fr.contains(child.center));
  }
}

TEST(Locate, AgreesWithBruteForceScan) {
  CantorSet set = quarter_set(2, 3);
  double half_root = set.T * set.ladder.ell[0];
  for (int trial = 0; trial < 10000; ++trial) {
    Rng rng(0x10CA7Eull, trial);
    double x[2];
    // mix uniform draws with points snapped near cube boundaries
    for (int a = 0; a < 2; ++a) x[a] = rng.uniform(-1.1 * half_root, 1.1 * half_root);
    if (trial % 5 == 0) {
      std::uint64_t k = rng.next() % set.level_count(3);
      double c[2];
      set.center_of(3, k, c);
      for (int a = 0; a < 2; ++a)
        x[a] = c[a] + 0.5 * set.edge_of(3) * (double(rng.next() % 5) - 2.0) / 2.0;
    }
    LocateResult got = locate(set, x);

    bool in_root = true;
    for (int a = 0; a < 2; ++a) in_root = in_root && std::abs(x[a]) <= half_root;
    ASSERT_EQ(got.in_root, in_root) << "trial " << trial;
    if (!in_root) continue;
    std::uint64_t prev = 0;
    for (int j = 1; j <= 3; ++j) {
      // brute force: smallest-index level-j cube under prev that contains x
      bool found = false;
      std::uint64_t pick = 0;
      for (std::uint64_t g = 0; g < 4; ++g) {
        std::uint64_t k = (prev << 2) | g;
        if (set.cube(j, k).contains(x)) {
          pick = k;
          found = true;
          break;
        }
      }
      if (!found) {
        ASSERT_EQ(got.depth(), j - 1) << "trial " << trial;
        break;
      }
      ASSERT_GT(got.depth(), j - 1) << "trial " << trial;
      ASSERT_EQ(got.levels[j - 1], pick) << "trial " << trial;
      prev = pick;
    }
  }
}

TEST(Locate, BottomCentersAreInsideTheSet) {
  CantorSet set = quarter_set(2, 3);
  for (std::uint64_t k = 0; k < set.level_count(3); ++k) {
    double c[2];
    set.center_of(3, k, c);
    LocateResult res = locate(set, c);
    EXPECT_TRUE(res.inside_set(3));
    EXPECT_EQ(res.levels.back(), k);
  }
}

TEST(Locate, FrameMembershipMatchesFrameCubes) {
  CantorSet set = quarter_set(2, 3);
  for (int trial = 0; trial < 2000; ++trial) {
    Rng rng(0xF4A3E5ull, trial);
    double x[2];
    double half_root = set.T * set.ladder.ell[0];
    for (int a = 0; a < 2; ++a) x[a] = rng.uniform(-half_root, half_root);
    LocateResult res = locate(set, x);
    for (int p = 1; p <= set.stages(); ++p) {
      bool in_some = false;
      std::uint64_t which = 0;
      for (std::uint64_t i = 0; i < set.frame_count(p); ++i)
        if (set.frame(p, i).contains(x)) {
          in_some = true;
          which = i;
          break;
        }
      bool reported = false;
      for (std::size_t t = 0; t < res.frame_stages.size(); ++t)
        if (res.frame_stages[t] == p) {
          reported = true;
          EXPECT_EQ(res.frames[t], which);
        }
      EXPECT_EQ(reported, in_some) << "trial " << trial << " stage " << p;
    }
  }
}

TEST(CheckGeometry, PassesHonestFamiliesRejectsTampered) {
  EXPECT_NO_THROW(check_geometry(quarter_set(1, 5)));
  EXPECT_NO_THROW(check_geometry(quarter_set(2, 3)));
  EXPECT_NO_THROW(check_geometry(quarter_set(3, 2)));

  CantorSet bad = quarter_set(2, 2);
  bad.step[0] *= 1.0001;  // corner placement off
  EXPECT_THROW(check_geometry(bad), InvariantError);
}

TEST(BuildCantor, RejectsBadInputs) {
  Ladder lad = regularize(SigmaSequence::geometric(4.0, 3), 0.0625, 4.0);
  EXPECT_THROW(build_cantor(lad, 0), ConfigError);
  EXPECT_THROW(build_cantor(lad, 9), ConfigError);
  EXPECT_THROW(build_cantor(regularize(SigmaSequence::geometric(4.0, 13), 0.0625, 4.0), 2),
               ConfigError);  // 2^26 cubes
  lad.ell[1] *= 2.0;
  EXPECT_THROW(build_cantor(lad, 2), InvariantError);
}

TEST(WriteSet, HeaderAndLineCount) {
  CantorSet set = quarter_set(2, 2);
  std::ostringstream os;
  write_set(os, set, 1.0);
  std::istringstream is(os.str());
  std::string header;
  std::getline(is, header);
  EXPECT_NE(header.find("\"cube_count\":16"), std::string::npos);
  EXPECT_NE(header.find("\"schema_version\":1"), std::string::npos);
  int lines = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++lines;
  EXPECT_EQ(lines, 16);
}
