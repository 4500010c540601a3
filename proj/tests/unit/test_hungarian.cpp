#include "oracles.hpp"

#include "tweezer/hungarian.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace tweezer;

namespace {

double assignment_cost(const CostMatrix& cost, const Assignment& a) {
  double total = 0.0;
  for (std::size_t r = 0; r < cost.size(); ++r) {
    total += cost[r][a.source_of_target[r]];
  }
  return total;
}

void expect_injective(const Assignment& a, std::size_t columns) {
  std::set<std::size_t> used(a.source_of_target.begin(), a.source_of_target.end());
  EXPECT_EQ(used.size(), a.source_of_target.size());
  for (auto c : used) {
    EXPECT_LT(c, columns);
  }
}

}  // namespace

TEST(Hungarian, ThreeByThreeExample) {
  const CostMatrix cost{{4, 1, 3}, {2, 0, 5}, {3, 2, 2}};
  const auto a = solve_assignment(cost);
  EXPECT_DOUBLE_EQ(a.cost, oracle::brute_force_assignment(cost));
  EXPECT_DOUBLE_EQ(a.cost, 5.0);
  expect_injective(a, 3);
  EXPECT_DOUBLE_EQ(assignment_cost(cost, a), 5.0);
}

TEST(Hungarian, RectangularMatrixUsesCheapestColumns) {
  const CostMatrix cost{{9, 1, 9, 9}, {9, 9, 9, 2}};
  const auto a = solve_assignment(cost);
  EXPECT_EQ(a.source_of_target, (std::vector<std::size_t>{1, 3}));
  EXPECT_DOUBLE_EQ(a.cost, 3.0);
}

TEST(Hungarian, EmptyMatrix) {
  const auto a = solve_assignment({});
  EXPECT_TRUE(a.source_of_target.empty());
  EXPECT_EQ(a.cost, 0.0);
}

TEST(Hungarian, RejectsMalformedMatrices) {
  EXPECT_THROW(solve_assignment({{1, 2}, {3}}), Error);
  EXPECT_THROW(solve_assignment({{1}, {2}}), Error);
  EXPECT_THROW(solve_assignment({{std::nan("")}}), Error);
}

TEST(Hungarian, MatchesBruteForceOnIntegerMatrices) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int rows = 1 + static_cast<int>(rng() % 6);
    const int cols = rows + static_cast<int>(rng() % 3);
    CostMatrix cost(static_cast<std::size_t>(rows), std::vector<double>(static_cast<std::size_t>(cols)));
    for (auto& row : cost) {
      for (auto& c : row) {
        c = static_cast<double>(rng() % 10);
      }
    }
    const auto a = solve_assignment(cost);
    expect_injective(a, static_cast<std::size_t>(cols));
    EXPECT_EQ(a.cost, oracle::brute_force_assignment(cost));
    EXPECT_EQ(assignment_cost(cost, a), a.cost);
  }
}

TEST(AssignmentMinCost, SourcesOnTargetsMatchThemselves) {
  const std::vector<Vec3> pts{{0, 0, 0}, {5, 0, 0}, {0, 5, 0}, {5, 5, 0}};
  for (auto metric : {CostMetric::euclidean, CostMetric::squared_euclidean}) {
    const auto a = assignment_min_cost(pts, pts, metric);
    EXPECT_EQ(a.source_of_target, (std::vector<std::size_t>{0, 1, 2, 3}));
    EXPECT_EQ(a.cost, 0.0);
  }
}

TEST(AssignmentMinCost, PinsCoincidentSourceEvenWithEqualCostAlternatives) {
  // source 1 sits on target 0; moving source 0 through it costs the same
  const std::vector<Vec3> sources{{0, 0, 0}, {5, 0, 0}};
  const std::vector<Vec3> targets{{5, 0, 0}, {10, 0, 0}};
  const auto a = assignment_min_cost(sources, targets);
  EXPECT_EQ(a.source_of_target[0], 1u);
  EXPECT_NEAR(a.cost, 10.0, 1e-12);
}

TEST(AssignmentMinCost, EuclideanMatchesBruteForce) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t t = 1 + rng() % 6;
    const std::size_t s = t + rng() % 3;
    std::vector<Vec3> sources(s);
    std::vector<Vec3> targets(t);
    for (auto& p : sources) {
      p = {u(rng), u(rng), 0};
    }
    for (auto& p : targets) {
      p = {u(rng), u(rng), 0};
    }
    CostMatrix cost(t, std::vector<double>(s));
    for (std::size_t i = 0; i < t; ++i) {
      for (std::size_t j = 0; j < s; ++j) {
        cost[i][j] = std::hypot(sources[j].x - targets[i].x, sources[j].y - targets[i].y);
      }
    }
    const auto a = assignment_min_cost(sources, targets);
    EXPECT_NEAR(a.cost, oracle::brute_force_assignment(cost), 1e-9);
  }
}

TEST(AssignmentMinCost, SquaredMetricDiffersFromEuclidean) {
  // Euclidean prefers one long and one zero-length move; squared splits the distance
  const std::vector<Vec3> sources{{0, 0, 0}, {4, 0, 0}};
  const std::vector<Vec3> targets{{4, 0, 0}, {8, 0, 0}};
  EXPECT_DOUBLE_EQ(pair_cost({0, 0, 0}, {3, 4, 0}, CostMetric::euclidean), 5.0);
  EXPECT_DOUBLE_EQ(pair_cost({0, 0, 0}, {3, 4, 0}, CostMetric::squared_euclidean), 25.0);
  const auto sq = assignment_min_cost(sources, targets, CostMetric::squared_euclidean);
  EXPECT_DOUBLE_EQ(sq.cost, 32.0);
}

TEST(AssignmentMinCost, GreedyIsFeasibleButNotBetterThanOptimal) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec3> sources(10);
    std::vector<Vec3> targets(6);
    for (auto& p : sources) {
      p = {u(rng), u(rng), 0};
    }
    for (auto& p : targets) {
      p = {u(rng), u(rng), 0};
    }
    const auto opt = assignment_min_cost(sources, targets);
    const auto greedy = assignment_min_cost(sources, targets, CostMetric::euclidean, AssignmentMethod::greedy);
    expect_injective(greedy, sources.size());
    EXPECT_GE(greedy.cost, opt.cost - 1e-9);
  }
}

TEST(AssignmentMinCost, TooFewSourcesIsAnError) {
  try {
    assignment_min_cost({{0, 0, 0}}, {{0, 0, 0}, {5, 0, 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::insufficient_atoms);
  }
}

TEST(AssignmentMinCost, NamesRoundTrip) {
  EXPECT_STREQ(to_string(CostMetric::euclidean), "euclidean");
  EXPECT_STREQ(to_string(CostMetric::squared_euclidean), "squared_euclidean");
  EXPECT_STREQ(to_string(AssignmentMethod::hungarian), "hungarian");
  EXPECT_STREQ(to_string(AssignmentMethod::greedy), "greedy");
}
