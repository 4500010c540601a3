#pragma once

#include "tweezer/common.hpp"

#include <cstddef>
#include <vector>

namespace tweezer {

/// Rows are targets, columns are sources.
using CostMatrix = std::vector<std::vector<double>>;

struct Assignment {
  std::vector<std::size_t> source_of_target;  // indexed by target
  double cost = 0.0;                          // summed in target order
};

/// Exact minimum-cost assignment of every row to a distinct column of a
/// rectangular matrix with rows <= columns (Hungarian method, O(n^2 m)).
Assignment solve_assignment(const CostMatrix& cost);

enum class CostMetric { euclidean, squared_euclidean };
enum class AssignmentMethod { hungarian, greedy };

const char* to_string(CostMetric metric);
const char* to_string(AssignmentMethod method);

double pair_cost(Vec3 source, Vec3 target, CostMetric metric);

/// Matches every target to a distinct source. Sources sitting on a target are
/// matched to it whenever that does not raise the total cost, which for the
/// Euclidean metric is always.
Assignment assignment_min_cost(const std::vector<Vec3>& sources, const std::vector<Vec3>& targets,
                               CostMetric metric = CostMetric::euclidean,
                               AssignmentMethod method = AssignmentMethod::hungarian);

}  // namespace tweezer
