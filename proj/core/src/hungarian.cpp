#include "tweezer/hungarian.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace tweezer {

namespace {

constexpr double kCoincident = 1e-9;

double total_cost(const CostMatrix& cost, const std::vector<std::size_t>& match) {
  double sum = 0.0;
  for (std::size_t t = 0; t < match.size(); ++t) {
    sum += cost[t][match[t]];
  }
  return sum;
}

}  // namespace

const char* to_string(CostMetric metric) {
  return metric == CostMetric::euclidean ? "euclidean" : "squared_euclidean";
}

const char* to_string(AssignmentMethod method) {
  return method == AssignmentMethod::hungarian ? "hungarian" : "greedy";
}

Assignment solve_assignment(const CostMatrix& cost) {
  const std::size_t n = cost.size();
  if (n == 0) {
    return {};
  }
  const std::size_t m = cost.front().size();
  for (std::size_t i = 0; i < n; ++i) {
    if (cost[i].size() != m) {
      throw Error(ErrorCode::invalid_argument, "cost matrix rows differ in length");
    }
    for (double c : cost[i]) {
      if (!std::isfinite(c)) {
        throw Error(ErrorCode::invalid_argument, "cost matrix entries must be finite");
      }
    }
  }
  if (m < n) {
    throw Error(ErrorCode::insufficient_atoms, "assignment needs at least as many sources (" + std::to_string(m) +
                                                   ") as targets (" + std::to_string(n) + ")");
  }

  // Potentials u (rows) and v (columns), 1-based with a virtual column 0.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0);
  std::vector<double> v(m + 1, 0.0);
  std::vector<std::size_t> row_of_col(m + 1, 0);
  std::vector<std::size_t> way(m + 1, 0);
  std::vector<double> minv(m + 1);
  std::vector<char> used(m + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of_col[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) {
          continue;
        }
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  out.source_of_target.assign(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (row_of_col[j] != 0) {
      out.source_of_target[row_of_col[j] - 1] = j - 1;
    }
  }
  out.cost = total_cost(cost, out.source_of_target);
  return out;
}

double pair_cost(Vec3 source, Vec3 target, CostMetric metric) {
  const double d = distance(source, target);
  return metric == CostMetric::euclidean ? d : d * d;
}

Assignment assignment_min_cost(const std::vector<Vec3>& sources, const std::vector<Vec3>& targets,
                               CostMetric metric, AssignmentMethod method) {
  if (sources.size() < targets.size()) {
    throw Error(ErrorCode::insufficient_atoms, "assignment needs at least as many sources (" +
                                                   std::to_string(sources.size()) + ") as targets (" +
                                                   std::to_string(targets.size()) + ")");
  }
  CostMatrix cost(targets.size(), std::vector<double>(sources.size()));
  for (std::size_t t = 0; t < targets.size(); ++t) {
    for (std::size_t s = 0; s < sources.size(); ++s) {
      cost[t][s] = pair_cost(sources[s], targets[t], metric);
    }
  }

  Assignment out;
  if (method == AssignmentMethod::hungarian) {
    out = solve_assignment(cost);
  } else {
    std::vector<char> taken(sources.size(), 0);
    out.source_of_target.assign(targets.size(), 0);
    for (std::size_t t = 0; t < targets.size(); ++t) {
      std::size_t best = sources.size();
      for (std::size_t s = 0; s < sources.size(); ++s) {
        if (!taken[s] && (best == sources.size() || cost[t][s] < cost[t][best])) {
          best = s;
        }
      }
      taken[best] = 1;
      out.source_of_target[t] = best;
    }
  }

  // Pin sources that already sit on a target to that target.
  std::vector<std::size_t> target_of_source(sources.size(), targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    target_of_source[out.source_of_target[t]] = t;
  }
  for (std::size_t t = 0; t < targets.size(); ++t) {
    for (std::size_t s = 0; s < sources.size(); ++s) {
      if (distance(sources[s], targets[t]) > kCoincident || out.source_of_target[t] == s) {
        continue;
      }
      const std::size_t current = out.source_of_target[t];
      const std::size_t other_target = target_of_source[s];
      double before = cost[t][current];
      double after = cost[t][s];
      if (other_target != targets.size()) {
        before += cost[other_target][s];
        after += cost[other_target][current];
      }
      // The triangle inequality guarantees no increase for Euclidean costs.
      if (metric == CostMetric::euclidean || after <= before) {
        out.source_of_target[t] = s;
        target_of_source[s] = t;
        target_of_source[current] = other_target;
        if (other_target != targets.size()) {
          out.source_of_target[other_target] = current;
        }
      }
      break;
    }
  }
  out.cost = total_cost(cost, out.source_of_target);
  return out;
}

}  // namespace tweezer
