#include "tweezer/common.hpp"

#include <algorithm>
#include <limits>

namespace tweezer {

double lateral_distance_to_segment(Vec3 p, Vec3 a, Vec3 b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) {
    t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  }
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

double lateral_distance_to_polyline(Vec3 p, const std::vector<Vec3>& path) {
  if (path.empty()) {
    return std::numeric_limits<double>::infinity();
  }
  if (path.size() == 1) {
    return lateral_distance(p, path.front());
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    best = std::min(best, lateral_distance_to_segment(p, path[i], path[i + 1]));
  }
  return best;
}

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::layout_invalid: return "layout_invalid";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::paraxial_violation: return "paraxial_violation";
    case ErrorCode::budget_exceeded: return "budget_exceeded";
    case ErrorCode::calibration_failed: return "calibration_failed";
    case ErrorCode::insufficient_atoms: return "insufficient_atoms";
    case ErrorCode::infeasible: return "infeasible";
    case ErrorCode::not_executable: return "not_executable";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
  }
  return "unknown";
}

}  // namespace tweezer
