#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tweezer {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Position in the trap volume, micrometres. z is the optical axis.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return s * a; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  [[nodiscard]] double norm() const { return std::sqrt(x * x + y * y + z * z); }
  [[nodiscard]] double lateral_norm() const { return std::hypot(x, y); }
  [[nodiscard]] bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

inline double distance(Vec3 a, Vec3 b) { return (a - b).norm(); }
inline double lateral_distance(Vec3 a, Vec3 b) { return (a - b).lateral_norm(); }

/// Shortest lateral (x, y) distance from point p to segment [a, b].
double lateral_distance_to_segment(Vec3 p, Vec3 a, Vec3 b);

/// Shortest lateral distance from p to a polyline. A single-point polyline
/// degenerates to the point distance.
double lateral_distance_to_polyline(Vec3 p, const std::vector<Vec3>& path);

/// Stable error categories. The CLI maps these onto its exit-code contract.
enum class ErrorCode {
  invalid_argument,
  layout_invalid,
  parse_error,
  io_error,
  paraxial_violation,
  budget_exceeded,
  calibration_failed,
  insufficient_atoms,
  infeasible,
  not_executable,
  dimension_mismatch,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tweezer
