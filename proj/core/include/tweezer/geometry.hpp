#pragma once

#include "tweezer/common.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace tweezer {

/// Bounds every TrapLayout is validated against.
struct LayoutLimits {
  std::size_t max_traps = 200;
  double min_pair_distance_um = 3.0;
  double fov_half_xy_um = 50.0;  // |x|, |y| <= this
  double fov_half_z_um = 100.0;  // |z| <= this (200 um z-scan range)
};

struct TrapSite {
  Vec3 position;
  bool is_target = true;  // false: reservoir trap
  std::optional<int> plane_index;
};

/// Raised when a layout breaks an invariant. Carries the offending trap
/// indices (one index for range errors, a pair for spacing errors).
class LayoutError : public Error {
 public:
  LayoutError(const std::string& what, std::vector<std::size_t> indices)
      : Error(ErrorCode::layout_invalid, what), indices_(std::move(indices)) {}
  [[nodiscard]] const std::vector<std::size_t>& indices() const noexcept { return indices_; }

 private:
  std::vector<std::size_t> indices_;
};

/// Validated, immutable set of trap sites.
class TrapLayout {
 public:
  /// Throws LayoutError if any invariant is violated.
  TrapLayout(std::string name, std::vector<TrapSite> traps, LayoutLimits limits = {});

  [[nodiscard]] const std::string& name() const noexcept { return name_; }
  [[nodiscard]] const std::vector<TrapSite>& traps() const noexcept { return traps_; }
  [[nodiscard]] const TrapSite& operator[](std::size_t i) const { return traps_[i]; }
  [[nodiscard]] std::size_t size() const noexcept { return traps_.size(); }
  [[nodiscard]] const LayoutLimits& limits() const noexcept { return limits_; }

  [[nodiscard]] std::vector<Vec3> positions() const;
  [[nodiscard]] std::vector<std::size_t> target_indices() const;
  [[nodiscard]] std::size_t target_count() const;
  [[nodiscard]] Vec3 centroid() const;

  /// True if p lies inside the field of view of these limits.
  [[nodiscard]] bool in_field_of_view(Vec3 p) const;

  friend bool operator==(const TrapLayout& a, const TrapLayout& b);

 private:
  std::string name_;
  std::vector<TrapSite> traps_;
  LayoutLimits limits_;
};

bool operator==(const TrapSite& a, const TrapSite& b);

struct Plane {
  double z_center_um = 0.0;
  std::vector<std::size_t> traps;  // ascending trap indices
};

struct PlaneDecomposition {
  std::vector<Plane> planes;  // strictly ascending z_center
  double epsilon_z_um = 1.0;

  [[nodiscard]] std::size_t plane_count() const noexcept { return planes.size(); }
  /// plane index of every trap, indexed like the layout
  [[nodiscard]] std::vector<int> plane_of_trap(std::size_t trap_count) const;
};

/// Single-linkage clustering of trap z values: traps whose sorted z values are
/// connected by gaps <= epsilon_z share a plane. A plane whose internal spread
/// exceeds 2 * epsilon_z is rejected.
PlaneDecomposition decompose_planes(const TrapLayout& layout, double epsilon_z_um = 1.0);

/// Copy of the layout with plane_index filled in from the decomposition.
TrapLayout with_planes(const TrapLayout& layout, const PlaneDecomposition& planes);

struct SafetyThresholds {
  double z_safe_um = 17.0;  // 14 um when the MT runs at reduced power
  double r_safe_um = 3.0;
};

struct SafetyConflict {
  std::size_t first = 0;
  std::size_t second = 0;
  double lateral_um = 0.0;
  double axial_um = 0.0;
};

struct SafetyReport {
  std::vector<SafetyConflict> conflicts;
  [[nodiscard]] bool pass() const noexcept { return conflicts.empty(); }
};

/// Pairs of traps in different planes that the moving tweezers could
/// disturb: lateral distance < r_safe and axial distance < z_safe.
SafetyReport validate_mt_safety(const TrapLayout& layout, const PlaneDecomposition& planes,
                                SafetyThresholds thresholds = {});

enum class Axis { x, y };

/// Rotates p about an axis parallel to x or y passing through center.
Vec3 rotate_about(Vec3 p, Axis axis, double angle_deg, Vec3 center);

/// Rigid rotation about the layout centroid. |angle| must be <= 45 degrees.
/// Plane assignments are dropped (they must be recomputed).
TrapLayout rotate_layout(const TrapLayout& layout, Axis axis, double angle_deg);

struct RotationSuggestion {
  Axis axis = Axis::x;
  double angle_deg = 0.0;
};

/// Smallest rotation (0.5 degree grid, +x, -x, +y, -y at each magnitude) whose
/// rotated layout passes validate_mt_safety. nullopt if none within max_angle.
std::optional<RotationSuggestion> suggest_rotation(const TrapLayout& layout,
                                                   SafetyThresholds thresholds = {},
                                                   double max_angle_deg = 45.0,
                                                   double epsilon_z_um = 1.0);

enum class Preset {
  cubic,
  bilayer_square_offset,
  bilayer_graphene,
  pyrochlore,
  ring_cylinder,
  trefoil_knot,
};

const char* to_string(Preset preset);
std::optional<Preset> parse_preset(const std::string& name);
std::vector<Preset> all_presets();

/// Preset parameters. Interpretation per preset:
///   cubic                  counts = (nx, ny, nz), spacing = (sx, sy, sz)
///   bilayer_square_offset  counts = (nx, ny) per layer, spacing[0] = a, spacing[2] = d_z
///   bilayer_graphene       counts = (nx, ny) unit cells, spacing[0] = bond length, spacing[2] = d_z
///   pyrochlore             counts = cubic cells, spacing[0] = cell edge
///   ring_cylinder          sites per ring, counts[2] = rings, scale = radius, spacing[2] = ring pitch
///   trefoil_knot           sites on the curve, scale = major radius of the carrying torus
/// reservoir_factor > 1 adds same-plane reservoir traps until every plane
/// holds at least ceil(factor * targets) traps.
struct PresetParams {
  std::array<int, 3> counts{5, 5, 5};
  std::array<double, 3> spacing_um{10.0, 10.0, 17.0};
  int sites = 60;
  double scale_um = 20.0;
  double reservoir_factor = 0.0;
  double epsilon_z_um = 1.0;
  LayoutLimits limits{};
};

/// Deterministic, origin-centred preset layout.
TrapLayout generate_preset(Preset preset, const PresetParams& params);

/// Adds reservoir traps to every plane of a pattern. Candidate sites come
/// from `candidates` (same-plane sites of the extended pattern) and, if those
/// run out, from rings around the plane's targets. Nearest candidates to the
/// plane's target centroid are taken first.
std::vector<TrapSite> add_reservoir(const std::vector<TrapSite>& targets,
                                    const std::vector<Vec3>& candidates, double factor,
                                    const LayoutLimits& limits, double epsilon_z_um);

}  // namespace tweezer
