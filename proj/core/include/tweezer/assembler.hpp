#pragma once

#include "tweezer/common.hpp"
#include "tweezer/geometry.hpp"
#include "tweezer/hungarian.hpp"

#include <cstddef>
#include <optional>
#include <vector>

namespace tweezer {

/// Per-trap occupancy flags, indexed like the layout.
using Occupancy = std::vector<bool>;

enum class MoveKind { transfer, eject };

const char* to_string(MoveKind kind);

struct Move {
  MoveKind kind = MoveKind::transfer;
  std::size_t from = 0;
  std::optional<std::size_t> to;  // transfers only
  std::optional<Vec3> exit_um;     // ejections only
  std::vector<Vec3> path;          // from the source to the destination, inclusive

  [[nodiscard]] double path_length_um() const;
};

struct MovePlan {
  int plane_index = 0;
  double mt_z_um = 0.0;
  std::vector<Move> moves;

  [[nodiscard]] std::size_t transfer_count() const;
  [[nodiscard]] std::size_t eject_count() const;
  [[nodiscard]] double path_length_um() const;
};

struct AssemblyPlan {
  std::vector<MovePlan> planes;  // ascending plane order

  [[nodiscard]] std::size_t total_moves() const;
  [[nodiscard]] double total_path_length_um() const;
};

struct PlannerPolicy {
  CostMetric metric = CostMetric::euclidean;
  AssignmentMethod method = AssignmentMethod::hungarian;
  double collision_radius_um = 2.0;
  double exit_distance_um = 20.0;
  /// Occupied traps of other planes closer than this in z are avoided
  /// (lateral distance >= crosstalk_radius_um) whenever a path that does so
  /// exists. They never make a plan infeasible. 0 disables the preference.
  double crosstalk_window_um = 17.0;
  double crosstalk_radius_um = 2.0;
};

/// A requested transfer between two trap indices.
struct Transfer {
  std::size_t from = 0;
  std::size_t to = 0;
  friend bool operator==(const Transfer&, const Transfer&) = default;
};

class InsufficientAtoms : public Error {
 public:
  InsufficientAtoms(int plane, std::size_t loaded, std::size_t targets);
  [[nodiscard]] int plane() const noexcept { return plane_; }
  [[nodiscard]] std::size_t loaded() const noexcept { return loaded_; }
  [[nodiscard]] std::size_t targets() const noexcept { return targets_; }

 private:
  int plane_;
  std::size_t loaded_;
  std::size_t targets_;
};

class ExecutabilityError : public Error {
 public:
  ExecutabilityError(std::size_t move_index, const std::string& what)
      : Error(ErrorCode::not_executable, what), move_index_(move_index) {}
  [[nodiscard]] std::size_t move_index() const noexcept { return move_index_; }

 private:
  std::size_t move_index_;
};

/// Orders transfers so that every move lifts from an occupied trap, drops
/// onto an empty one and keeps its path at least collision_radius away from
/// every other occupied trap in `plane_traps` (all traps when empty).
/// Blocked paths get a one-waypoint detour; a path blocked by an atom that
/// stays put is split into a chain through that atom; cycles are broken by
/// staging one atom on the nearest free non-target trap.
/// Throws Error(infeasible) when no staging site is available.
std::vector<Move> order_moves(const std::vector<Transfer>& matching, const Occupancy& occupancy,
                              const TrapLayout& layout, double collision_radius_um,
                              const std::vector<std::size_t>& plane_traps = {});

/// Plans one plane: optimal assignment of in-plane atoms to in-plane
/// targets, ordered transfers, then ejection of every remaining surplus atom
/// through an exit point exit_distance outside the plane's hull.
MovePlan plan_plane(const Occupancy& occupancy, const TrapLayout& layout, const PlaneDecomposition& planes,
                    int plane_index, const PlannerPolicy& policy = {});

/// Plans every plane that holds a target (or loaded atoms to clear) in
/// ascending z. Later planes are planned against the lossless outcome of the
/// earlier ones.
AssemblyPlan plan_assembly(const Occupancy& occupancy, const TrapLayout& layout, const PlaneDecomposition& planes,
                           const PlannerPolicy& policy = {});

/// One ejection per loaded trap of the plane.
MovePlan plan_remove_all(const Occupancy& occupancy, const TrapLayout& layout, const PlaneDecomposition& planes,
                         int plane_index, const PlannerPolicy& policy = {});

/// Lossless replay. Throws ExecutabilityError naming the offending move.
Occupancy apply_plan_lossless(const Occupancy& occupancy, const MovePlan& plan);
Occupancy apply_plan_lossless(const Occupancy& occupancy, const AssemblyPlan& plan);

}  // namespace tweezer
