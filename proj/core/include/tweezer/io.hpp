#pragma once

#include "tweezer/assembler.hpp"
#include "tweezer/geometry.hpp"
#include "tweezer/hologram.hpp"
#include "tweezer/simulator.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tweezer {

/// Shortest decimal string that reads back to the same double.
std::string format_number(double value);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// { "name": str, "traps": [ { "x_um", "y_um", "z_um", "is_target" } ] }
std::string layout_to_json(const TrapLayout& layout);
/// Unknown keys are rejected; is_target defaults to true.
TrapLayout layout_from_json(const std::string& text, const LayoutLimits& limits = {});
TrapLayout read_layout(const std::filesystem::path& path, const LayoutLimits& limits = {});
void write_layout(const TrapLayout& layout, const std::filesystem::path& path);

/// { "planes": [ { "plane", "mt_z_um", "moves": [ { "kind", "from", "to", "exit_um", "path_um" } ] } ] }
std::string plan_to_json(const AssemblyPlan& plan);
AssemblyPlan plan_from_json(const std::string& text);

/// { "occupied": [bool, ...] }
std::string occupancy_to_json(const Occupancy& occupancy);
Occupancy occupancy_from_json(const std::string& text);

/// { "rms_deviation", "iterations", "converged", "per_trap": [...] }
std::string report_to_json(const UniformityReport& report);

/// Raw little-endian float32 samples plus a JSON sidecar at path + ".json".
void write_volume(const IntensityVolume& volume, const std::filesystem::path& path);
IntensityVolume read_volume(const std::filesystem::path& path);

/// One row per shot: shot,triggered,n_loaded,n_targets_filled,fill_fraction,duration_ms,moves
std::string stats_csv(const std::vector<ShotResult>& shots);
/// { "mean_fill", "std_fill", "defect_free_prob", "rep_rate_hz", ... }
std::string summary_json(const Statistics& stats);

/// Sidecar describing a synthesized stack: frame geometry and plane z values.
struct StackInfo {
  ImageFrame frame;
  std::vector<double> z_um;
  std::vector<std::string> images;  // file names relative to the sidecar
};
std::string stack_info_to_json(const StackInfo& info);
StackInfo stack_info_from_json(const std::string& text);

/// Experiment configuration document. "layout" is a file path (relative to
/// base_dir) or an inline layout object. Unknown keys are rejected.
ExperimentConfig experiment_config_from_json(const std::string& text, const std::filesystem::path& base_dir);
ExperimentConfig read_experiment_config(const std::filesystem::path& path);

}  // namespace tweezer
