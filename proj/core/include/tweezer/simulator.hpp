#pragma once

#include "tweezer/assembler.hpp"
#include "tweezer/geometry.hpp"
#include "tweezer/imaging.hpp"
#include "tweezer/physics.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace tweezer {

/// Per-shot random stream: mt19937_64 seeded from (seed, shot_index).
class ShotRng {
 public:
  ShotRng(std::uint64_t seed, std::uint64_t shot_index);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

struct TimingModel {
  double image_per_plane_ms = 60.0;
  double sort_per_plane_ms = 50.0;
  double exposure_ms = 50.0;
  double per_move_ms = 1.0;
  /// Length of one loading/monitoring cycle; occupancy is redrawn every cycle.
  double mot_dispersal_ms = 100.0;

  void validate() const;
};

enum class NoiseModel { none, poisson };

struct CameraModel {
  double pixel_scale_um = 0.5;
  double psf_sigma0_um = 0.5;
  double defocus_rayleigh_um = 4.0;
  double peak_counts = 200.0;
  double background_counts = 10.0;
  NoiseModel noise = NoiseModel::none;
  double margin_um = 5.0;  // border around the trap array in synthesized images

  void validate() const;
  /// Spot width and peak at axial defocus dz.
  [[nodiscard]] double sigma_at(double dz_um) const;
  [[nodiscard]] double peak_at(double dz_um) const;
};

/// Pixel grid shared by all images of a stack. Pixel (i, j) is centred at
/// (x0 + i * pixel, y0 + j * pixel).
struct ImageFrame {
  double x0_um = 0.0;
  double y0_um = 0.0;
  double pixel_um = 0.5;
  int width = 0;
  int height = 0;
};

/// Frame covering the lateral extent of the layout plus the camera margin.
ImageFrame frame_for_layout(const TrapLayout& layout, const CameraModel& camera);

enum class ExperimentMode { assemble, remove_all };

struct ExperimentConfig {
  explicit ExperimentConfig(TrapLayout layout_in, double epsilon_z_um = 1.0);

  TrapLayout layout;
  PlaneDecomposition planes;
  double p_load = 0.5;
  LossModel loss;
  TimingModel timing;
  CameraModel camera;
  PlannerPolicy policy;
  SafetyThresholds safety;
  double trigger_timeout_s = 10.0;
  std::uint64_t seed = 1;
  ExperimentMode mode = ExperimentMode::assemble;
  /// Axial offset of the moving tweezers from the plane being sorted.
  double mt_offset_um = 0.0;
  /// Decode the initial occupancy from synthesized images instead of reading
  /// it directly.
  bool detect_from_images = false;
  int threads = 0;

  /// Throws Error(invalid_argument) on out-of-range values and
  /// Error(layout_invalid) when crosstalk is enabled and the layout fails
  /// validate_mt_safety.
  void validate() const;
};

struct PhaseDurations {
  double loading_ms = 0.0;
  double initial_imaging_ms = 0.0;
  double sorting_ms = 0.0;
  double final_imaging_ms = 0.0;

  [[nodiscard]] double total_ms() const { return loading_ms + initial_imaging_ms + sorting_ms + final_imaging_ms; }
};

struct ShotResult {
  std::uint64_t shot = 0;
  bool triggered = false;
  bool infeasible = false;
  Occupancy initial;
  Occupancy final_occupancy;
  std::vector<std::size_t> moves_per_plane;  // indexed like the decomposition
  std::vector<std::size_t> targets_filled_per_plane;
  std::vector<std::size_t> targets_per_plane;
  PhaseDurations durations;
  double duration_ms = 0.0;
  std::size_t n_loaded = 0;
  std::size_t n_targets = 0;
  std::size_t n_targets_filled = 0;
  double fill_fraction = 0.0;
  bool success = false;

  [[nodiscard]] std::size_t total_moves() const;
};

/// Statistics over triggered shots; duration and rate include every shot.
struct Statistics {
  std::size_t shots = 0;
  std::size_t triggered_shots = 0;
  std::size_t infeasible_shots = 0;
  double mean_fill = 0.0;
  double std_fill = 0.0;  // sample standard deviation, 0 for a single shot
  std::vector<double> per_plane_fill;
  double defect_free_prob = 0.0;
  double mean_duration_ms = 0.0;
  double rep_rate_hz = 0.0;
  double mean_moves = 0.0;

  /// Standard error of mean_fill.
  [[nodiscard]] double fill_standard_error() const;
};

/// Independent Bernoulli(p_load) per trap, one draw per trap in index order.
Occupancy simulate_initial_load(const TrapLayout& layout, double p_load, ShotRng& rng);

ShotResult run_shot(const ExperimentConfig& config, std::uint64_t shot_index);

/// Runs shots [0, n_shots) in parallel; results are ordered by shot index and
/// do not depend on the worker count.
std::vector<ShotResult> run_shots(const ExperimentConfig& config, std::size_t n_shots);

Statistics summarize(const std::vector<ShotResult>& shots, std::size_t plane_count);

Statistics run_experiment(const ExperimentConfig& config, std::size_t n_shots);

/// Closed-form expected fill without crosstalk. Per plane p:
///   m_p = 1 - E[K | K >= T] / N     (K ~ Bin(N, p_load), N traps, T targets)
///   t_p = n_p * image + sum of sort times + p * image + exposure
///   F_p = eta^m_p * exp(-t_p / tau)
/// and the estimate is the target-weighted mean of F_p.
double analytic_fill_estimate(const ExperimentConfig& config);

/// Renders one image per z in z_list. Each occupied trap is a Gaussian spot
/// of width sigma(dz) and peak peak(dz) on a constant background, with
/// Poisson noise drawn from rng when the camera asks for it.
std::vector<Image2D> synthesize_fluorescence_stack(const Occupancy& occupancy, const TrapLayout& layout,
                                                   const CameraModel& camera, const std::vector<double>& z_list,
                                                   const ImageFrame& frame, ShotRng* rng = nullptr);

struct ThresholdPolicy {
  /// Fraction of the way from the background sum to the single-atom sum.
  double fraction = 0.5;
};

/// Image k of the stack belongs to plane k. Counts are summed over a square
/// window of +-ceil(1.5 sigma0 / pixel) pixels around each trap.
Occupancy detect_occupancy(const std::vector<Image2D>& stack, const TrapLayout& layout,
                           const PlaneDecomposition& planes, const CameraModel& camera, const ImageFrame& frame,
                           ThresholdPolicy policy = {});

/// Pixelwise mean of equally shaped stacks.
std::vector<Image2D> average_frames(const std::vector<std::vector<Image2D>>& stacks);

}  // namespace tweezer
