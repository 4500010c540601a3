#pragma once

#include "tweezer/common.hpp"
#include "tweezer/geometry.hpp"

#include <complex>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace tweezer {

/// SLM and focusing optics. Pixel coordinates are centred on the optical axis.
struct SlmConfig {
  int nx = 512;
  int ny = 512;
  double pixel_pitch_um = 20.0;
  double wavelength_um = 0.850;
  double focal_length_mm = 10.0;
  /// 1/e^2 intensity radius of the Gaussian illumination on the SLM. The
  /// default makes the single-trap focal waist 1.1 um (see calibrated_input_waist_mm).
  double input_beam_waist_mm = 2.4596673023292914;

  [[nodiscard]] double focal_length_um() const { return focal_length_mm * 1e3; }
  /// Throws Error(invalid_argument) on non-positive fields or nx*ny > 2^22.
  void validate() const;
};

/// Input waist that produces the requested focal 1/e^2 radius: lambda f / (pi w0).
double calibrated_input_waist_mm(const SlmConfig& slm, double focal_waist_um);

/// Phases in [0, 2pi), row-major, ny rows of nx pixels, row 0 at the top.
struct PhaseMask {
  int nx = 0;
  int ny = 0;
  std::vector<double> phases;

  [[nodiscard]] double at(int row, int col) const {
    return phases[static_cast<std::size_t>(row) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(col)];
  }
};

PhaseMask uniform_mask(const SlmConfig& slm, double phase);

struct WgsConfig {
  int max_iters = 100;
  double target_rms = 0.05;
  double weight_gain = 1.0;
  std::uint64_t seed = 1;
  int threads = 0;  // <= 0: default worker count
};

struct UniformityReport {
  std::vector<double> per_trap;  // intensities normalized to their mean
  double rms_deviation = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Population std / mean. Throws on empty input, negative values or zero mean.
double uniformity_rms(std::span<const double> intensities);

/// Checks that every point can be addressed without aliasing: the per-pixel
/// phase step of its transfer kernel must stay below pi.
void check_paraxial(std::span<const Vec3> points, const SlmConfig& slm);

/// Normalized complex field at each point:
///   V = sum_j A_j exp(i(phi_j + Delta_j(r))) / sum_j A_j
///   Delta_j(r) = (2 pi / lambda f)(x_j x + y_j y) + (pi z / lambda f^2)(x_j^2 + y_j^2)
std::vector<std::complex<double>> trap_amplitudes(const PhaseMask& mask, std::span<const Vec3> points,
                                                  const SlmConfig& slm, int threads = 0);

/// Weighted Gerchberg-Saxton for point traps. Returns the lowest-rms mask seen.
std::pair<PhaseMask, UniformityReport> compute_phase_mask(const TrapLayout& layout, const SlmConfig& slm,
                                                          const WgsConfig& wgs);

/// Same iteration with per-trap target intensities (relative) and an optional
/// starting mask in place of random phases.
std::pair<PhaseMask, UniformityReport> weighted_gs(std::span<const Vec3> points,
                                                   std::span<const double> target_intensity,
                                                   const SlmConfig& slm, const WgsConfig& wgs,
                                                   const PhaseMask* start);

/// Camera-feedback refinement. `measured` holds the observed per-trap peak
/// intensities for `mask`. Observed/model ratios are taken as a static
/// per-trap system response; the WGS targets are reweighted by
/// (mean / measured)^weight_gain and the solve is rerun from `mask`. Returns the
/// input mask unchanged unless the predicted observed rms decreases.
std::pair<PhaseMask, UniformityReport> closed_loop_refine(const PhaseMask& mask, const TrapLayout& layout,
                                                          const SlmConfig& slm, const WgsConfig& wgs,
                                                          std::span<const double> measured);

/// Axis-aligned sampling box; voxel centres sit at min + (i + 0.5) * (max - min) / n.
struct SamplingRegion {
  Vec3 min;
  Vec3 max;
  int nx = 1;
  int ny = 1;
  int nz = 1;
};

/// Largest voxel count sample_intensity_volume accepts.
inline constexpr std::int64_t kMaxVolumeVoxels = 100'000'000;

struct IntensityVolume {
  Vec3 origin;  // centre of voxel (0, 0, 0)
  Vec3 voxel;   // voxel size in um
  int nx = 0;
  int ny = 0;
  int nz = 0;
  std::vector<float> data;  // index = (k * ny + j) * nx + i

  [[nodiscard]] float at(int i, int j, int k) const {
    return data[(static_cast<std::size_t>(k) * static_cast<std::size_t>(ny) + static_cast<std::size_t>(j)) *
                    static_cast<std::size_t>(nx) +
                static_cast<std::size_t>(i)];
  }
  [[nodiscard]] Vec3 center_of(int i, int j, int k) const {
    return {origin.x + i * voxel.x, origin.y + j * voxel.y, origin.z + k * voxel.z};
  }
};

/// |V(r)|^2 at every voxel centre, peak-normalized to 1. Uses the separable
/// form of the transfer kernel, so a z slice costs O(pixels * nx + nx * ny * rows).
IntensityVolume sample_intensity_volume(const PhaseMask& mask, const SlmConfig& slm, const SamplingRegion& region,
                                        int threads = 0);

}  // namespace tweezer
