#include "tweezer/hologram.hpp"
#include "tweezer/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace tweezer {

namespace {

using cplx = std::complex<double>;

// Pixel grid and Gaussian illumination, both separable in x and y.
struct SlmGrid {
  std::vector<double> xs;  // pixel centre x per column, um
  std::vector<double> ys;  // pixel centre y per row, um (row 0 at the top)
  std::vector<double> ax;  // illumination amplitude factor per column
  std::vector<double> ay;  // per row
  double amplitude_sum = 0.0;
  double lateral_coef = 0.0;  // 2 pi / (lambda f)
  double axial_coef = 0.0;    // pi / (lambda f^2), multiplied by z

  explicit SlmGrid(const SlmConfig& slm) {
    slm.validate();
    const double f = slm.focal_length_um();
    const double w = slm.input_beam_waist_mm * 1e3;
    lateral_coef = kTwoPi / (slm.wavelength_um * f);
    axial_coef = kPi / (slm.wavelength_um * f * f);
    xs.resize(static_cast<std::size_t>(slm.nx));
    ax.resize(xs.size());
    for (int c = 0; c < slm.nx; ++c) {
      const double x = (c - 0.5 * (slm.nx - 1)) * slm.pixel_pitch_um;
      xs[static_cast<std::size_t>(c)] = x;
      ax[static_cast<std::size_t>(c)] = std::exp(-x * x / (w * w));
    }
    ys.resize(static_cast<std::size_t>(slm.ny));
    ay.resize(ys.size());
    for (int r = 0; r < slm.ny; ++r) {
      const double y = (0.5 * (slm.ny - 1) - r) * slm.pixel_pitch_um;
      ys[static_cast<std::size_t>(r)] = y;
      ay[static_cast<std::size_t>(r)] = std::exp(-y * y / (w * w));
    }
    amplitude_sum = std::accumulate(ax.begin(), ax.end(), 0.0) * std::accumulate(ay.begin(), ay.end(), 0.0);
  }

  [[nodiscard]] std::size_t nx() const { return xs.size(); }
  [[nodiscard]] std::size_t ny() const { return ys.size(); }
};

// exp(i (lateral_coef * u * p + axial_coef * z * u^2)) sampled along one pixel axis,
// split into real and imaginary planes.
struct AxisPhasor {
  std::vector<double> re;
  std::vector<double> im;
};

AxisPhasor axis_phasor(const std::vector<double>& coords, double lateral_coef, double position,
                       double quad_coef) {
  AxisPhasor out;
  out.re.resize(coords.size());
  out.im.resize(coords.size());
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double u = coords[i];
    const double ph = lateral_coef * u * position + quad_coef * u * u;
    out.re[i] = std::cos(ph);
    out.im[i] = std::sin(ph);
  }
  return out;
}

// Per-trap separable phasor tables.
struct TrapTables {
  std::vector<AxisPhasor> x;  // one per trap, length nx
  std::vector<AxisPhasor> y;  // one per trap, length ny
};

TrapTables make_tables(const SlmGrid& grid, std::span<const Vec3> points) {
  TrapTables t;
  t.x.reserve(points.size());
  t.y.reserve(points.size());
  for (const auto& p : points) {
    const double quad = grid.axial_coef * p.z;
    t.x.push_back(axis_phasor(grid.xs, grid.lateral_coef, p.x, quad));
    t.y.push_back(axis_phasor(grid.ys, grid.lateral_coef, p.y, quad));
  }
  return t;
}

// Complex SLM field A * exp(i phi), split into planes.
struct Field {
  std::vector<double> re;
  std::vector<double> im;
};

Field field_from_mask(const PhaseMask& mask, const SlmGrid& grid) {
  Field f;
  f.re.resize(mask.phases.size());
  f.im.resize(mask.phases.size());
  for (std::size_t r = 0; r < grid.ny(); ++r) {
    for (std::size_t c = 0; c < grid.nx(); ++c) {
      const std::size_t k = r * grid.nx() + c;
      const double a = grid.ax[c] * grid.ay[r];
      f.re[k] = a * std::cos(mask.phases[k]);
      f.im[k] = a * std::sin(mask.phases[k]);
    }
  }
  return f;
}

// sum_c X[c] * E[c]; four interleaved accumulators give the compiler room to
// pipeline without changing the summation order between runs.
cplx dot_row(const AxisPhasor& x, const double* er, const double* ei, std::size_t n) {
  double sr[4] = {0, 0, 0, 0};
  double si[4] = {0, 0, 0, 0};
  std::size_t c = 0;
  for (; c + 4 <= n; c += 4) {
    for (std::size_t l = 0; l < 4; ++l) {
      const double xr = x.re[c + l];
      const double xi = x.im[c + l];
      sr[l] += xr * er[c + l] - xi * ei[c + l];
      si[l] += xr * ei[c + l] + xi * er[c + l];
    }
  }
  for (; c < n; ++c) {
    sr[0] += x.re[c] * er[c] - x.im[c] * ei[c];
    si[0] += x.re[c] * ei[c] + x.im[c] * er[c];
  }
  return {(sr[0] + sr[1]) + (sr[2] + sr[3]), (si[0] + si[1]) + (si[2] + si[3])};
}

// V_m for every trap. Rows are reduced independently and then summed in row
// order, so the result does not depend on the worker count.
std::vector<cplx> forward(const Field& field, const SlmGrid& grid, const TrapTables& tables, int threads) {
  const std::size_t m_count = tables.x.size();
  const std::size_t nx = grid.nx();
  std::vector<cplx> partial(grid.ny() * m_count);
  parallel_for(grid.ny(), threads, [&](std::size_t r) {
    const double* er = field.re.data() + r * nx;
    const double* ei = field.im.data() + r * nx;
    for (std::size_t m = 0; m < m_count; ++m) {
      const cplx row = dot_row(tables.x[m], er, ei, nx);
      partial[r * m_count + m] = cplx(tables.y[m].re[r], tables.y[m].im[r]) * row;
    }
  });
  std::vector<cplx> out(m_count);
  for (std::size_t r = 0; r < grid.ny(); ++r) {
    for (std::size_t m = 0; m < m_count; ++m) {
      out[m] += partial[r * m_count + m];
    }
  }
  for (auto& v : out) {
    v /= grid.amplitude_sum;
  }
  return out;
}

double wrap_phase(double phi) {
  double w = std::fmod(phi, kTwoPi);
  if (w < 0.0) {
    w += kTwoPi;
  }
  return w >= kTwoPi ? 0.0 : w;
}

// phi_j = arg sum_m c_m exp(-i Delta_mj), written into mask.
void backward(const std::vector<cplx>& coef, const SlmGrid& grid, const TrapTables& tables, PhaseMask& mask,
              int threads) {
  const std::size_t nx = grid.nx();
  parallel_for(grid.ny(), threads, [&](std::size_t r) {
    std::vector<double> sre(nx, 0.0);
    std::vector<double> sim(nx, 0.0);
    for (std::size_t m = 0; m < coef.size(); ++m) {
      // c_m * conj(Y_m[r]), then multiplied by conj(X_m[c]) per column
      const cplx cy = coef[m] * cplx(tables.y[m].re[r], -tables.y[m].im[r]);
      const double cr = cy.real();
      const double ci = cy.imag();
      const double* xr = tables.x[m].re.data();
      const double* xi = tables.x[m].im.data();
      for (std::size_t c = 0; c < nx; ++c) {
        sre[c] += cr * xr[c] + ci * xi[c];
        sim[c] += ci * xr[c] - cr * xi[c];
      }
    }
    for (std::size_t c = 0; c < nx; ++c) {
      mask.phases[r * nx + c] = wrap_phase(std::atan2(sim[c], sre[c]));
    }
  });
}

std::vector<double> intensities(const std::vector<cplx>& v) {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](cplx z) { return std::norm(z); });
  return out;
}

std::vector<double> normalized_to_mean(std::vector<double> values) {
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (mean > 0.0) {
    for (auto& v : values) {
      v /= mean;
    }
  }
  return values;
}

}  // namespace

void SlmConfig::validate() const {
  if (nx <= 0 || ny <= 0 || !(pixel_pitch_um > 0.0) || !(wavelength_um > 0.0) || !(focal_length_mm > 0.0) ||
      !(input_beam_waist_mm > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "SLM configuration fields must be positive");
  }
  if (static_cast<std::int64_t>(nx) * static_cast<std::int64_t>(ny) > (std::int64_t{1} << 22)) {
    throw Error(ErrorCode::invalid_argument, "SLM pixel count exceeds 2^22");
  }
}

double calibrated_input_waist_mm(const SlmConfig& slm, double focal_waist_um) {
  if (!(focal_waist_um > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "focal waist must be positive");
  }
  return slm.wavelength_um * slm.focal_length_um() / (kPi * focal_waist_um) * 1e-3;
}

PhaseMask uniform_mask(const SlmConfig& slm, double phase) {
  slm.validate();
  return {slm.nx, slm.ny,
          std::vector<double>(static_cast<std::size_t>(slm.nx) * static_cast<std::size_t>(slm.ny), wrap_phase(phase))};
}

double uniformity_rms(std::span<const double> values) {
  if (values.empty()) {
    throw Error(ErrorCode::invalid_argument, "uniformity_rms needs at least one value");
  }
  double sum = 0.0;
  for (double v : values) {
    if (!(v >= 0.0)) {
      throw Error(ErrorCode::invalid_argument, "intensities must be non-negative");
    }
    sum += v;
  }
  const double n = static_cast<double>(values.size());
  const double mean = sum / n;
  if (!(mean > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "intensities are all zero");
  }
  double var = 0.0;
  for (double v : values) {
    var += (v - mean) * (v - mean);
  }
  return std::sqrt(var / n) / mean;
}

void check_paraxial(std::span<const Vec3> points, const SlmConfig& slm) {
  const SlmGrid grid(slm);
  const double x_edge = 0.5 * slm.nx * slm.pixel_pitch_um;
  const double y_edge = 0.5 * slm.ny * slm.pixel_pitch_um;
  for (std::size_t m = 0; m < points.size(); ++m) {
    const Vec3 p = points[m];
    const double quad = 2.0 * grid.axial_coef * std::abs(p.z);
    const double step_x = (grid.lateral_coef * std::abs(p.x) + quad * x_edge) * slm.pixel_pitch_um;
    const double step_y = (grid.lateral_coef * std::abs(p.y) + quad * y_edge) * slm.pixel_pitch_um;
    if (!(step_x < kPi && step_y < kPi) || !(std::abs(p.z) <= 0.1 * slm.focal_length_um())) {
      throw Error(ErrorCode::paraxial_violation,
                  "point " + std::to_string(m) + " lies outside the paraxial validity region of the SLM");
    }
  }
}

std::vector<std::complex<double>> trap_amplitudes(const PhaseMask& mask, std::span<const Vec3> points,
                                                  const SlmConfig& slm, int threads) {
  const SlmGrid grid(slm);
  if (mask.nx != slm.nx || mask.ny != slm.ny ||
      mask.phases.size() != static_cast<std::size_t>(slm.nx) * static_cast<std::size_t>(slm.ny)) {
    throw Error(ErrorCode::dimension_mismatch, "phase mask does not match the SLM dimensions");
  }
  const Field field = field_from_mask(mask, grid);
  const std::size_t nx = grid.nx();
  std::vector<cplx> out(points.size());
  parallel_for(points.size(), threads, [&](std::size_t m) {
    const auto tables = make_tables(grid, points.subspan(m, 1));
    cplx sum;
    for (std::size_t r = 0; r < grid.ny(); ++r) {
      const cplx row = dot_row(tables.x[0], field.re.data() + r * nx, field.im.data() + r * nx, nx);
      sum += cplx(tables.y[0].re[r], tables.y[0].im[r]) * row;
    }
    out[m] = sum / grid.amplitude_sum;
  });
  return out;
}

std::pair<PhaseMask, UniformityReport> weighted_gs(std::span<const Vec3> points,
                                                   std::span<const double> target_intensity,
                                                   const SlmConfig& slm, const WgsConfig& wgs,
                                                   const PhaseMask* start) {
  if (points.empty()) {
    throw Error(ErrorCode::invalid_argument, "no traps to compute a hologram for");
  }
  if (target_intensity.size() != points.size()) {
    throw Error(ErrorCode::dimension_mismatch, "one target intensity per trap is required");
  }
  if (wgs.max_iters < 1 || !(wgs.target_rms > 0.0 && wgs.target_rms < 1.0) || !(wgs.weight_gain >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "invalid WGS configuration");
  }
  check_paraxial(points, slm);
  const SlmGrid grid(slm);
  const TrapTables tables = make_tables(grid, points);
  const std::size_t m_count = points.size();
  const int threads = resolve_thread_count(wgs.threads);

  // target amplitudes, normalized to unit mean intensity
  std::vector<double> target(target_intensity.begin(), target_intensity.end());
  for (double t : target) {
    if (!(t > 0.0)) {
      throw Error(ErrorCode::invalid_argument, "target intensities must be positive");
    }
  }
  target = normalized_to_mean(std::move(target));
  for (auto& t : target) {
    t = std::sqrt(t);
  }

  PhaseMask mask{slm.nx, slm.ny, std::vector<double>(grid.nx() * grid.ny(), 0.0)};
  if (start != nullptr) {
    if (start->nx != slm.nx || start->ny != slm.ny) {
      throw Error(ErrorCode::dimension_mismatch, "starting mask does not match the SLM dimensions");
    }
    mask = *start;
  } else {
    // superposition of the trap gratings with random relative phases
    std::mt19937_64 rng(wgs.seed);
    std::vector<cplx> coef(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
      const double th = kTwoPi * static_cast<double>(rng() >> 11) * 0x1.0p-53;
      coef[m] = std::polar(target[m], th);
    }
    backward(coef, grid, tables, mask, threads);
  }

  std::vector<double> weights(m_count, 1.0);
  PhaseMask best_mask = mask;
  std::vector<double> best_rel;
  double best_rms = std::numeric_limits<double>::infinity();
  int iterations = 0;

  for (int it = 1; it <= wgs.max_iters; ++it) {
    iterations = it;
    const auto v = forward(field_from_mask(mask, grid), grid, tables, threads);
    std::vector<double> ratio(m_count);
    std::vector<double> rel(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
      ratio[m] = std::max(std::abs(v[m]) / target[m], 1e-300);
      rel[m] = ratio[m] * ratio[m];
    }
    const double rms = uniformity_rms(rel);
    if (rms < best_rms) {
      best_rms = rms;
      best_mask = mask;
      best_rel = rel;
    }
    if (rms <= wgs.target_rms || it == wgs.max_iters) {
      break;
    }

    const double mean_ratio = std::accumulate(ratio.begin(), ratio.end(), 0.0) / static_cast<double>(m_count);
    std::vector<cplx> coef(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
      weights[m] *= std::pow(mean_ratio / ratio[m], wgs.weight_gain);
      const double mag = std::abs(v[m]);
      const cplx unit = mag > 0.0 ? v[m] / mag : cplx(1.0, 0.0);
      coef[m] = weights[m] * target[m] * unit;
    }
    backward(coef, grid, tables, mask, threads);
  }

  UniformityReport report;
  report.per_trap = normalized_to_mean(best_rel);
  report.rms_deviation = best_rms;
  report.iterations = iterations;
  report.converged = best_rms <= wgs.target_rms;
  return {std::move(best_mask), std::move(report)};
}

std::pair<PhaseMask, UniformityReport> compute_phase_mask(const TrapLayout& layout, const SlmConfig& slm,
                                                          const WgsConfig& wgs) {
  const auto points = layout.positions();
  const std::vector<double> uniform(points.size(), 1.0);
  return weighted_gs(points, uniform, slm, wgs, nullptr);
}

std::pair<PhaseMask, UniformityReport> closed_loop_refine(const PhaseMask& mask, const TrapLayout& layout,
                                                          const SlmConfig& slm, const WgsConfig& wgs,
                                                          std::span<const double> measured) {
  const auto points = layout.positions();
  if (measured.size() != points.size()) {
    throw Error(ErrorCode::dimension_mismatch, "one measured intensity per trap is required");
  }
  for (double m : measured) {
    if (!(m > 0.0)) {
      throw Error(ErrorCode::invalid_argument, "measured intensities must be positive");
    }
  }
  const double measured_rms = uniformity_rms(measured);
  UniformityReport unchanged;
  unchanged.per_trap = normalized_to_mean({measured.begin(), measured.end()});
  unchanged.rms_deviation = measured_rms;
  unchanged.iterations = 0;
  unchanged.converged = measured_rms <= wgs.target_rms;
  if (points.size() == 1 || measured_rms == 0.0) {
    return {mask, unchanged};
  }

  const auto model = intensities(trap_amplitudes(mask, points, slm, wgs.threads));
  const double mean_measured =
      std::accumulate(measured.begin(), measured.end(), 0.0) / static_cast<double>(measured.size());
  std::vector<double> response(points.size());
  std::vector<double> target(points.size());
  for (std::size_t m = 0; m < points.size(); ++m) {
    if (!(model[m] > 0.0)) {
      return {mask, unchanged};
    }
    response[m] = measured[m] / model[m];
    target[m] = model[m] * std::pow(mean_measured / measured[m], wgs.weight_gain);
  }

  auto [refined, report] = weighted_gs(points, target, slm, wgs, &mask);
  const auto refined_model = intensities(trap_amplitudes(refined, points, slm, wgs.threads));
  std::vector<double> predicted(points.size());
  for (std::size_t m = 0; m < points.size(); ++m) {
    predicted[m] = response[m] * refined_model[m];
  }
  const double predicted_rms = uniformity_rms(predicted);
  if (!(predicted_rms < measured_rms)) {
    return {mask, unchanged};
  }
  report.per_trap = normalized_to_mean(predicted);
  report.rms_deviation = predicted_rms;
  report.converged = predicted_rms <= wgs.target_rms;
  return {std::move(refined), std::move(report)};
}

IntensityVolume sample_intensity_volume(const PhaseMask& mask, const SlmConfig& slm, const SamplingRegion& region,
                                        int threads) {
  const SlmGrid grid(slm);
  if (mask.nx != slm.nx || mask.ny != slm.ny) {
    throw Error(ErrorCode::dimension_mismatch, "phase mask does not match the SLM dimensions");
  }
  if (region.nx < 1 || region.ny < 1 || region.nz < 1) {
    throw Error(ErrorCode::invalid_argument, "sampling resolution must be >= 1 along every axis");
  }
  const std::int64_t voxels = std::int64_t{region.nx} * region.ny * region.nz;
  if (voxels > kMaxVolumeVoxels) {
    throw Error(ErrorCode::budget_exceeded, "sampling volume of " + std::to_string(voxels) +
                                                " voxels exceeds the budget of " +
                                                std::to_string(kMaxVolumeVoxels));
  }

  IntensityVolume vol;
  vol.nx = region.nx;
  vol.ny = region.ny;
  vol.nz = region.nz;
  vol.voxel = {(region.max.x - region.min.x) / region.nx, (region.max.y - region.min.y) / region.ny,
               (region.max.z - region.min.z) / region.nz};
  vol.origin = region.min + 0.5 * vol.voxel;
  const Vec3 lo = vol.center_of(0, 0, 0);
  const Vec3 hi = vol.center_of(region.nx - 1, region.ny - 1, region.nz - 1);
  std::vector<Vec3> corners;
  for (double x : {lo.x, hi.x}) {
    for (double y : {lo.y, hi.y}) {
      for (double z : {lo.z, hi.z}) {
        corners.push_back({x, y, z});
      }
    }
  }
  check_paraxial(corners, slm);
  vol.data.assign(static_cast<std::size_t>(voxels), 0.0f);

  const Field field = field_from_mask(mask, grid);
  const std::size_t nxp = grid.nx();
  const std::size_t nyp = grid.ny();
  const auto vnx = static_cast<std::size_t>(region.nx);
  const auto vny = static_cast<std::size_t>(region.ny);
  std::vector<cplx> row_sums(nyp * vnx);

  for (int k = 0; k < region.nz; ++k) {
    const double z = vol.center_of(0, 0, k).z;
    const double quad = grid.axial_coef * z;
    std::vector<AxisPhasor> xph(vnx);
    for (std::size_t i = 0; i < vnx; ++i) {
      xph[i] = axis_phasor(grid.xs, grid.lateral_coef, vol.center_of(static_cast<int>(i), 0, k).x, quad);
    }
    std::vector<AxisPhasor> yph(vny);
    for (std::size_t j = 0; j < vny; ++j) {
      yph[j] = axis_phasor(grid.ys, grid.lateral_coef, vol.center_of(0, static_cast<int>(j), k).y, quad);
    }
    parallel_for(nyp, threads, [&](std::size_t r) {
      for (std::size_t i = 0; i < vnx; ++i) {
        row_sums[r * vnx + i] = dot_row(xph[i], field.re.data() + r * nxp, field.im.data() + r * nxp, nxp);
      }
    });
    parallel_for(vny, threads, [&](std::size_t j) {
      for (std::size_t i = 0; i < vnx; ++i) {
        cplx sum;
        for (std::size_t r = 0; r < nyp; ++r) {
          sum += cplx(yph[j].re[r], yph[j].im[r]) * row_sums[r * vnx + i];
        }
        const double v = std::norm(sum / grid.amplitude_sum);
        vol.data[(static_cast<std::size_t>(k) * vny + j) * vnx + i] = static_cast<float>(v);
      }
    });
  }

  const float peak = *std::max_element(vol.data.begin(), vol.data.end());
  if (peak > 0.0f) {
    for (auto& v : vol.data) {
      v /= peak;
    }
  }
  return vol;
}

}  // namespace tweezer
