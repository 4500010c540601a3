#include "tweezer/simulator.hpp"
#include "tweezer/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace tweezer {

ShotRng::ShotRng(std::uint64_t seed, std::uint64_t shot_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(shot_index), static_cast<std::uint32_t>(shot_index >> 32)};
  engine_.seed(seq);
}

double ShotRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

void TimingModel::validate() const {
  if (!(image_per_plane_ms >= 0.0) || !(sort_per_plane_ms >= 0.0) || !(exposure_ms >= 0.0) ||
      !(per_move_ms >= 0.0) || !(mot_dispersal_ms > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "timing values must be non-negative and the cycle positive");
  }
  if (exposure_ms > image_per_plane_ms) {
    throw Error(ErrorCode::invalid_argument, "exposure_ms must not exceed image_per_plane_ms");
  }
}

void CameraModel::validate() const {
  if (!(pixel_scale_um > 0.0) || !(psf_sigma0_um > 0.0) || !(defocus_rayleigh_um > 0.0) || !(peak_counts > 0.0) ||
      !(background_counts >= 0.0) || !(margin_um >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "camera scales must be positive");
  }
}

double CameraModel::sigma_at(double dz_um) const {
  const double q = dz_um / defocus_rayleigh_um;
  return psf_sigma0_um * std::sqrt(1.0 + q * q);
}

double CameraModel::peak_at(double dz_um) const {
  const double q = dz_um / defocus_rayleigh_um;
  return peak_counts / (1.0 + q * q);
}

ImageFrame frame_for_layout(const TrapLayout& layout, const CameraModel& camera) {
  camera.validate();
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = min_x;
  double max_x = -min_x;
  double max_y = -min_x;
  for (const auto& t : layout.traps()) {
    min_x = std::min(min_x, t.position.x);
    min_y = std::min(min_y, t.position.y);
    max_x = std::max(max_x, t.position.x);
    max_y = std::max(max_y, t.position.y);
  }
  if (layout.size() == 0) {
    min_x = min_y = max_x = max_y = 0.0;
  }
  ImageFrame f;
  f.pixel_um = camera.pixel_scale_um;
  f.x0_um = std::floor((min_x - camera.margin_um) / f.pixel_um) * f.pixel_um;
  f.y0_um = std::floor((min_y - camera.margin_um) / f.pixel_um) * f.pixel_um;
  f.width = static_cast<int>(std::ceil((max_x + camera.margin_um - f.x0_um) / f.pixel_um)) + 1;
  f.height = static_cast<int>(std::ceil((max_y + camera.margin_um - f.y0_um) / f.pixel_um)) + 1;
  return f;
}

ExperimentConfig::ExperimentConfig(TrapLayout layout_in, double epsilon_z_um)
    : layout(std::move(layout_in)), planes(decompose_planes(layout, epsilon_z_um)) {}

void ExperimentConfig::validate() const {
  if (!(p_load > 0.0 && p_load <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "p_load must lie in (0, 1]");
  }
  if (!(loss.move_fidelity > 0.0 && loss.move_fidelity <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "move_fidelity must lie in (0, 1]");
  }
  if (!(loss.lifetime_s > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "lifetime_s must be positive");
  }
  if (!(trigger_timeout_s > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "trigger_timeout_s must be positive");
  }
  if (!std::isfinite(mt_offset_um)) {
    throw Error(ErrorCode::invalid_argument, "mt_offset_um must be finite");
  }
  timing.validate();
  camera.validate();
  if (planes.plane_of_trap(layout.size()).size() != layout.size()) {
    throw Error(ErrorCode::invalid_argument, "plane decomposition does not cover the layout");
  }
  if (loss.crosstalk_enabled) {
    const auto report = validate_mt_safety(layout, planes, safety);
    if (!report.pass()) {
      const auto& c = report.conflicts.front();
      throw Error(ErrorCode::layout_invalid,
                  "traps " + std::to_string(c.first) + " and " + std::to_string(c.second) +
                      " are too close for plane-by-plane sorting (" + std::to_string(report.conflicts.size()) +
                      " conflicts)");
    }
  }
}

std::size_t ShotResult::total_moves() const {
  std::size_t n = 0;
  for (auto m : moves_per_plane) {
    n += m;
  }
  return n;
}

double Statistics::fill_standard_error() const {
  return triggered_shots > 0 ? std_fill / std::sqrt(static_cast<double>(triggered_shots)) : 0.0;
}

Occupancy simulate_initial_load(const TrapLayout& layout, double p_load, ShotRng& rng) {
  if (!(p_load >= 0.0 && p_load <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "p_load must lie in [0, 1]");
  }
  Occupancy occ(layout.size(), false);
  for (std::size_t i = 0; i < occ.size(); ++i) {
    occ[i] = rng.uniform() < p_load;
  }
  return occ;
}

namespace {

bool every_plane_ready(const Occupancy& occ, const std::vector<int>& plane_of,
                       const std::vector<std::size_t>& targets_per_plane) {
  std::vector<std::size_t> loaded(targets_per_plane.size(), 0);
  for (std::size_t t = 0; t < occ.size(); ++t) {
    if (occ[t]) {
      ++loaded[static_cast<std::size_t>(plane_of[t])];
    }
  }
  for (std::size_t p = 0; p < loaded.size(); ++p) {
    if (loaded[p] < targets_per_plane[p]) {
      return false;
    }
  }
  return true;
}

ShotResult run_shot_unchecked(const ExperimentConfig& config, std::uint64_t shot_index) {
  const TrapLayout& layout = config.layout;
  const auto& planes = config.planes.planes;
  const std::size_t n_planes = planes.size();
  const std::vector<int> plane_of = config.planes.plane_of_trap(layout.size());
  ShotRng rng(config.seed, shot_index);

  ShotResult r;
  r.shot = shot_index;
  r.moves_per_plane.assign(n_planes, 0);
  r.targets_filled_per_plane.assign(n_planes, 0);
  r.targets_per_plane.assign(n_planes, 0);
  for (std::size_t t = 0; t < layout.size(); ++t) {
    if (layout[t].is_target) {
      ++r.targets_per_plane[static_cast<std::size_t>(plane_of[t])];
      ++r.n_targets;
    }
  }

  // Loading: redraw every monitoring cycle until every plane can be assembled.
  const double cycle = config.timing.mot_dispersal_ms;
  const auto max_cycles =
      std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(config.trigger_timeout_s * 1e3 / cycle + 1e-9)));
  Occupancy occ;
  std::int64_t cycles = 0;
  bool ready = false;
  while (cycles < max_cycles && !ready) {
    ++cycles;
    occ = simulate_initial_load(layout, config.p_load, rng);
    ready = config.mode == ExperimentMode::remove_all || every_plane_ready(occ, plane_of, r.targets_per_plane);
  }
  r.durations.loading_ms = static_cast<double>(cycles) * cycle;
  r.initial = occ;
  r.n_loaded = static_cast<std::size_t>(std::count(occ.begin(), occ.end(), true));
  if (!ready) {
    r.final_occupancy = occ;
    r.duration_ms = r.durations.total_ms();
    return r;
  }
  r.triggered = true;
  r.durations.initial_imaging_ms = static_cast<double>(n_planes) * config.timing.image_per_plane_ms;

  Occupancy known = occ;
  if (config.detect_from_images) {
    const ImageFrame frame = frame_for_layout(layout, config.camera);
    std::vector<double> z_list;
    for (const auto& p : planes) {
      z_list.push_back(p.z_center_um);
    }
    const auto stack = synthesize_fluorescence_stack(occ, layout, config.camera, z_list, frame, &rng);
    known = detect_occupancy(stack, layout, config.planes, config.camera, frame);
  }

  AssemblyPlan plan;
  try {
    if (config.mode == ExperimentMode::assemble) {
      plan = plan_assembly(known, layout, config.planes, config.policy);
    } else {
      for (std::size_t p = 0; p < n_planes; ++p) {
        plan.planes.push_back(plan_remove_all(known, layout, config.planes, static_cast<int>(p), config.policy));
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::infeasible && e.code() != ErrorCode::insufficient_atoms) {
      throw;
    }
    r.infeasible = true;
    plan.planes.clear();
  }

  const double eta = config.loss.move_fidelity;
  const bool offset_mt = std::abs(config.mt_offset_um) > 1e-9;
  for (const MovePlan& mp : plan.planes) {
    const double mt_z = mp.mt_z_um + config.mt_offset_um;
    const auto plane_idx = static_cast<std::size_t>(mp.plane_index);
    for (const Move& m : mp.moves) {
      if (m.kind == MoveKind::transfer) {
        if (occ[m.from]) {
          occ[m.from] = false;
          if (rng.uniform() < eta) {
            // a second atom in the same trap means both are lost
            occ[*m.to] = !occ[*m.to];
          }
        }
      } else if (occ[m.from]) {
        if (!offset_mt || rng.uniform() < mt_pass_loss(std::abs(config.mt_offset_um), 0.0, config.loss.crosstalk)) {
          occ[m.from] = false;
        }
      }
      if (!config.loss.crosstalk_enabled) {
        continue;
      }
      for (std::size_t t = 0; t < layout.size(); ++t) {
        if (!occ[t] || t == m.from) {
          continue;
        }
        const bool same_plane = static_cast<std::size_t>(plane_of[t]) == plane_idx;
        if (same_plane && (!offset_mt || (m.to && *m.to == t))) {
          continue;
        }
        const Vec3 p = layout[t].position;
        const double loss =
            mt_pass_loss(std::abs(p.z - mt_z), lateral_distance_to_polyline(p, m.path), config.loss.crosstalk);
        if (loss > 0.0 && rng.uniform() < loss) {
          occ[t] = false;
        }
      }
    }
    r.moves_per_plane[plane_idx] = mp.moves.size();
    r.durations.sorting_ms += std::max(config.timing.sort_per_plane_ms,
                                       static_cast<double>(mp.moves.size()) * config.timing.per_move_ms);
  }
  r.durations.final_imaging_ms = static_cast<double>(n_planes) * config.timing.image_per_plane_ms;

  // Lifetime: each atom is held from the freeze until its plane's final exposure.
  if (std::isfinite(config.loss.lifetime_s)) {
    const double base = r.durations.initial_imaging_ms + r.durations.sorting_ms + config.timing.exposure_ms;
    for (std::size_t t = 0; t < layout.size(); ++t) {
      if (!occ[t]) {
        continue;
      }
      const double held_ms = base + static_cast<double>(plane_of[t]) * config.timing.image_per_plane_ms;
      if (!(rng.uniform() < survival(held_ms * 1e-3, config.loss.lifetime_s))) {
        occ[t] = false;
      }
    }
  }

  r.final_occupancy = occ;
  for (std::size_t t = 0; t < layout.size(); ++t) {
    if (layout[t].is_target && occ[t]) {
      ++r.targets_filled_per_plane[static_cast<std::size_t>(plane_of[t])];
      ++r.n_targets_filled;
    }
  }
  r.fill_fraction =
      r.n_targets > 0 ? static_cast<double>(r.n_targets_filled) / static_cast<double>(r.n_targets) : 1.0;
  r.success = r.n_targets_filled == r.n_targets;
  r.duration_ms = r.durations.total_ms();
  return r;
}

}  // namespace

ShotResult run_shot(const ExperimentConfig& config, std::uint64_t shot_index) {
  config.validate();
  return run_shot_unchecked(config, shot_index);
}

std::vector<ShotResult> run_shots(const ExperimentConfig& config, std::size_t n_shots) {
  if (n_shots == 0) {
    throw Error(ErrorCode::invalid_argument, "n_shots must be >= 1");
  }
  config.validate();
  std::vector<ShotResult> results(n_shots);
  parallel_for(n_shots, resolve_thread_count(config.threads),
               [&](std::size_t i) { results[i] = run_shot_unchecked(config, i); });
  return results;
}

Statistics summarize(const std::vector<ShotResult>& shots, std::size_t plane_count) {
  Statistics s;
  s.shots = shots.size();
  s.per_plane_fill.assign(plane_count, 0.0);
  double sum_fill = 0.0;
  double sum_duration = 0.0;
  double sum_moves = 0.0;
  std::size_t defect_free = 0;
  for (const auto& r : shots) {
    sum_duration += r.duration_ms;
    if (r.infeasible) {
      ++s.infeasible_shots;
    }
    if (!r.triggered) {
      continue;
    }
    ++s.triggered_shots;
    sum_fill += r.fill_fraction;
    sum_moves += static_cast<double>(r.total_moves());
    defect_free += r.success ? 1 : 0;
    for (std::size_t p = 0; p < plane_count && p < r.targets_per_plane.size(); ++p) {
      s.per_plane_fill[p] += r.targets_per_plane[p] > 0 ? static_cast<double>(r.targets_filled_per_plane[p]) /
                                                              static_cast<double>(r.targets_per_plane[p])
                                                        : 1.0;
    }
  }
  if (s.shots > 0) {
    s.mean_duration_ms = sum_duration / static_cast<double>(s.shots);
    s.rep_rate_hz = s.mean_duration_ms > 0.0 ? 1000.0 / s.mean_duration_ms : 0.0;
  }
  if (s.triggered_shots == 0) {
    return s;
  }
  const auto n = static_cast<double>(s.triggered_shots);
  s.mean_fill = sum_fill / n;
  s.mean_moves = sum_moves / n;
  s.defect_free_prob = static_cast<double>(defect_free) / n;
  for (auto& f : s.per_plane_fill) {
    f /= n;
  }
  if (s.triggered_shots > 1) {
    double ss = 0.0;
    for (const auto& r : shots) {
      if (r.triggered) {
        ss += (r.fill_fraction - s.mean_fill) * (r.fill_fraction - s.mean_fill);
      }
    }
    s.std_fill = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

Statistics run_experiment(const ExperimentConfig& config, std::size_t n_shots) {
  return summarize(run_shots(config, n_shots), config.planes.plane_count());
}

namespace {

// E[K | K >= t] for K ~ Bin(n, p).
double conditional_binomial_mean(std::size_t n, std::size_t t, double p) {
  if (p >= 1.0) {
    return static_cast<double>(n);
  }
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  double mass = 0.0;
  double first = 0.0;
  for (std::size_t k = t; k <= n; ++k) {
    const double kd = static_cast<double>(k);
    const double nd = static_cast<double>(n);
    const double logpmf =
        std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0) + kd * lp + (nd - kd) * lq;
    const double pmf = std::exp(logpmf);
    mass += pmf;
    first += kd * pmf;
  }
  if (!(mass > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "trigger condition has zero probability");
  }
  return first / mass;
}

}  // namespace

double analytic_fill_estimate(const ExperimentConfig& config) {
  if (config.loss.crosstalk_enabled) {
    throw Error(ErrorCode::invalid_argument, "analytic fill estimate requires crosstalk to be disabled");
  }
  config.validate();
  const auto& planes = config.planes.planes;
  const auto n_planes = static_cast<double>(planes.size());
  std::vector<std::size_t> targets(planes.size(), 0);
  std::size_t planes_with_targets = 0;
  for (std::size_t p = 0; p < planes.size(); ++p) {
    for (std::size_t t : planes[p].traps) {
      targets[p] += config.layout[t].is_target ? 1 : 0;
    }
    planes_with_targets += targets[p] > 0 ? 1 : 0;
  }
  const auto& timing = config.timing;
  const double sorting = static_cast<double>(planes_with_targets) * timing.sort_per_plane_ms;
  double weighted = 0.0;
  std::size_t total = 0;
  for (std::size_t p = 0; p < planes.size(); ++p) {
    if (targets[p] == 0) {
      continue;
    }
    const std::size_t n = planes[p].traps.size();
    const double moved = 1.0 - conditional_binomial_mean(n, targets[p], config.p_load) / static_cast<double>(n);
    const double held_ms =
        n_planes * timing.image_per_plane_ms + sorting + static_cast<double>(p) * timing.image_per_plane_ms +
        timing.exposure_ms;
    const double life = std::isfinite(config.loss.lifetime_s) ? survival(held_ms * 1e-3, config.loss.lifetime_s) : 1.0;
    weighted += static_cast<double>(targets[p]) * std::pow(config.loss.move_fidelity, moved) * life;
    total += targets[p];
  }
  return total > 0 ? weighted / static_cast<double>(total) : 1.0;
}

std::vector<Image2D> synthesize_fluorescence_stack(const Occupancy& occupancy, const TrapLayout& layout,
                                                   const CameraModel& camera, const std::vector<double>& z_list,
                                                   const ImageFrame& frame, ShotRng* rng) {
  camera.validate();
  if (z_list.empty()) {
    throw Error(ErrorCode::invalid_argument, "z_list must not be empty");
  }
  if (occupancy.size() != layout.size()) {
    throw Error(ErrorCode::dimension_mismatch, "occupancy does not match the layout");
  }
  if (camera.noise == NoiseModel::poisson && rng == nullptr) {
    throw Error(ErrorCode::invalid_argument, "Poisson noise needs a random stream");
  }
  std::vector<Image2D> stack;
  stack.reserve(z_list.size());
  for (double z : z_list) {
    Image2D img(frame.width, frame.height, camera.background_counts);
    for (std::size_t t = 0; t < layout.size(); ++t) {
      if (!occupancy[t]) {
        continue;
      }
      const Vec3 p = layout[t].position;
      const double dz = p.z - z;
      const double sigma = camera.sigma_at(dz);
      const double amp = camera.peak_at(dz);
      const double reach = 5.0 * sigma;
      const int i0 = std::max(0, static_cast<int>(std::floor((p.x - reach - frame.x0_um) / frame.pixel_um)));
      const int i1 = std::min(frame.width - 1, static_cast<int>(std::ceil((p.x + reach - frame.x0_um) / frame.pixel_um)));
      const int j0 = std::max(0, static_cast<int>(std::floor((p.y - reach - frame.y0_um) / frame.pixel_um)));
      const int j1 =
          std::min(frame.height - 1, static_cast<int>(std::ceil((p.y + reach - frame.y0_um) / frame.pixel_um)));
      const double inv = 1.0 / (2.0 * sigma * sigma);
      for (int j = j0; j <= j1; ++j) {
        const double dy = frame.y0_um + j * frame.pixel_um - p.y;
        for (int i = i0; i <= i1; ++i) {
          const double dx = frame.x0_um + i * frame.pixel_um - p.x;
          img.at(i, j) += amp * std::exp(-(dx * dx + dy * dy) * inv);
        }
      }
    }
    if (camera.noise == NoiseModel::poisson) {
      for (double& v : img.pixels) {
        if (v > 0.0) {
          std::poisson_distribution<long> dist(v);
          v = static_cast<double>(dist(rng->engine()));
        } else {
          v = 0.0;
        }
      }
    }
    stack.push_back(std::move(img));
  }
  return stack;
}

Occupancy detect_occupancy(const std::vector<Image2D>& stack, const TrapLayout& layout,
                           const PlaneDecomposition& planes, const CameraModel& camera, const ImageFrame& frame,
                           ThresholdPolicy policy) {
  camera.validate();
  if (stack.size() != planes.planes.size()) {
    throw Error(ErrorCode::dimension_mismatch, "stack has " + std::to_string(stack.size()) + " images for " +
                                                   std::to_string(planes.planes.size()) + " planes");
  }
  for (const auto& img : stack) {
    if (img.width != frame.width || img.height != frame.height) {
      throw Error(ErrorCode::dimension_mismatch, "image size does not match the camera frame");
    }
  }
  if (!(policy.fraction > 0.0 && policy.fraction < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "threshold fraction must lie in (0, 1)");
  }
  const int half = static_cast<int>(std::ceil(1.5 * camera.psf_sigma0_um / frame.pixel_um));
  Occupancy out(layout.size(), false);
  for (std::size_t p = 0; p < planes.planes.size(); ++p) {
    const Image2D& img = stack[p];
    for (std::size_t t : planes.planes[p].traps) {
      const Vec3 pos = layout[t].position;
      const double dz = pos.z - planes.planes[p].z_center_um;
      const double sigma = camera.sigma_at(dz);
      const double amp = camera.peak_at(dz);
      const auto ci = static_cast<int>(std::lround((pos.x - frame.x0_um) / frame.pixel_um));
      const auto cj = static_cast<int>(std::lround((pos.y - frame.y0_um) / frame.pixel_um));
      double sum = 0.0;
      double expected_signal = 0.0;
      double expected_background = 0.0;
      for (int j = cj - half; j <= cj + half; ++j) {
        for (int i = ci - half; i <= ci + half; ++i) {
          if (i < 0 || j < 0 || i >= img.width || j >= img.height) {
            continue;
          }
          const double dx = frame.x0_um + i * frame.pixel_um - pos.x;
          const double dy = frame.y0_um + j * frame.pixel_um - pos.y;
          sum += img.at(i, j);
          expected_background += camera.background_counts;
          expected_signal += amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
      }
      if (!(expected_signal > 0.0) || !(expected_signal > expected_background * 1e-12)) {
        throw Error(ErrorCode::calibration_failed, "single-atom signal does not exceed the background");
      }
      out[t] = sum > expected_background + policy.fraction * expected_signal;
    }
  }
  return out;
}

std::vector<Image2D> average_frames(const std::vector<std::vector<Image2D>>& stacks) {
  if (stacks.empty()) {
    throw Error(ErrorCode::invalid_argument, "average_frames needs at least one stack");
  }
  std::vector<Image2D> out = stacks.front();
  for (std::size_t s = 1; s < stacks.size(); ++s) {
    if (stacks[s].size() != out.size()) {
      throw Error(ErrorCode::dimension_mismatch, "stacks differ in length");
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
      const auto& img = stacks[s][k];
      if (img.width != out[k].width || img.height != out[k].height) {
        throw Error(ErrorCode::dimension_mismatch, "frames differ in size");
      }
      for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        out[k].pixels[i] += img.pixels[i];
      }
    }
  }
  const auto n = static_cast<double>(stacks.size());
  for (auto& img : out) {
    for (double& v : img.pixels) {
      v /= n;
    }
  }
  return out;
}

}  // namespace tweezer
