#include "cli.hpp"

#include "tweezer/assembler.hpp"
#include "tweezer/geometry.hpp"
#include "tweezer/hologram.hpp"
#include "tweezer/imaging.hpp"
#include "tweezer/io.hpp"
#include "tweezer/parallel.hpp"
#include "tweezer/physics.hpp"
#include "tweezer/simulator.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>

namespace tweezer::cli {

namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

/// Input rejected by the command line itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::infeasible:
    case ErrorCode::insufficient_atoms:
    case ErrorCode::calibration_failed:
      return kInfeasible;
    default:
      return kInvalidInput;
  }
}

void report_error(std::ostream& err, const std::string& code, const std::string& detail) {
  err << Json{{"error", code}, {"detail", detail}}.dump() << '\n';
}

std::vector<double> parse_list(const std::string& text, std::size_t expected, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError(what + " expects comma-separated numbers");
    }
    if (used != item.size()) {
      throw UsageError(what + " expects comma-separated numbers");
    }
    out.push_back(v);
  }
  if (out.size() != expected) {
    throw UsageError(what + " expects " + std::to_string(expected) + " values");
  }
  return out;
}

/// start:stop:step, inclusive of stop when it lies on the grid.
std::vector<double> parse_range(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      std::size_t used = 0;
      parts.push_back(std::stod(item, &used));
      if (used != item.size()) {
        throw UsageError("bad number");
      }
    } catch (const std::exception&) {
      throw UsageError("range must look like start:stop:step");
    }
  }
  if (parts.size() != 3 || !(parts[2] > 0.0) || parts[1] < parts[0]) {
    throw UsageError("range must look like start:stop:step with step > 0 and stop >= start");
  }
  const auto n = static_cast<std::size_t>(std::floor((parts[1] - parts[0]) / parts[2] + 1e-9)) + 1;
  if (n > 1'000'000) {
    throw UsageError("range has too many points");
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = parts[0] + static_cast<double>(i) * parts[2];
  }
  return out;
}

void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

LayoutLimits limits_with(std::size_t max_traps) {
  LayoutLimits l;
  l.max_traps = max_traps;
  return l;
}

// ---------------------------------------------------------------- gen-geometry

struct GenGeometryOptions {
  std::string preset;
  std::vector<int> n;
  std::vector<double> spacing;
  int sites = 60;
  double scale = 20.0;
  double reservoir = 0.0;
  double epsilon_z = 1.0;
  std::string import_path;
  bool rotate_fix = false;
  double z_safe = 17.0;
  double r_safe = 3.0;
  std::size_t max_traps = 200;
  std::string output;
};

int cmd_gen_geometry(const GenGeometryOptions& o, std::ostream& out) {
  const LayoutLimits limits = limits_with(o.max_traps);
  std::optional<TrapLayout> layout;
  if (!o.import_path.empty()) {
    if (!o.preset.empty()) {
      throw UsageError("--preset and --import are mutually exclusive");
    }
    layout = read_layout(o.import_path, limits);
  } else {
    if (o.preset.empty()) {
      throw UsageError("one of --preset or --import is required");
    }
    const auto preset = parse_preset(o.preset);
    if (!preset) {
      throw UsageError("unknown preset '" + o.preset + "'");
    }
    PresetParams p;
    p.limits = limits;
    p.sites = o.sites;
    p.scale_um = o.scale;
    p.reservoir_factor = o.reservoir;
    p.epsilon_z_um = o.epsilon_z;
    for (std::size_t i = 0; i < o.n.size() && i < 3; ++i) {
      p.counts[i] = o.n[i];
    }
    for (std::size_t i = 0; i < o.spacing.size() && i < 3; ++i) {
      p.spacing_um[i] = o.spacing[i];
    }
    layout = generate_preset(*preset, p);
  }

  Json summary{{"name", layout->name()}, {"traps", layout->size()}, {"targets", layout->target_count()}};
  if (o.rotate_fix) {
    const SafetyThresholds thresholds{o.z_safe, o.r_safe};
    const auto suggestion = suggest_rotation(*layout, thresholds, 45.0, o.epsilon_z);
    if (!suggestion) {
      throw Error(ErrorCode::layout_invalid, "no rotation within 45 degrees makes the layout pass the safety check");
    }
    if (suggestion->angle_deg != 0.0) {
      layout = rotate_layout(*layout, suggestion->axis, suggestion->angle_deg);
    }
    summary["rotation"] = Json{{"axis", suggestion->axis == Axis::x ? "x" : "y"}, {"angle_deg", suggestion->angle_deg}};
  }
  const auto planes = decompose_planes(*layout, o.epsilon_z);
  summary["planes"] = planes.plane_count();
  summary["mt_safe"] = validate_mt_safety(*layout, planes, {o.z_safe, o.r_safe}).pass();
  if (o.output.empty() || o.output == "-") {
    out << layout_to_json(*layout);
  } else {
    write_layout(*layout, o.output);
    out << summary.dump() << '\n';
  }
  return kOk;
}

// -------------------------------------------------------------------- hologram

struct HologramOptions {
  std::string layout;
  std::string mask;
  std::string report;
  std::string volume_box;
  std::string volume_res;
  std::string volume_out;
  std::string measured;
  int iters = 100;
  double target_rms = 0.05;
  double gain = 1.0;
  std::uint64_t seed = 1;
  int threads = 0;
  std::size_t max_traps = 200;
  SlmConfig slm;
};

int cmd_hologram(const HologramOptions& o, std::ostream& out) {
  const TrapLayout layout = read_layout(o.layout, limits_with(o.max_traps));
  WgsConfig wgs;
  wgs.max_iters = o.iters;
  wgs.target_rms = o.target_rms;
  wgs.weight_gain = o.gain;
  wgs.seed = o.seed;
  wgs.threads = o.threads;
  auto [mask, report] = compute_phase_mask(layout, o.slm, wgs);
  if (!o.measured.empty()) {
    const Json m = Json::parse(read_text_file(o.measured));
    const auto values = m.get<std::vector<double>>();
    std::tie(mask, report) = closed_loop_refine(mask, layout, o.slm, wgs, values);
  }
  if (!o.mask.empty()) {
    export_phase_pgm(mask, o.mask);
  }
  if (!o.report.empty()) {
    write_text_file(o.report, report_to_json(report));
  }
  if (!o.volume_box.empty()) {
    if (o.volume_out.empty()) {
      throw UsageError("--volume needs --volume-out");
    }
    const auto box = parse_list(o.volume_box, 6, "--volume");
    const auto res = parse_list(o.volume_res.empty() ? "64,64,32" : o.volume_res, 3, "--volume-res");
    SamplingRegion region;
    region.min = {box[0], box[1], box[2]};
    region.max = {box[3], box[4], box[5]};
    region.nx = static_cast<int>(res[0]);
    region.ny = static_cast<int>(res[1]);
    region.nz = static_cast<int>(res[2]);
    write_volume(sample_intensity_volume(mask, o.slm, region, o.threads), o.volume_out);
  }
  out << Json{{"rms", report.rms_deviation},
              {"iterations", report.iterations},
              {"converged", report.converged}}
             .dump()
      << '\n';
  return report.converged ? kOk : kQualityMissed;
}

// ------------------------------------------------------------------ render-mip

struct RenderMipOptions {
  std::vector<std::string> inputs;
  std::string output;
};

int cmd_render_mip(const RenderMipOptions& o, std::ostream& out) {
  std::vector<Image2D> images;
  int maxval = 255;
  for (const auto& in : o.inputs) {
    if (fs::exists(in + ".json")) {
      const auto volume = read_volume(in);
      const float peak = volume.data.empty() ? 0.0f : *std::max_element(volume.data.begin(), volume.data.end());
      const double scale = peak > 0.0f ? 65535.0 / peak : 0.0;
      for (auto& slice : volume_slices(volume)) {
        for (double& v : slice.pixels) {
          v = std::clamp(std::round(v * scale), 0.0, 65535.0);
        }
        images.push_back(std::move(slice));
      }
      maxval = 65535;
    } else {
      const auto pgm = read_pgm(in);
      maxval = std::max(maxval, pgm.maxval);
      images.push_back(from_pgm(pgm));
    }
  }
  const Image2D mip = max_intensity_projection(images);
  PgmImage pgm = to_pgm16(mip, 1.0);
  pgm.maxval = maxval;
  for (auto& s : pgm.samples) {
    s = static_cast<std::uint16_t>(std::min<int>(s, maxval));
  }
  write_pgm(pgm, o.output);
  out << Json{{"width", mip.width}, {"height", mip.height}, {"images", images.size()}}.dump() << '\n';
  return kOk;
}

// ------------------------------------------------------------ simulate-loading

struct CameraOptions {
  CameraModel camera;
  std::string noise = "none";

  [[nodiscard]] CameraModel model() const {
    CameraModel c = camera;
    if (noise != "none" && noise != "poisson") {
      throw UsageError("--noise must be none or poisson");
    }
    c.noise = noise == "poisson" ? NoiseModel::poisson : NoiseModel::none;
    return c;
  }
};

struct SimulateLoadingOptions {
  std::string layout;
  double p_load = 0.5;
  std::uint64_t seed = 1;
  std::uint64_t shot = 0;
  double epsilon_z = 1.0;
  std::size_t max_traps = 200;
  std::string output;
  std::string stack_dir;
  CameraOptions camera;
};

int cmd_simulate_loading(const SimulateLoadingOptions& o, std::ostream& out) {
  const TrapLayout layout = read_layout(o.layout, limits_with(o.max_traps));
  if (!(o.p_load >= 0.0 && o.p_load <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "p_load must lie in [0, 1]");
  }
  ShotRng rng(o.seed, o.shot);
  const Occupancy occ = simulate_initial_load(layout, o.p_load, rng);
  write_or_print(o.output, occupancy_to_json(occ), out);
  if (!o.stack_dir.empty()) {
    const CameraModel camera = o.camera.model();
    const auto planes = decompose_planes(layout, o.epsilon_z);
    const ImageFrame frame = frame_for_layout(layout, camera);
    StackInfo info;
    info.frame = frame;
    for (const auto& p : planes.planes) {
      info.z_um.push_back(p.z_center_um);
    }
    const auto stack = synthesize_fluorescence_stack(occ, layout, camera, info.z_um, frame, &rng);
    fs::create_directories(o.stack_dir);
    for (std::size_t k = 0; k < stack.size(); ++k) {
      const std::string name = "plane_" + std::to_string(k) + ".pgm";
      write_pgm(to_pgm16(stack[k]), fs::path(o.stack_dir) / name);
      info.images.push_back(name);
    }
    write_text_file(fs::path(o.stack_dir) / "stack.json", stack_info_to_json(info));
  }
  return kOk;
}

// --------------------------------------------------------------- plan-assembly

struct PolicyOptions {
  std::string metric = "euclidean";
  std::string method = "hungarian";
  double collision_radius = 2.0;
  double exit_distance = 20.0;
  double crosstalk_window = 17.0;
  double crosstalk_radius = 2.0;

  [[nodiscard]] PlannerPolicy policy() const {
    PlannerPolicy p;
    if (metric != "euclidean" && metric != "squared_euclidean") {
      throw UsageError("--metric must be euclidean or squared_euclidean");
    }
    if (method != "hungarian" && method != "greedy") {
      throw UsageError("--method must be hungarian or greedy");
    }
    p.metric = metric == "euclidean" ? CostMetric::euclidean : CostMetric::squared_euclidean;
    p.method = method == "hungarian" ? AssignmentMethod::hungarian : AssignmentMethod::greedy;
    p.collision_radius_um = collision_radius;
    p.exit_distance_um = exit_distance;
    p.crosstalk_window_um = crosstalk_window;
    p.crosstalk_radius_um = crosstalk_radius;
    return p;
  }
};

struct PlanAssemblyOptions {
  std::string layout;
  std::string occupancy;
  std::string output;
  double epsilon_z = 1.0;
  std::size_t max_traps = 200;
  int remove_all = -1;
  PolicyOptions policy;
};

int cmd_plan_assembly(const PlanAssemblyOptions& o, std::ostream& out) {
  const TrapLayout layout = read_layout(o.layout, limits_with(o.max_traps));
  const Occupancy occ = occupancy_from_json(read_text_file(o.occupancy));
  if (occ.size() != layout.size()) {
    throw Error(ErrorCode::dimension_mismatch, "occupancy length does not match the layout");
  }
  const auto planes = decompose_planes(layout, o.epsilon_z);
  AssemblyPlan plan;
  if (o.remove_all >= 0) {
    plan.planes.push_back(plan_remove_all(occ, layout, planes, o.remove_all, o.policy.policy()));
  } else {
    plan = plan_assembly(occ, layout, planes, o.policy.policy());
  }
  write_or_print(o.output, plan_to_json(plan), out);
  if (!o.output.empty() && o.output != "-") {
    out << Json{{"planes", plan.planes.size()},
                {"moves", plan.total_moves()},
                {"path_length_um", plan.total_path_length_um()}}
               .dump()
        << '\n';
  }
  return kOk;
}

// -------------------------------------------------------------- run-experiment

struct RunExperimentOptions {
  std::string config;
  std::size_t shots = 100;
  std::optional<std::uint64_t> seed;
  std::optional<double> p_load;
  std::string output;
  std::string summary;
  int threads = 0;
};

int cmd_run_experiment(const RunExperimentOptions& o, std::ostream& out) {
  ExperimentConfig cfg = read_experiment_config(o.config);
  if (o.seed) {
    cfg.seed = *o.seed;
  }
  if (o.p_load) {
    cfg.p_load = *o.p_load;
  }
  if (o.threads > 0) {
    cfg.threads = o.threads;
  }
  const auto shots = run_shots(cfg, o.shots);
  const Statistics stats = summarize(shots, cfg.planes.plane_count());
  if (!o.output.empty()) {
    write_text_file(o.output, stats_csv(shots));
  }
  if (!o.summary.empty()) {
    write_text_file(o.summary, summary_json(stats));
  }
  out << summary_json(stats);
  if (2 * stats.infeasible_shots > stats.shots) {
    throw Error(ErrorCode::infeasible, std::to_string(stats.infeasible_shots) + " of " +
                                           std::to_string(stats.shots) + " shots could not be planned");
  }
  return kOk;
}

// ------------------------------------------------------------- recapture-curve

struct RecaptureOptions {
  std::string dz = "0:30:0.5";
  std::string power = "full";
  double dr = 0.0;
  double mt_waist = 1.3;
  double mt_power_ratio = 3.0;
  std::string output;
};

int cmd_recapture_curve(const RecaptureOptions& o, std::ostream& out) {
  if (o.power != "full" && o.power != "reduced") {
    throw UsageError("--power must be full or reduced");
  }
  if (!(o.dr >= 0.0)) {
    throw UsageError("--dr must be >= 0");
  }
  const auto grid = parse_range(o.dz);
  MtParams mt;
  mt.waist_um = o.mt_waist;
  mt.power_ratio = o.mt_power_ratio;
  mt.rayleigh_um = rayleigh_length(o.mt_waist, 0.85);
  MtParams cal = calibrate_crosstalk(mt);
  if (o.power == "reduced") {
    cal = reduced_power(cal);
  }
  std::string csv = "dz_um,recapture_probability\n";
  for (double dz : grid) {
    if (dz < 0.0) {
      throw UsageError("--dz values must be >= 0");
    }
    csv += format_number(dz) + ',' + format_number(1.0 - mt_pass_loss(dz, o.dr, cal)) + '\n';
  }
  write_or_print(o.output, csv, out);
  return kOk;
}

// ---------------------------------------------------------------------- detect

struct DetectOptions {
  std::string layout;
  std::string stack;
  std::string output;
  double epsilon_z = 1.0;
  double threshold = 0.5;
  std::size_t max_traps = 200;
  CameraOptions camera;
};

int cmd_detect(const DetectOptions& o, std::ostream& out) {
  const TrapLayout layout = read_layout(o.layout, limits_with(o.max_traps));
  const auto planes = decompose_planes(layout, o.epsilon_z);
  const StackInfo info = stack_info_from_json(read_text_file(o.stack));
  const fs::path dir = fs::path(o.stack).parent_path();
  std::vector<Image2D> stack;
  for (const auto& name : info.images) {
    stack.push_back(from_pgm(read_pgm(dir / name)));
  }
  if (info.z_um.size() != planes.plane_count()) {
    throw Error(ErrorCode::dimension_mismatch, "stack has " + std::to_string(info.z_um.size()) +
                                                   " images for " + std::to_string(planes.plane_count()) +
                                                   " planes");
  }
  CameraModel camera = o.camera.model();
  camera.pixel_scale_um = info.frame.pixel_um;
  const Occupancy occ = detect_occupancy(stack, layout, planes, camera, info.frame, ThresholdPolicy{o.threshold});
  write_or_print(o.output, occupancy_to_json(occ), out);
  return kOk;
}

void add_camera_options(CLI::App* sub, CameraOptions& c) {
  sub->add_option("--psf-sigma", c.camera.psf_sigma0_um, "In-focus spot sigma (um)");
  sub->add_option("--defocus-rayleigh", c.camera.defocus_rayleigh_um, "Defocus length scale (um)");
  sub->add_option("--peak", c.camera.peak_counts, "In-focus peak counts");
  sub->add_option("--background", c.camera.background_counts, "Background counts per pixel");
  sub->add_option("--pixel", c.camera.pixel_scale_um, "Pixel size (um)");
  sub->add_option("--noise", c.noise, "none or poisson");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Design, simulate and analyse 3D optical-tweezer atom arrays"};
  app.name("tweezer-forge");
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: TWEEZER_FORGE_THREADS or all cores)");

  GenGeometryOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-geometry", "Generate or import a trap layout");
  gen_cmd->add_option("--preset", gen.preset, "cubic, bilayer_square_offset, bilayer_graphene, pyrochlore, "
                                              "ring_cylinder, trefoil_knot");
  gen_cmd->add_option("--n", gen.n, "Counts (nx ny [nz])")->expected(1, 3);
  gen_cmd->add_option("--spacing", gen.spacing, "Spacings in um (sx sy [sz])")->expected(1, 3);
  gen_cmd->add_option("--sites", gen.sites, "Sites for curve presets");
  gen_cmd->add_option("--scale", gen.scale, "Scale length in um for curve presets");
  gen_cmd->add_option("--reservoir", gen.reservoir, "Reservoir factor (traps per target, > 1 enables)");
  gen_cmd->add_option("--epsilon-z", gen.epsilon_z, "Plane clustering tolerance (um)");
  gen_cmd->add_option("--import", gen.import_path, "Layout JSON to import");
  gen_cmd->add_flag("--rotate-fix", gen.rotate_fix, "Rotate until the layout passes the safety check");
  gen_cmd->add_option("--z-safe", gen.z_safe, "Axial safety distance (um)");
  gen_cmd->add_option("--r-safe", gen.r_safe, "Lateral safety distance (um)");
  gen_cmd->add_option("--max-traps", gen.max_traps, "Trap count limit");
  gen_cmd->add_option("-o,--output", gen.output, "Output layout JSON (stdout when omitted)");

  HologramOptions holo;
  auto* holo_cmd = app.add_subcommand("hologram", "Compute an SLM phase mask for a layout");
  holo_cmd->add_option("layout", holo.layout, "Layout JSON")->required();
  holo_cmd->add_option("--mask", holo.mask, "Phase mask output (8-bit PGM)");
  holo_cmd->add_option("--report", holo.report, "Uniformity report output (JSON)");
  holo_cmd->add_option("--volume", holo.volume_box, "Sampling box xmin,ymin,zmin,xmax,ymax,zmax (um)");
  holo_cmd->add_option("--volume-res", holo.volume_res, "Sampling resolution nx,ny,nz");
  holo_cmd->add_option("--volume-out", holo.volume_out, "Volume output (float32 raw + .json sidecar)");
  holo_cmd->add_option("--measured", holo.measured, "JSON array of measured trap intensities for feedback");
  holo_cmd->add_option("--iters", holo.iters, "Maximum iterations");
  holo_cmd->add_option("--target-rms", holo.target_rms, "Uniformity goal");
  holo_cmd->add_option("--gain", holo.gain, "Weight update exponent");
  holo_cmd->add_option("--seed", holo.seed, "Random seed for the initial phases");
  holo_cmd->add_option("--max-traps", holo.max_traps, "Trap count limit");
  holo_cmd->add_option("--slm-nx", holo.slm.nx, "SLM columns");
  holo_cmd->add_option("--slm-ny", holo.slm.ny, "SLM rows");
  holo_cmd->add_option("--pitch", holo.slm.pixel_pitch_um, "SLM pixel pitch (um)");
  holo_cmd->add_option("--wavelength", holo.slm.wavelength_um, "Wavelength (um)");
  holo_cmd->add_option("--focal-mm", holo.slm.focal_length_mm, "Focal length (mm)");
  holo_cmd->add_option("--input-waist-mm", holo.slm.input_beam_waist_mm, "Illumination 1/e^2 radius (mm)");

  RenderMipOptions mip;
  auto* mip_cmd = app.add_subcommand("render-mip", "Maximum intensity projection of a volume or image stack");
  mip_cmd->add_option("inputs", mip.inputs, "Volume files or PGM images")->required();
  mip_cmd->add_option("-o,--output", mip.output, "Output PGM")->required();

  SimulateLoadingOptions load;
  auto* load_cmd = app.add_subcommand("simulate-loading", "Draw a stochastic loading and optionally image it");
  load_cmd->add_option("--layout", load.layout, "Layout JSON")->required();
  load_cmd->add_option("--p-load", load.p_load, "Loading probability per trap");
  load_cmd->add_option("--seed", load.seed, "Random seed");
  load_cmd->add_option("--shot", load.shot, "Shot index");
  load_cmd->add_option("--epsilon-z", load.epsilon_z, "Plane clustering tolerance (um)");
  load_cmd->add_option("--max-traps", load.max_traps, "Trap count limit");
  load_cmd->add_option("-o,--output", load.output, "Occupancy JSON (stdout when omitted)");
  load_cmd->add_option("--stack-dir", load.stack_dir, "Write one 16-bit PGM per plane plus stack.json");
  add_camera_options(load_cmd, load.camera);

  PlanAssemblyOptions plan;
  auto* plan_cmd = app.add_subcommand("plan-assembly", "Plan the moves that fill every target");
  plan_cmd->add_option("--layout", plan.layout, "Layout JSON")->required();
  plan_cmd->add_option("--occupancy", plan.occupancy, "Occupancy JSON")->required();
  plan_cmd->add_option("-o,--output", plan.output, "Move-plan JSON (stdout when omitted)");
  plan_cmd->add_option("--epsilon-z", plan.epsilon_z, "Plane clustering tolerance (um)");
  plan_cmd->add_option("--max-traps", plan.max_traps, "Trap count limit");
  plan_cmd->add_option("--remove-all", plan.remove_all, "Eject every atom of this plane instead");
  plan_cmd->add_option("--metric", plan.policy.metric, "euclidean or squared_euclidean");
  plan_cmd->add_option("--method", plan.policy.method, "hungarian or greedy");
  plan_cmd->add_option("--collision-radius", plan.policy.collision_radius, "Clearance around atoms (um)");
  plan_cmd->add_option("--exit-distance", plan.policy.exit_distance, "Exit point distance outside the hull (um)");
  plan_cmd->add_option("--crosstalk-window", plan.policy.crosstalk_window,
                       "Axial range of other-plane atoms to steer around (um, 0 disables)");
  plan_cmd->add_option("--crosstalk-radius", plan.policy.crosstalk_radius, "Clearance around those atoms (um)");

  RunExperimentOptions run_opts;
  auto* run_cmd = app.add_subcommand("run-experiment", "Monte Carlo simulation of the full sequence");
  run_cmd->add_option("config", run_opts.config, "Experiment config JSON")->required();
  run_cmd->add_option("--shots", run_opts.shots, "Number of shots");
  run_cmd->add_option("--seed", run_opts.seed, "Override the config seed");
  run_cmd->add_option("--p-load", run_opts.p_load, "Override the loading probability");
  run_cmd->add_option("-o,--output", run_opts.output, "Per-shot CSV");
  run_cmd->add_option("--summary", run_opts.summary, "Summary JSON");

  RecaptureOptions rec;
  auto* rec_cmd = app.add_subcommand("recapture-curve", "Recapture probability versus axial MT offset");
  rec_cmd->add_option("--dz", rec.dz, "Offsets start:stop:step (um)");
  rec_cmd->add_option("--power", rec.power, "full or reduced");
  rec_cmd->add_option("--dr", rec.dr, "Lateral offset (um)");
  rec_cmd->add_option("--mt-waist", rec.mt_waist, "MT 1/e^2 radius (um)");
  rec_cmd->add_option("--mt-power-ratio", rec.mt_power_ratio, "MT to trap peak intensity ratio");
  rec_cmd->add_option("-o,--output", rec.output, "CSV output (stdout when omitted)");

  DetectOptions det;
  auto* det_cmd = app.add_subcommand("detect", "Decode occupancy from a fluorescence stack");
  det_cmd->add_option("--layout", det.layout, "Layout JSON")->required();
  det_cmd->add_option("--stack", det.stack, "stack.json written by simulate-loading")->required();
  det_cmd->add_option("-o,--output", det.output, "Occupancy JSON (stdout when omitted)");
  det_cmd->add_option("--epsilon-z", det.epsilon_z, "Plane clustering tolerance (um)");
  det_cmd->add_option("--threshold", det.threshold, "Threshold fraction between background and one atom");
  det_cmd->add_option("--max-traps", det.max_traps, "Trap count limit");
  add_camera_options(det_cmd, det.camera);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what());
    return kInvalidInput;
  }

  try {
    const int workers = resolve_thread_count(threads);
    holo.threads = workers;
    run_opts.threads = threads > 0 ? threads : 0;
    if (gen_cmd->parsed()) {
      return cmd_gen_geometry(gen, out);
    }
    if (holo_cmd->parsed()) {
      return cmd_hologram(holo, out);
    }
    if (mip_cmd->parsed()) {
      return cmd_render_mip(mip, out);
    }
    if (load_cmd->parsed()) {
      return cmd_simulate_loading(load, out);
    }
    if (plan_cmd->parsed()) {
      return cmd_plan_assembly(plan, out);
    }
    if (run_cmd->parsed()) {
      return cmd_run_experiment(run_opts, out);
    }
    if (rec_cmd->parsed()) {
      return cmd_recapture_curve(rec, out);
    }
    if (det_cmd->parsed()) {
      return cmd_detect(det, out);
    }
  } catch (const UsageError& e) {
    report_error(err, "usage", e.what());
    return kInvalidInput;
  } catch (const Error& e) {
    report_error(err, to_string(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const nlohmann::json::exception& e) {
    report_error(err, "parse_error", e.what());
    return kInvalidInput;
  } catch (const std::filesystem::filesystem_error& e) {
    report_error(err, "io_error", e.what());
    return kInvalidInput;
  }
  report_error(err, "usage", "no subcommand given");
  return kInvalidInput;
}

}  // namespace tweezer::cli
