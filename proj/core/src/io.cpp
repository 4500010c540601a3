#include "tweezer/io.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace tweezer {

using Json = nlohmann::ordered_json;

namespace {

void check_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) {
    throw Error(ErrorCode::parse_error, where + " must be a JSON object");
  }
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.contains(key)) {
      throw Error(ErrorCode::parse_error, "unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
T get_or(const Json& obj, const char* key, T fallback) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    return fallback;
  }
  try {
    return it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::parse_error, std::string("key '") + key + "' has the wrong type");
  }
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::parse_error, what + ": " + e.what());
  }
}

Json vec_json(Vec3 v) { return Json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const Json& j, const std::string& where) {
  if (!j.is_array() || (j.size() != 2 && j.size() != 3)) {
    throw Error(ErrorCode::parse_error, where + " must be [x, y] or [x, y, z]");
  }
  Vec3 v{j[0].get<double>(), j[1].get<double>(), 0.0};
  if (j.size() == 3) {
    v.z = j[2].get<double>();
  }
  return v;
}

Json layout_json(const TrapLayout& layout) {
  Json traps = Json::array();
  for (const auto& t : layout.traps()) {
    traps.push_back(Json{{"x_um", t.position.x}, {"y_um", t.position.y}, {"z_um", t.position.z},
                         {"is_target", t.is_target}});
  }
  return Json{{"name", layout.name()}, {"traps", traps}};
}

TrapLayout layout_from(const Json& j, const LayoutLimits& limits) {
  check_keys(j, {"name", "traps"}, "layout");
  const auto traps_it = j.find("traps");
  if (traps_it == j.end() || !traps_it->is_array()) {
    throw Error(ErrorCode::parse_error, "layout needs a 'traps' array");
  }
  std::vector<TrapSite> traps;
  traps.reserve(traps_it->size());
  for (const auto& t : *traps_it) {
    check_keys(t, {"x_um", "y_um", "z_um", "is_target"}, "trap");
    if (!t.contains("x_um") || !t.contains("y_um") || !t.contains("z_um")) {
      throw Error(ErrorCode::parse_error, "every trap needs x_um, y_um and z_um");
    }
    TrapSite site;
    site.position = {get_or<double>(t, "x_um", 0.0), get_or<double>(t, "y_um", 0.0), get_or<double>(t, "z_um", 0.0)};
    site.is_target = get_or<bool>(t, "is_target", true);
    traps.push_back(site);
  }
  return TrapLayout(get_or<std::string>(j, "name", "layout"), std::move(traps), limits);
}

LayoutLimits limits_from(const Json& j) {
  check_keys(j, {"max_traps", "min_pair_distance_um", "fov_half_xy_um", "fov_half_z_um"}, "limits");
  LayoutLimits l;
  l.max_traps = get_or<std::size_t>(j, "max_traps", l.max_traps);
  l.min_pair_distance_um = get_or<double>(j, "min_pair_distance_um", l.min_pair_distance_um);
  l.fov_half_xy_um = get_or<double>(j, "fov_half_xy_um", l.fov_half_xy_um);
  l.fov_half_z_um = get_or<double>(j, "fov_half_z_um", l.fov_half_z_um);
  return l;
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) {
    return "nan";
  }
  if (std::isinf(value)) {
    return value > 0 ? "inf" : "-inf";
  }
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::io_error, "cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::io_error, "cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw Error(ErrorCode::io_error, "failed writing " + path.string());
  }
}

std::string layout_to_json(const TrapLayout& layout) { return layout_json(layout).dump(2) + "\n"; }

TrapLayout layout_from_json(const std::string& text, const LayoutLimits& limits) {
  return layout_from(parse_json(text, "layout"), limits);
}

TrapLayout read_layout(const std::filesystem::path& path, const LayoutLimits& limits) {
  return layout_from_json(read_text_file(path), limits);
}

void write_layout(const TrapLayout& layout, const std::filesystem::path& path) {
  write_text_file(path, layout_to_json(layout));
}

std::string plan_to_json(const AssemblyPlan& plan) {
  Json planes = Json::array();
  for (const auto& mp : plan.planes) {
    Json moves = Json::array();
    for (const auto& m : mp.moves) {
      Json path = Json::array();
      for (const auto& p : m.path) {
        path.push_back(Json::array({p.x, p.y}));
      }
      Json mv{{"kind", to_string(m.kind)}, {"from", m.from}};
      mv["to"] = m.to ? Json(*m.to) : Json(nullptr);
      mv["exit_um"] = m.exit_um ? Json::array({m.exit_um->x, m.exit_um->y}) : Json(nullptr);
      mv["path_um"] = path;
      moves.push_back(std::move(mv));
    }
    planes.push_back(Json{{"plane", mp.plane_index}, {"mt_z_um", mp.mt_z_um}, {"moves", moves}});
  }
  return Json{{"planes", planes}}.dump(2) + "\n";
}

AssemblyPlan plan_from_json(const std::string& text) {
  const Json j = parse_json(text, "move plan");
  check_keys(j, {"planes"}, "move plan");
  AssemblyPlan plan;
  try {
    for (const auto& pj : j.at("planes")) {
      check_keys(pj, {"plane", "mt_z_um", "moves"}, "plane plan");
      MovePlan mp;
      mp.plane_index = pj.at("plane").get<int>();
      mp.mt_z_um = pj.at("mt_z_um").get<double>();
      for (const auto& mj : pj.at("moves")) {
        check_keys(mj, {"kind", "from", "to", "exit_um", "path_um"}, "move");
        Move m;
        const auto kind = mj.at("kind").get<std::string>();
        if (kind != "transfer" && kind != "eject") {
          throw Error(ErrorCode::parse_error, "move kind must be transfer or eject");
        }
        m.kind = kind == "transfer" ? MoveKind::transfer : MoveKind::eject;
        m.from = mj.at("from").get<std::size_t>();
        if (mj.contains("to") && !mj.at("to").is_null()) {
          m.to = mj.at("to").get<std::size_t>();
        }
        if (mj.contains("exit_um") && !mj.at("exit_um").is_null()) {
          Vec3 e = vec_from(mj.at("exit_um"), "exit_um");
          e.z = mp.mt_z_um;
          m.exit_um = e;
        }
        for (const auto& p : mj.at("path_um")) {
          Vec3 v = vec_from(p, "path_um");
          v.z = mp.mt_z_um;
          m.path.push_back(v);
        }
        mp.moves.push_back(std::move(m));
      }
      plan.planes.push_back(std::move(mp));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed move plan: ") + e.what());
  }
  return plan;
}

std::string occupancy_to_json(const Occupancy& occupancy) {
  Json arr = Json::array();
  for (bool b : occupancy) {
    arr.push_back(b);
  }
  return Json{{"occupied", arr}}.dump() + "\n";
}

Occupancy occupancy_from_json(const std::string& text) {
  const Json j = parse_json(text, "occupancy");
  check_keys(j, {"occupied"}, "occupancy");
  Occupancy occ;
  try {
    for (const auto& v : j.at("occupied")) {
      occ.push_back(v.is_boolean() ? v.get<bool>() : v.get<int>() != 0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed occupancy: ") + e.what());
  }
  return occ;
}

std::string report_to_json(const UniformityReport& report) {
  Json j{{"rms", report.rms_deviation},
         {"iterations", report.iterations},
         {"converged", report.converged},
         {"per_trap", report.per_trap}};
  return j.dump(2) + "\n";
}

void write_volume(const IntensityVolume& volume, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::io_error, "cannot write " + path.string());
  }
  std::vector<unsigned char> raw(volume.data.size() * 4);
  for (std::size_t i = 0; i < volume.data.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(volume.data[i]);
    for (int b = 0; b < 4; ++b) {
      raw[4 * i + static_cast<std::size_t>(b)] = static_cast<unsigned char>(bits >> (8 * b));
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) {
    throw Error(ErrorCode::io_error, "failed writing " + path.string());
  }
  Json side{{"format", "float32le"},
            {"nx", volume.nx},
            {"ny", volume.ny},
            {"nz", volume.nz},
            {"origin_um", vec_json(volume.origin)},
            {"voxel_um", vec_json(volume.voxel)},
            {"index", "(k * ny + j) * nx + i"}};
  write_text_file(path.string() + ".json", side.dump(2) + "\n");
}

IntensityVolume read_volume(const std::filesystem::path& path) {
  const Json side = parse_json(read_text_file(path.string() + ".json"), "volume sidecar");
  check_keys(side, {"format", "nx", "ny", "nz", "origin_um", "voxel_um", "index"}, "volume sidecar");
  IntensityVolume v;
  try {
    if (side.at("format").get<std::string>() != "float32le") {
      throw Error(ErrorCode::parse_error, "unsupported volume format");
    }
    v.nx = side.at("nx").get<int>();
    v.ny = side.at("ny").get<int>();
    v.nz = side.at("nz").get<int>();
    v.origin = vec_from(side.at("origin_um"), "origin_um");
    v.voxel = vec_from(side.at("voxel_um"), "voxel_um");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed volume sidecar: ") + e.what());
  }
  if (v.nx <= 0 || v.ny <= 0 || v.nz <= 0) {
    throw Error(ErrorCode::parse_error, "volume dimensions must be positive");
  }
  const std::size_t n =
      static_cast<std::size_t>(v.nx) * static_cast<std::size_t>(v.ny) * static_cast<std::size_t>(v.nz);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::io_error, "cannot open " + path.string());
  }
  std::vector<unsigned char> raw(4 * n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in || in.peek() != EOF) {
    throw Error(ErrorCode::dimension_mismatch, "volume file size does not match its sidecar");
  }
  v.data.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(raw[4 * i + static_cast<std::size_t>(b)]) << (8 * b);
    }
    v.data[i] = std::bit_cast<float>(bits);
  }
  return v;
}

std::string stats_csv(const std::vector<ShotResult>& shots) {
  std::string out = "shot,triggered,n_loaded,n_targets_filled,fill_fraction,duration_ms,moves\n";
  for (const auto& r : shots) {
    out += std::to_string(r.shot) + ',' + (r.triggered ? "1" : "0") + ',' + std::to_string(r.n_loaded) + ',' +
           std::to_string(r.n_targets_filled) + ',' + format_number(r.fill_fraction) + ',' +
           format_number(r.duration_ms) + ',' + std::to_string(r.total_moves()) + '\n';
  }
  return out;
}

std::string summary_json(const Statistics& stats) {
  Json j{{"mean_fill", stats.mean_fill},
         {"std_fill", stats.std_fill},
         {"defect_free_prob", stats.defect_free_prob},
         {"rep_rate_hz", stats.rep_rate_hz},
         {"shots", stats.shots},
         {"triggered_shots", stats.triggered_shots},
         {"infeasible_shots", stats.infeasible_shots},
         {"mean_duration_ms", stats.mean_duration_ms},
         {"mean_moves", stats.mean_moves},
         {"per_plane_fill", stats.per_plane_fill}};
  return j.dump(2) + "\n";
}

std::string stack_info_to_json(const StackInfo& info) {
  Json j{{"x0_um", info.frame.x0_um}, {"y0_um", info.frame.y0_um}, {"pixel_um", info.frame.pixel_um},
         {"width", info.frame.width}, {"height", info.frame.height}, {"z_um", info.z_um},
         {"images", info.images}};
  return j.dump(2) + "\n";
}

StackInfo stack_info_from_json(const std::string& text) {
  const Json j = parse_json(text, "stack sidecar");
  check_keys(j, {"x0_um", "y0_um", "pixel_um", "width", "height", "z_um", "images"}, "stack sidecar");
  StackInfo info;
  try {
    info.frame.x0_um = j.at("x0_um").get<double>();
    info.frame.y0_um = j.at("y0_um").get<double>();
    info.frame.pixel_um = j.at("pixel_um").get<double>();
    info.frame.width = j.at("width").get<int>();
    info.frame.height = j.at("height").get<int>();
    info.z_um = j.at("z_um").get<std::vector<double>>();
    info.images = j.at("images").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed stack sidecar: ") + e.what());
  }
  if (info.images.size() != info.z_um.size()) {
    throw Error(ErrorCode::parse_error, "stack sidecar lists different numbers of images and z values");
  }
  return info;
}

ExperimentConfig experiment_config_from_json(const std::string& text, const std::filesystem::path& base_dir) {
  const Json j = parse_json(text, "experiment config");
  check_keys(j,
             {"layout", "limits", "epsilon_z_um", "p_load", "seed", "trigger_timeout_s", "mode", "mt_offset_um",
              "mt_power", "detect_from_images", "threads", "loss", "timing", "camera", "planner", "safety"},
             "experiment config");
  try {
    const LayoutLimits limits = j.contains("limits") ? limits_from(j.at("limits")) : LayoutLimits{};
    if (!j.contains("layout")) {
      throw Error(ErrorCode::parse_error, "experiment config needs a 'layout'");
    }
    const Json& lj = j.at("layout");
    TrapLayout layout = lj.is_string() ? read_layout(base_dir / lj.get<std::string>(), limits)
                                       : layout_from(lj, limits);
    ExperimentConfig cfg(std::move(layout), get_or<double>(j, "epsilon_z_um", 1.0));
    cfg.p_load = get_or<double>(j, "p_load", cfg.p_load);
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    cfg.trigger_timeout_s = get_or<double>(j, "trigger_timeout_s", cfg.trigger_timeout_s);
    cfg.mt_offset_um = get_or<double>(j, "mt_offset_um", cfg.mt_offset_um);
    cfg.detect_from_images = get_or<bool>(j, "detect_from_images", cfg.detect_from_images);
    cfg.threads = get_or<int>(j, "threads", cfg.threads);
    const auto mode = get_or<std::string>(j, "mode", "assemble");
    if (mode != "assemble" && mode != "remove_all") {
      throw Error(ErrorCode::parse_error, "mode must be assemble or remove_all");
    }
    cfg.mode = mode == "assemble" ? ExperimentMode::assemble : ExperimentMode::remove_all;
    const auto power = get_or<std::string>(j, "mt_power", "full");
    if (power != "full" && power != "reduced") {
      throw Error(ErrorCode::parse_error, "mt_power must be full or reduced");
    }

    MtParams mt;
    if (j.contains("loss")) {
      const Json& l = j.at("loss");
      check_keys(l, {"move_fidelity", "lifetime_s", "crosstalk_enabled", "mt_waist_um", "mt_power_ratio",
                     "mt_rayleigh_um", "mt_wavelength_um"},
                 "loss");
      cfg.loss.move_fidelity = get_or<double>(l, "move_fidelity", cfg.loss.move_fidelity);
      if (l.contains("lifetime_s") && l.at("lifetime_s").is_null()) {
        cfg.loss.lifetime_s = std::numeric_limits<double>::infinity();
      } else {
        cfg.loss.lifetime_s = get_or<double>(l, "lifetime_s", cfg.loss.lifetime_s);
      }
      cfg.loss.crosstalk_enabled = get_or<bool>(l, "crosstalk_enabled", cfg.loss.crosstalk_enabled);
      mt.waist_um = get_or<double>(l, "mt_waist_um", mt.waist_um);
      mt.power_ratio = get_or<double>(l, "mt_power_ratio", mt.power_ratio);
      const double wavelength = get_or<double>(l, "mt_wavelength_um", 0.85);
      mt.rayleigh_um = get_or<double>(l, "mt_rayleigh_um", rayleigh_length(mt.waist_um, wavelength));
    }
    cfg.loss.crosstalk = calibrate_crosstalk(mt);
    if (power == "reduced") {
      cfg.loss.crosstalk = reduced_power(cfg.loss.crosstalk);
      cfg.safety.z_safe_um = kReducedPowerSafeDzUm;
    }

    if (j.contains("timing")) {
      const Json& t = j.at("timing");
      check_keys(t, {"image_per_plane_ms", "sort_per_plane_ms", "exposure_ms", "per_move_ms", "mot_dispersal_ms"},
                 "timing");
      auto& tm = cfg.timing;
      tm.image_per_plane_ms = get_or<double>(t, "image_per_plane_ms", tm.image_per_plane_ms);
      tm.sort_per_plane_ms = get_or<double>(t, "sort_per_plane_ms", tm.sort_per_plane_ms);
      tm.exposure_ms = get_or<double>(t, "exposure_ms", tm.exposure_ms);
      tm.per_move_ms = get_or<double>(t, "per_move_ms", tm.per_move_ms);
      tm.mot_dispersal_ms = get_or<double>(t, "mot_dispersal_ms", tm.mot_dispersal_ms);
    }
    if (j.contains("camera")) {
      const Json& c = j.at("camera");
      check_keys(c, {"pixel_scale_um", "psf_sigma0_um", "defocus_rayleigh_um", "peak_counts", "background_counts",
                     "noise", "margin_um"},
                 "camera");
      auto& cm = cfg.camera;
      cm.pixel_scale_um = get_or<double>(c, "pixel_scale_um", cm.pixel_scale_um);
      cm.psf_sigma0_um = get_or<double>(c, "psf_sigma0_um", cm.psf_sigma0_um);
      cm.defocus_rayleigh_um = get_or<double>(c, "defocus_rayleigh_um", cm.defocus_rayleigh_um);
      cm.peak_counts = get_or<double>(c, "peak_counts", cm.peak_counts);
      cm.background_counts = get_or<double>(c, "background_counts", cm.background_counts);
      cm.margin_um = get_or<double>(c, "margin_um", cm.margin_um);
      const auto noise = get_or<std::string>(c, "noise", "none");
      if (noise != "none" && noise != "poisson") {
        throw Error(ErrorCode::parse_error, "camera noise must be none or poisson");
      }
      cm.noise = noise == "none" ? NoiseModel::none : NoiseModel::poisson;
    }
    if (j.contains("planner")) {
      const Json& p = j.at("planner");
      check_keys(p, {"metric", "method", "collision_radius_um", "exit_distance_um", "crosstalk_window_um",
                     "crosstalk_radius_um"},
                 "planner");
      auto& pp = cfg.policy;
      const auto metric = get_or<std::string>(p, "metric", to_string(pp.metric));
      if (metric != "euclidean" && metric != "squared_euclidean") {
        throw Error(ErrorCode::parse_error, "planner metric must be euclidean or squared_euclidean");
      }
      pp.metric = metric == "euclidean" ? CostMetric::euclidean : CostMetric::squared_euclidean;
      const auto method = get_or<std::string>(p, "method", to_string(pp.method));
      if (method != "hungarian" && method != "greedy") {
        throw Error(ErrorCode::parse_error, "planner method must be hungarian or greedy");
      }
      pp.method = method == "hungarian" ? AssignmentMethod::hungarian : AssignmentMethod::greedy;
      pp.collision_radius_um = get_or<double>(p, "collision_radius_um", pp.collision_radius_um);
      pp.exit_distance_um = get_or<double>(p, "exit_distance_um", pp.exit_distance_um);
      pp.crosstalk_window_um = get_or<double>(p, "crosstalk_window_um", pp.crosstalk_window_um);
      pp.crosstalk_radius_um = get_or<double>(p, "crosstalk_radius_um", pp.crosstalk_radius_um);
    }
    if (j.contains("safety")) {
      const Json& s = j.at("safety");
      check_keys(s, {"z_safe_um", "r_safe_um"}, "safety");
      cfg.safety.z_safe_um = get_or<double>(s, "z_safe_um", cfg.safety.z_safe_um);
      cfg.safety.r_safe_um = get_or<double>(s, "r_safe_um", cfg.safety.r_safe_um);
    }
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("malformed experiment config: ") + e.what());
  }
}

ExperimentConfig read_experiment_config(const std::filesystem::path& path) {
  return experiment_config_from_json(read_text_file(path), path.parent_path());
}

}  // namespace tweezer
