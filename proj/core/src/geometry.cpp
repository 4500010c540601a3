#include "tweezer/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace tweezer {

namespace {

std::string fmt_um(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

bool operator==(const TrapSite& a, const TrapSite& b) {
  return a.position == b.position && a.is_target == b.is_target && a.plane_index == b.plane_index;
}

bool operator==(const TrapLayout& a, const TrapLayout& b) {
  return a.name_ == b.name_ && a.traps_ == b.traps_;
}

TrapLayout::TrapLayout(std::string name, std::vector<TrapSite> traps, LayoutLimits limits)
    : name_(std::move(name)), traps_(std::move(traps)), limits_(limits) {
  if (traps_.empty()) {
    throw LayoutError("layout has no traps", {});
  }
  if (traps_.size() > limits_.max_traps) {
    throw LayoutError("layout has " + std::to_string(traps_.size()) + " traps, more than the limit of " +
                          std::to_string(limits_.max_traps),
                      {});
  }
  for (std::size_t i = 0; i < traps_.size(); ++i) {
    const auto& site = traps_[i];
    if (!site.position.finite()) {
      throw LayoutError("trap " + std::to_string(i) + " has a non-finite coordinate", {i});
    }
    if (!in_field_of_view(site.position)) {
      throw LayoutError("trap " + std::to_string(i) + " at (" + fmt_um(site.position.x) + ", " +
                            fmt_um(site.position.y) + ", " + fmt_um(site.position.z) +
                            ") um is outside the field of view",
                        {i});
    }
    if (site.plane_index && *site.plane_index < 0) {
      throw LayoutError("trap " + std::to_string(i) + " has a negative plane index", {i});
    }
  }
  for (std::size_t i = 0; i < traps_.size(); ++i) {
    for (std::size_t j = i + 1; j < traps_.size(); ++j) {
      const double d = distance(traps_[i].position, traps_[j].position);
      if (d < limits_.min_pair_distance_um) {
        throw LayoutError("traps " + std::to_string(i) + " and " + std::to_string(j) + " are " + fmt_um(d) +
                              " um apart, closer than " + fmt_um(limits_.min_pair_distance_um) + " um",
                          {i, j});
      }
    }
  }
}

std::vector<Vec3> TrapLayout::positions() const {
  std::vector<Vec3> out;
  out.reserve(traps_.size());
  for (const auto& t : traps_) {
    out.push_back(t.position);
  }
  return out;
}

std::vector<std::size_t> TrapLayout::target_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < traps_.size(); ++i) {
    if (traps_[i].is_target) {
      out.push_back(i);
    }
  }
  return out;
}

std::size_t TrapLayout::target_count() const {
  return static_cast<std::size_t>(
      std::count_if(traps_.begin(), traps_.end(), [](const TrapSite& t) { return t.is_target; }));
}

Vec3 TrapLayout::centroid() const {
  Vec3 sum;
  for (const auto& t : traps_) {
    sum = sum + t.position;
  }
  return (1.0 / static_cast<double>(traps_.size())) * sum;
}

bool TrapLayout::in_field_of_view(Vec3 p) const {
  return std::abs(p.x) <= limits_.fov_half_xy_um && std::abs(p.y) <= limits_.fov_half_xy_um &&
         std::abs(p.z) <= limits_.fov_half_z_um;
}

std::vector<int> PlaneDecomposition::plane_of_trap(std::size_t trap_count) const {
  std::vector<int> out(trap_count, -1);
  for (std::size_t p = 0; p < planes.size(); ++p) {
    for (auto t : planes[p].traps) {
      out.at(t) = static_cast<int>(p);
    }
  }
  return out;
}

PlaneDecomposition decompose_planes(const TrapLayout& layout, double epsilon_z_um) {
  if (!(epsilon_z_um >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "epsilon_z must be >= 0");
  }
  std::vector<std::size_t> order(layout.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return layout[a].position.z < layout[b].position.z;
  });

  PlaneDecomposition out;
  out.epsilon_z_um = epsilon_z_um;
  std::size_t begin = 0;
  while (begin < order.size()) {
    std::size_t end = begin + 1;
    while (end < order.size() &&
           layout[order[end]].position.z - layout[order[end - 1]].position.z <= epsilon_z_um) {
      ++end;
    }
    const double lo = layout[order[begin]].position.z;
    const double hi = layout[order[end - 1]].position.z;
    if (hi - lo > 2.0 * epsilon_z_um) {
      throw Error(ErrorCode::layout_invalid,
                  "plane starting at z = " + fmt_um(lo) + " um smears over " + fmt_um(hi - lo) +
                      " um, more than 2 * epsilon_z");
    }
    Plane plane;
    plane.z_center_um = 0.5 * (lo + hi);
    plane.traps.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                       order.begin() + static_cast<std::ptrdiff_t>(end));
    std::sort(plane.traps.begin(), plane.traps.end());
    out.planes.push_back(std::move(plane));
    begin = end;
  }
  return out;
}

TrapLayout with_planes(const TrapLayout& layout, const PlaneDecomposition& planes) {
  auto sites = layout.traps();
  const auto plane_of = planes.plane_of_trap(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (plane_of[i] < 0) {
      throw Error(ErrorCode::invalid_argument, "decomposition does not cover trap " + std::to_string(i));
    }
    sites[i].plane_index = plane_of[i];
  }
  return TrapLayout(layout.name(), std::move(sites), layout.limits());
}

SafetyReport validate_mt_safety(const TrapLayout& layout, const PlaneDecomposition& planes,
                                SafetyThresholds thresholds) {
  if (!(thresholds.z_safe_um > 0.0) || !(thresholds.r_safe_um > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "z_safe and r_safe must be positive");
  }
  const auto plane_of = planes.plane_of_trap(layout.size());
  SafetyReport report;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    for (std::size_t j = i + 1; j < layout.size(); ++j) {
      if (plane_of[i] == plane_of[j]) {
        continue;
      }
      const Vec3 a = layout[i].position;
      const Vec3 b = layout[j].position;
      const double lateral = lateral_distance(a, b);
      const double axial = std::abs(a.z - b.z);
      if (lateral < thresholds.r_safe_um && axial < thresholds.z_safe_um) {
        report.conflicts.push_back({i, j, lateral, axial});
      }
    }
  }
  return report;
}

Vec3 rotate_about(Vec3 p, Axis axis, double angle_deg, Vec3 center) {
  const double th = angle_deg * kPi / 180.0;
  const double c = std::cos(th);
  const double s = std::sin(th);
  const Vec3 d = p - center;
  if (axis == Axis::x) {
    return center + Vec3{d.x, c * d.y - s * d.z, s * d.y + c * d.z};
  }
  return center + Vec3{c * d.x + s * d.z, d.y, -s * d.x + c * d.z};
}

TrapLayout rotate_layout(const TrapLayout& layout, Axis axis, double angle_deg) {
  if (!(std::abs(angle_deg) <= 45.0)) {
    throw Error(ErrorCode::invalid_argument, "rotation angle must be within +-45 degrees");
  }
  const Vec3 center = layout.centroid();
  std::vector<TrapSite> sites;
  sites.reserve(layout.size());
  for (const auto& t : layout.traps()) {
    sites.push_back({angle_deg == 0.0 ? t.position : rotate_about(t.position, axis, angle_deg, center),
                     t.is_target, std::nullopt});
  }
  return TrapLayout(layout.name(), std::move(sites), layout.limits());
}

std::optional<RotationSuggestion> suggest_rotation(const TrapLayout& layout, SafetyThresholds thresholds,
                                                   double max_angle_deg, double epsilon_z_um) {
  if (!(max_angle_deg >= 0.0 && max_angle_deg <= 45.0)) {
    throw Error(ErrorCode::invalid_argument, "max_angle must be within [0, 45] degrees");
  }
  auto passes = [&](Axis axis, double angle) {
    try {
      const auto rotated = rotate_layout(layout, axis, angle);
      return validate_mt_safety(rotated, decompose_planes(rotated, epsilon_z_um), thresholds).pass();
    } catch (const Error&) {
      return false;  // out of field of view or smeared planes
    }
  };

  constexpr double kStep = 0.5;
  const int steps = static_cast<int>(std::floor(max_angle_deg / kStep + 1e-9));
  for (int k = 0; k <= steps; ++k) {
    const double magnitude = kStep * k;
    if (k == 0) {
      if (passes(Axis::x, 0.0)) {
        return RotationSuggestion{Axis::x, 0.0};
      }
      continue;
    }
    for (Axis axis : {Axis::x, Axis::y}) {
      for (double sign : {1.0, -1.0}) {
        if (passes(axis, sign * magnitude)) {
          return RotationSuggestion{axis, sign * magnitude};
        }
      }
    }
  }
  return std::nullopt;
}

const char* to_string(Preset preset) {
  switch (preset) {
    case Preset::cubic: return "cubic";
    case Preset::bilayer_square_offset: return "bilayer_square_offset";
    case Preset::bilayer_graphene: return "bilayer_graphene";
    case Preset::pyrochlore: return "pyrochlore";
    case Preset::ring_cylinder: return "ring_cylinder";
    case Preset::trefoil_knot: return "trefoil_knot";
  }
  return "unknown";
}

std::vector<Preset> all_presets() {
  return {Preset::cubic,      Preset::bilayer_square_offset, Preset::bilayer_graphene,
          Preset::pyrochlore, Preset::ring_cylinder,         Preset::trefoil_knot};
}

std::optional<Preset> parse_preset(const std::string& name) {
  for (auto p : all_presets()) {
    if (name == to_string(p)) {
      return p;
    }
  }
  return std::nullopt;
}

namespace {

// Rings of lattice cells added around a pattern when harvesting reservoir
// candidates.
constexpr int kReservoirRings = 4;

double centered(int i, int n, double spacing) { return (i - 0.5 * (n - 1)) * spacing; }

void require_positive(const PresetParams& p, std::initializer_list<int> count_axes,
                      std::initializer_list<int> spacing_axes) {
  for (int a : count_axes) {
    if (p.counts[static_cast<std::size_t>(a)] < 1) {
      throw Error(ErrorCode::invalid_argument, "preset counts must be >= 1");
    }
  }
  for (int a : spacing_axes) {
    if (!(p.spacing_um[static_cast<std::size_t>(a)] > 0.0)) {
      throw Error(ErrorCode::invalid_argument, "preset spacings must be > 0");
    }
  }
}

std::vector<Vec3> cubic_sites(const PresetParams& p, int grow) {
  const auto [nx, ny, nz] = p.counts;
  const auto [sx, sy, sz] = p.spacing_um;
  std::vector<Vec3> out;
  for (int k = 0; k < nz; ++k) {
    for (int j = -grow; j < ny + grow; ++j) {
      for (int i = -grow; i < nx + grow; ++i) {
        out.push_back({centered(i, nx, sx), centered(j, ny, sy), centered(k, nz, sz)});
      }
    }
  }
  return out;
}

std::vector<Vec3> bilayer_square_sites(const PresetParams& p, int grow) {
  const int nx = p.counts[0];
  const int ny = p.counts[1];
  const double a = p.spacing_um[0];
  const double dz = p.spacing_um[2];
  std::vector<Vec3> out;
  for (int layer = 0; layer < 2; ++layer) {
    const double shift = layer == 0 ? 0.0 : 0.5 * a;
    for (int j = -grow; j < ny + grow; ++j) {
      for (int i = -grow; i < nx + grow; ++i) {
        out.push_back({centered(i, nx, a) + shift, centered(j, ny, a) + shift, layer * dz});
      }
    }
  }
  return out;
}

// Honeycomb with bond length b, Bernal (AB) stacked: the second layer is
// shifted by one bond so half of its sites sit above first-layer sites.
std::vector<Vec3> bilayer_graphene_sites(const PresetParams& p, int grow) {
  const int nx = p.counts[0];
  const int ny = p.counts[1];
  const double b = p.spacing_um[0];
  const double dz = p.spacing_um[2];
  const double r3 = std::sqrt(3.0);
  const Vec3 a1{r3 * b, 0.0, 0.0};
  const Vec3 a2{0.5 * r3 * b, 1.5 * b, 0.0};
  const Vec3 bond{0.0, b, 0.0};
  // centre of the base parallelogram, including the two-site basis
  const Vec3 center = 0.5 * (nx - 1) * a1 + 0.5 * (ny - 1) * a2 + 0.5 * bond;
  std::vector<Vec3> out;
  for (int layer = 0; layer < 2; ++layer) {
    const Vec3 shift = layer == 0 ? Vec3{} : bond;
    for (int j = -grow; j < ny + grow; ++j) {
      for (int i = -grow; i < nx + grow; ++i) {
        const Vec3 cell = static_cast<double>(i) * a1 + static_cast<double>(j) * a2 - center + shift;
        out.push_back({cell.x, cell.y, layer * dz});
        out.push_back({cell.x + bond.x, cell.y + bond.y, layer * dz});
      }
    }
  }
  return out;
}

std::vector<Vec3> pyrochlore_sites(const PresetParams& p, int grow) {
  const auto [nx, ny, nz] = p.counts;
  const double cell = p.spacing_um[0];
  static constexpr std::array<std::array<double, 3>, 4> kFcc{
      {{0.0, 0.0, 0.0}, {0.5, 0.5, 0.0}, {0.5, 0.0, 0.5}, {0.0, 0.5, 0.5}}};
  static constexpr std::array<std::array<double, 3>, 4> kBasis{
      {{0.0, 0.0, 0.0}, {0.25, 0.25, 0.0}, {0.25, 0.0, 0.25}, {0.0, 0.25, 0.25}}};
  // centroid of the ungrown pattern: mean fcc offset 1/4 plus mean basis offset 1/8
  const Vec3 center{cell * (0.5 * (nx - 1) + 0.375), cell * (0.5 * (ny - 1) + 0.375),
                    cell * (0.5 * (nz - 1) + 0.375)};
  std::vector<Vec3> out;
  for (int k = 0; k < nz; ++k) {
    for (int j = -grow; j < ny + grow; ++j) {
      for (int i = -grow; i < nx + grow; ++i) {
        for (const auto& f : kFcc) {
          for (const auto& b : kBasis) {
            out.push_back(Vec3{cell * (i + f[0] + b[0]), cell * (j + f[1] + b[1]), cell * (k + f[2] + b[2])} -
                          center);
          }
        }
      }
    }
  }
  return out;
}

std::vector<Vec3> ring_cylinder_sites(const PresetParams& p) {
  const int per_ring = p.sites;
  const int rings = p.counts[2];
  std::vector<Vec3> out;
  for (int r = 0; r < rings; ++r) {
    const double z = centered(r, rings, p.spacing_um[2]);
    const double phase = (r % 2 == 1) ? kPi / per_ring : 0.0;
    for (int k = 0; k < per_ring; ++k) {
      const double th = kTwoPi * k / per_ring + phase;
      out.push_back({p.scale_um * std::cos(th), p.scale_um * std::sin(th), z});
    }
  }
  return out;
}

// (2,3) torus knot: (sin t + 2 sin 2t, cos t - 2 cos 2t, -sin 3t); the torus
// major radius is 2 in these units.
std::vector<Vec3> trefoil_sites(const PresetParams& p) {
  const double s = 0.5 * p.scale_um;
  std::vector<Vec3> out;
  for (int k = 0; k < p.sites; ++k) {
    const double t = kTwoPi * k / p.sites;
    out.push_back({s * (std::sin(t) + 2.0 * std::sin(2.0 * t)), s * (std::cos(t) - 2.0 * std::cos(2.0 * t)),
                   -s * std::sin(3.0 * t)});
  }
  return out;
}

std::string preset_name(Preset preset, const PresetParams& p) {
  std::ostringstream os;
  os << to_string(preset);
  switch (preset) {
    case Preset::cubic:
    case Preset::pyrochlore:
      os << '_' << p.counts[0] << 'x' << p.counts[1] << 'x' << p.counts[2];
      break;
    case Preset::bilayer_square_offset:
    case Preset::bilayer_graphene:
      os << '_' << p.counts[0] << 'x' << p.counts[1];
      break;
    case Preset::ring_cylinder:
      os << '_' << p.sites << 'x' << p.counts[2];
      break;
    case Preset::trefoil_knot:
      os << '_' << p.sites;
      break;
  }
  return os.str();
}

}  // namespace

TrapLayout generate_preset(Preset preset, const PresetParams& params) {
  std::vector<Vec3> pattern;
  std::vector<Vec3> grown;
  switch (preset) {
    case Preset::cubic:
      require_positive(params, {0, 1, 2}, {0, 1, 2});
      pattern = cubic_sites(params, 0);
      grown = cubic_sites(params, kReservoirRings);
      break;
    case Preset::bilayer_square_offset:
      require_positive(params, {0, 1}, {0, 2});
      pattern = bilayer_square_sites(params, 0);
      grown = bilayer_square_sites(params, kReservoirRings);
      break;
    case Preset::bilayer_graphene:
      require_positive(params, {0, 1}, {0, 2});
      pattern = bilayer_graphene_sites(params, 0);
      grown = bilayer_graphene_sites(params, kReservoirRings);
      break;
    case Preset::pyrochlore:
      require_positive(params, {0, 1, 2}, {0});
      pattern = pyrochlore_sites(params, 0);
      grown = pyrochlore_sites(params, kReservoirRings);
      break;
    case Preset::ring_cylinder:
      require_positive(params, {2}, {2});
      if (params.sites < 1 || !(params.scale_um > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "ring_cylinder needs sites >= 1 and a positive radius");
      }
      pattern = ring_cylinder_sites(params);
      break;
    case Preset::trefoil_knot:
      if (params.sites < 1 || !(params.scale_um > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "trefoil_knot needs sites >= 1 and a positive scale");
      }
      pattern = trefoil_sites(params);
      break;
  }

  std::vector<TrapSite> sites;
  sites.reserve(pattern.size());
  for (const auto& p : pattern) {
    sites.push_back({p, true, std::nullopt});
  }
  if (params.reservoir_factor > 1.0) {
    sites = add_reservoir(sites, grown, params.reservoir_factor, params.limits, params.epsilon_z_um);
  }
  return TrapLayout(preset_name(preset, params), std::move(sites), params.limits);
}

}  // namespace tweezer
