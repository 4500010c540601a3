#include "tweezer/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tweezer {

namespace {

struct ZCluster {
  double z_center = 0.0;
  std::vector<std::size_t> members;
};

std::vector<ZCluster> cluster_z(const std::vector<TrapSite>& sites, double epsilon_z_um) {
  std::vector<std::size_t> order(sites.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sites[a].position.z < sites[b].position.z; });
  std::vector<ZCluster> out;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || sites[order[i]].position.z - sites[order[i - 1]].position.z > epsilon_z_um) {
      out.emplace_back();
    }
    out.back().members.push_back(order[i]);
  }
  for (auto& c : out) {
    const double lo = sites[c.members.front()].position.z;
    const double hi = sites[c.members.back()].position.z;
    c.z_center = 0.5 * (lo + hi);
  }
  return out;
}

bool in_fov(const LayoutLimits& limits, Vec3 p) {
  return std::abs(p.x) <= limits.fov_half_xy_um && std::abs(p.y) <= limits.fov_half_xy_um &&
         std::abs(p.z) <= limits.fov_half_z_um;
}

}  // namespace

std::vector<TrapSite> add_reservoir(const std::vector<TrapSite>& targets, const std::vector<Vec3>& candidates,
                                    double factor, const LayoutLimits& limits, double epsilon_z_um) {
  std::vector<TrapSite> sites = targets;
  if (!(factor > 1.0) || targets.empty()) {
    return sites;
  }

  // spacing used for ring candidates and for keeping reservoir sites apart
  const double ring_step = std::max(4.0, limits.min_pair_distance_um + 1.0);

  auto clear_of_all = [&](Vec3 p, double min_dist) {
    return std::all_of(sites.begin(), sites.end(),
                       [&](const TrapSite& s) { return distance(s.position, p) >= min_dist; });
  };

  for (const auto& cluster : cluster_z(targets, epsilon_z_um)) {
    const auto target_count = cluster.members.size();
    const auto wanted = static_cast<std::size_t>(std::ceil(factor * static_cast<double>(target_count) - 1e-9));
    std::size_t need = wanted - target_count;
    if (need == 0) {
      continue;
    }

    Vec3 centroid;
    double extent = 0.0;
    for (auto m : cluster.members) {
      centroid = centroid + targets[m].position;
    }
    centroid = (1.0 / static_cast<double>(target_count)) * centroid;
    for (auto m : cluster.members) {
      extent = std::max(extent, lateral_distance(targets[m].position, centroid));
    }

    // same-plane sites of the extended pattern, nearest first
    std::vector<std::size_t> order;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (std::abs(candidates[c].z - cluster.z_center) <= epsilon_z_um) {
        order.push_back(c);
      }
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return lateral_distance(candidates[a], centroid) < lateral_distance(candidates[b], centroid);
    });
    for (auto c : order) {
      if (need == 0) {
        break;
      }
      const Vec3 p = candidates[c];
      if (in_fov(limits, p) && clear_of_all(p, limits.min_pair_distance_um)) {
        sites.push_back({p, false, std::nullopt});
        --need;
      }
    }

    // concentric rings around the plane's targets
    for (int ring = 1; need > 0 && ring <= 16; ++ring) {
      const double radius = extent + ring * ring_step;
      const int n = std::max(6, static_cast<int>(std::floor(kTwoPi * radius / ring_step)));
      for (int k = 0; k < n && need > 0; ++k) {
        const double th = kTwoPi * k / n;
        const Vec3 p{centroid.x + radius * std::cos(th), centroid.y + radius * std::sin(th), cluster.z_center};
        if (in_fov(limits, p) && clear_of_all(p, ring_step)) {
          sites.push_back({p, false, std::nullopt});
          --need;
        }
      }
    }
    if (need > 0) {
      throw LayoutError("no room for " + std::to_string(need) + " reservoir traps in the plane at z = " +
                            std::to_string(cluster.z_center) + " um",
                        cluster.members);
    }
  }
  return sites;
}

}  // namespace tweezer
