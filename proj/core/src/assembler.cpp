#include "tweezer/assembler.hpp"

#include <algorithm>
#include <iterator>
#include <numeric>
#include <string>

namespace tweezer {

namespace {

constexpr double kEps = 1e-9;

double polyline_length(const std::vector<Vec3>& path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) {
    len += distance(path[i - 1], path[i]);
  }
  return len;
}

// Collision checks and path search for one plane.
class Router {
 public:
  Router(const TrapLayout& layout, std::vector<std::size_t> plane_traps, double radius, double mt_z)
      : layout_(layout), plane_traps_(std::move(plane_traps)), radius_(radius), mt_z_(mt_z) {}

  void set_soft_obstacles(std::vector<Vec3> points, double radius) {
    soft_ = std::move(points);
    soft_radius_ = radius;
  }
  [[nodiscard]] bool has_soft() const { return !soft_.empty(); }
  [[nodiscard]] const std::vector<std::size_t>& plane_traps() const { return plane_traps_; }
  [[nodiscard]] const TrapLayout& layout() const { return layout_; }
  [[nodiscard]] double radius() const { return radius_; }
  [[nodiscard]] double mt_z() const { return mt_z_; }

  // Occupied plane traps other than `mover` closer than the collision radius
  // to the path, with their projection parameter along the first segment.
  [[nodiscard]] std::vector<std::pair<double, std::size_t>> blockers(const std::vector<Vec3>& path,
                                                                     const Occupancy& occ,
                                                                     std::size_t mover) const {
    std::vector<std::pair<double, std::size_t>> out;
    const Vec3 a = path.front();
    const Vec3 b = path.back();
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    for (std::size_t t : plane_traps_) {
      if (t == mover || !occ[t]) {
        continue;
      }
      const Vec3 p = layout_[t].position;
      if (lateral_distance_to_polyline(p, path) < radius_ - kEps) {
        const double s = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
        out.emplace_back(s, t);
      }
    }
    return out;
  }

  [[nodiscard]] bool clear(const std::vector<Vec3>& path, const Occupancy& occ, std::size_t mover,
                           bool strict) const {
    for (const Vec3& w : path) {
      if (!layout_.in_field_of_view(w)) {
        return false;
      }
    }
    for (std::size_t t : plane_traps_) {
      if (t != mover && occ[t] && lateral_distance_to_polyline(layout_[t].position, path) < radius_ - kEps) {
        return false;
      }
    }
    if (strict) {
      for (const Vec3& p : soft_) {
        if (lateral_distance_to_polyline(p, path) < soft_radius_ - kEps) {
          return false;
        }
      }
    }
    return true;
  }

  // Straight path if clear, otherwise the shortest clear one-waypoint detour.
  [[nodiscard]] std::optional<std::vector<Vec3>> route(Vec3 a, Vec3 b, const Occupancy& occ, std::size_t mover,
                                                       bool strict, bool allow_detour) const {
    std::vector<Vec3> straight{a, b};
    if (clear(straight, occ, mover, strict)) {
      return straight;
    }
    if (!allow_detour) {
      return std::nullopt;
    }
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len = std::hypot(dx, dy);
    if (len < kEps) {
      return std::nullopt;
    }
    const double nx = -dy / len;
    const double ny = dx / len;
    std::vector<Vec3> candidates;
    candidates.reserve(40);
    if (std::abs(dx) > kEps && std::abs(dy) > kEps) {
      candidates.push_back({b.x, a.y, mt_z_});
      candidates.push_back({a.x, b.y, mt_z_});
    }
    const double step = std::max(radius_, 0.5);
    for (double alpha : {0.5, 0.25, 0.75}) {
      for (double mult : {1.0, 2.0, 3.0, 4.0, 6.0, 8.0}) {
        for (double sign : {1.0, -1.0}) {
          const double beta = sign * mult * step;
          candidates.push_back({a.x + alpha * dx + beta * nx, a.y + alpha * dy + beta * ny, mt_z_});
        }
      }
    }
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      order.emplace_back(lateral_distance(a, candidates[i]) + lateral_distance(candidates[i], b), i);
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& l, const auto& r) { return l.first < r.first; });
    for (const auto& [len_i, i] : order) {
      std::vector<Vec3> path{a, candidates[i], b};
      if (clear(path, occ, mover, strict)) {
        return path;
      }
    }
    return std::nullopt;
  }

  // Tries strict routing first, then ignores soft obstacles.
  [[nodiscard]] std::optional<std::vector<Vec3>> route_any(Vec3 a, Vec3 b, const Occupancy& occ,
                                                           std::size_t mover) const {
    if (auto p = route(a, b, occ, mover, true, true)) {
      return p;
    }
    if (has_soft()) {
      return route(a, b, occ, mover, false, true);
    }
    return std::nullopt;
  }

 private:
  const TrapLayout& layout_;
  std::vector<std::size_t> plane_traps_;
  double radius_;
  double mt_z_;
  std::vector<Vec3> soft_;
  double soft_radius_ = 0.0;
};

Move make_transfer(std::size_t from, std::size_t to, std::vector<Vec3> path) {
  Move m;
  m.kind = MoveKind::transfer;
  m.from = from;
  m.to = to;
  m.path = std::move(path);
  return m;
}

std::vector<Move> order_transfers(std::vector<Transfer> pending, Occupancy& occ, const Router& router) {
  const TrapLayout& layout = router.layout();
  const double radius = router.radius();
  std::vector<Move> out;
  out.reserve(pending.size());
  const std::size_t cap = 16 * (pending.size() + router.plane_traps().size()) + 64;

  auto pos = [&](std::size_t i) { return layout[i].position; };
  auto ready = [&](const Transfer& m) { return occ[m.from] && !occ[m.to]; };
  auto execute = [&](std::size_t i, std::vector<Vec3> path) {
    const Transfer m = pending[i];
    occ[m.from] = false;
    occ[m.to] = true;
    out.push_back(make_transfer(m.from, m.to, std::move(path)));
    pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(i));
  };
  // True if dropping an atom on pending[i].to would block another pending
  // straight path.
  auto blocks_others = [&](std::size_t i) {
    const Vec3 d = pos(pending[i].to);
    for (std::size_t j = 0; j < pending.size(); ++j) {
      if (j != i && lateral_distance_to_segment(d, pos(pending[j].from), pos(pending[j].to)) < radius - kEps) {
        return true;
      }
    }
    return false;
  };

  for (std::size_t iter = 0; !pending.empty(); ++iter) {
    if (iter > cap) {
      throw Error(ErrorCode::infeasible, "move ordering did not terminate");
    }
    // Straight moves, preferring ones that leave other paths open.
    std::optional<std::size_t> pick;
    std::optional<std::size_t> fallback;
    for (std::size_t i = 0; i < pending.size() && !pick; ++i) {
      const Transfer& m = pending[i];
      if (!ready(m) || !router.clear({pos(m.from), pos(m.to)}, occ, m.from, true)) {
        continue;
      }
      if (!blocks_others(i)) {
        pick = i;
      } else if (!fallback) {
        fallback = i;
      }
    }
    if (!pick) {
      pick = fallback;
    }
    if (pick) {
      const Transfer m = pending[*pick];
      execute(*pick, {pos(m.from), pos(m.to)});
      continue;
    }
    bool moved = false;
    for (bool strict : {true, false}) {
      if (!strict && !router.has_soft()) {
        break;
      }
      for (std::size_t i = 0; i < pending.size() && !moved; ++i) {
        const Transfer& m = pending[i];
        if (!ready(m)) {
          continue;
        }
        if (auto path = router.route(pos(m.from), pos(m.to), occ, m.from, strict, true)) {
          execute(i, std::move(*path));
          moved = true;
        }
      }
      if (moved) {
        break;
      }
    }
    if (moved) {
      continue;
    }

    // A ready move blocked by atoms: route through the blocker nearest to
    // the destination instead.
    bool split = false;
    for (std::size_t i = 0; i < pending.size() && !split; ++i) {
      const Transfer m = pending[i];
      if (!ready(m)) {
        continue;
      }
      auto blocking = router.blockers({pos(m.from), pos(m.to)}, occ, m.from);
      if (blocking.empty()) {
        continue;
      }
      const auto o = std::max_element(blocking.begin(), blocking.end(), [](const auto& l, const auto& r) {
                       return l.first < r.first || (l.first == r.first && l.second > r.second);
                     })->second;
      const bool o_is_source =
          std::any_of(pending.begin(), pending.end(), [&](const Transfer& t) { return t.from == o; });
      pending[i] = {o, m.to};
      if (layout[o].is_target || o_is_source) {
        pending.insert(pending.begin() + static_cast<std::ptrdiff_t>(i) + 1, Transfer{m.from, o});
      }
      split = true;
    }
    if (split) {
      continue;
    }

    // No ready move: a dependency cycle. Stage the atom sitting on the
    // destination of the first lifted move.
    const auto stuck = std::find_if(pending.begin(), pending.end(),
                                    [&](const Transfer& t) { return occ[t.from] && occ[t.to]; });
    if (stuck == pending.end()) {
      throw Error(ErrorCode::infeasible, "no executable move and no cycle to break");
    }
    const std::size_t c = stuck->to;
    std::vector<std::size_t> sites;
    for (std::size_t t : router.plane_traps()) {
      const bool is_destination =
          std::any_of(pending.begin(), pending.end(), [&](const Transfer& p) { return p.to == t; });
      if (!occ[t] && !layout[t].is_target && !is_destination) {
        sites.push_back(t);
      }
    }
    std::stable_sort(sites.begin(), sites.end(), [&](std::size_t l, std::size_t r) {
      return lateral_distance(pos(l), pos(c)) < lateral_distance(pos(r), pos(c));
    });
    bool staged = false;
    for (std::size_t x : sites) {
      if (auto path = router.route_any(pos(c), pos(x), occ, c)) {
        occ[c] = false;
        occ[x] = true;
        out.push_back(make_transfer(c, x, std::move(*path)));
        for (auto& p : pending) {
          if (p.from == c) {
            p.from = x;
          }
        }
        staged = true;
        break;
      }
    }
    if (!staged) {
      throw Error(ErrorCode::infeasible,
                  "no free staging site to break the move cycle through trap " + std::to_string(c));
    }
  }
  return out;
}

struct Point2 {
  double x;
  double y;
};

double cross(Point2 o, Point2 a, Point2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

// Counter-clockwise convex hull without collinear points.
std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end(), [](Point2 a, Point2 b) { return a.x == b.x && a.y == b.y; }),
            pts.end());
  if (pts.size() < 3) {
    return pts;
  }
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= kEps) {
      --k;
    }
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= kEps) {
      --k;
    }
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

class ExitFinder {
 public:
  ExitFinder(const TrapLayout& layout, const std::vector<std::size_t>& plane_traps, double exit_distance,
             double mt_z)
      : layout_(layout), exit_distance_(exit_distance), mt_z_(mt_z) {
    std::vector<Point2> pts;
    pts.reserve(plane_traps.size());
    for (std::size_t t : plane_traps) {
      pts.push_back({layout[t].position.x, layout[t].position.y});
      center_.x += layout[t].position.x;
      center_.y += layout[t].position.y;
    }
    if (!pts.empty()) {
      center_.x /= static_cast<double>(pts.size());
      center_.y /= static_cast<double>(pts.size());
    }
    for (const auto& p : pts) {
      extent_ = std::max(extent_, std::hypot(p.x - center_.x, p.y - center_.y));
    }
    hull_ = convex_hull(std::move(pts));
  }

  [[nodiscard]] Point2 center() const { return center_; }

  // Candidate exit points for an atom at p, nearest hull edge first.
  [[nodiscard]] std::vector<Vec3> exits(Vec3 p) const {
    std::vector<std::pair<double, Vec3>> cands;
    if (hull_.size() >= 3) {
      for (std::size_t i = 0; i < hull_.size(); ++i) {
        const Point2 a = hull_[i];
        const Point2 b = hull_[(i + 1) % hull_.size()];
        const Vec3 va{a.x, a.y, p.z};
        const Vec3 vb{b.x, b.y, p.z};
        const double dx = b.x - a.x;
        const double dy = b.y - a.y;
        const double len = std::hypot(dx, dy);
        double s = ((p.x - a.x) * dx + (p.y - a.y) * dy) / (len * len);
        s = std::clamp(s, 0.0, 1.0);
        const double qx = a.x + s * dx;
        const double qy = a.y + s * dy;
        // outward normal of a counter-clockwise edge
        const double nx = dy / len;
        const double ny = -dx / len;
        cands.emplace_back(lateral_distance_to_segment(p, va, vb),
                           clamp({qx + exit_distance_ * nx, qy + exit_distance_ * ny, mt_z_}));
      }
    } else {
      std::vector<Point2> dirs;
      const double rx = p.x - center_.x;
      const double ry = p.y - center_.y;
      const double r = std::hypot(rx, ry);
      if (r > kEps) {
        dirs.push_back({rx / r, ry / r});
      }
      dirs.insert(dirs.end(), {{1, 0}, {-1, 0}, {0, 1}, {0, -1}});
      double rank = 0.0;
      for (const auto& d : dirs) {
        const double reach = extent_ + exit_distance_;
        cands.emplace_back(rank, clamp({center_.x + reach * d.x, center_.y + reach * d.y, mt_z_}));
        rank += 1.0;
      }
    }
    std::stable_sort(cands.begin(), cands.end(), [](const auto& l, const auto& r) { return l.first < r.first; });
    std::vector<Vec3> out;
    out.reserve(cands.size());
    for (const auto& c : cands) {
      out.push_back(c.second);
    }
    return out;
  }

 private:
  [[nodiscard]] Vec3 clamp(Vec3 v) const {
    const double h = layout_.limits().fov_half_xy_um;
    return {std::clamp(v.x, -h, h), std::clamp(v.y, -h, h), v.z};
  }

  const TrapLayout& layout_;
  double exit_distance_;
  double mt_z_;
  Point2 center_{0.0, 0.0};
  double extent_ = 0.0;
  std::vector<Point2> hull_;
};

// Ejects every listed atom, farthest from the plane centre first.
std::vector<Move> plan_ejections(std::vector<std::size_t> atoms, Occupancy& occ, const Router& router,
                                 const ExitFinder& exits) {
  const TrapLayout& layout = router.layout();
  const Point2 c = exits.center();
  auto radial = [&](std::size_t i) { return std::hypot(layout[i].position.x - c.x, layout[i].position.y - c.y); };
  std::stable_sort(atoms.begin(), atoms.end(), [&](std::size_t l, std::size_t r) { return radial(l) > radial(r); });

  std::vector<Move> out;
  out.reserve(atoms.size());
  while (!atoms.empty()) {
    bool progress = false;
    for (bool strict : {true, false}) {
      if (!strict && !router.has_soft()) {
        break;
      }
      for (std::size_t k = 0; k < atoms.size() && !progress; ++k) {
        const std::size_t a = atoms[k];
        const Vec3 p = layout[a].position;
        for (const Vec3& exit : exits.exits(p)) {
          if (auto path = router.route(p, exit, occ, a, strict, true)) {
            Move m;
            m.kind = MoveKind::eject;
            m.from = a;
            m.exit_um = exit;
            m.path = std::move(*path);
            out.push_back(std::move(m));
            occ[a] = false;
            atoms.erase(atoms.begin() + static_cast<std::ptrdiff_t>(k));
            progress = true;
            break;
          }
        }
      }
      if (progress) {
        break;
      }
    }
    if (!progress) {
      throw Error(ErrorCode::infeasible,
                  "atom at trap " + std::to_string(atoms.front()) + " has no collision-free path to an exit");
    }
  }
  return out;
}

const Plane& plane_at(const PlaneDecomposition& planes, int plane_index) {
  if (plane_index < 0 || static_cast<std::size_t>(plane_index) >= planes.planes.size()) {
    throw Error(ErrorCode::invalid_argument, "plane index " + std::to_string(plane_index) + " out of range");
  }
  return planes.planes[static_cast<std::size_t>(plane_index)];
}

void check_occupancy(const Occupancy& occupancy, const TrapLayout& layout) {
  if (occupancy.size() != layout.size()) {
    throw Error(ErrorCode::dimension_mismatch, "occupancy has " + std::to_string(occupancy.size()) +
                                                   " entries for " + std::to_string(layout.size()) + " traps");
  }
}

Router make_router(const Occupancy& occupancy, const TrapLayout& layout, const PlaneDecomposition& planes,
                   int plane_index, const PlannerPolicy& policy) {
  const Plane& plane = plane_at(planes, plane_index);
  Router router(layout, plane.traps, policy.collision_radius_um, plane.z_center_um);
  if (policy.crosstalk_window_um > 0.0) {
    std::vector<char> in_plane(layout.size(), 0);
    for (std::size_t t : plane.traps) {
      in_plane[t] = 1;
    }
    std::vector<Vec3> soft;
    for (std::size_t t = 0; t < layout.size(); ++t) {
      if (!in_plane[t] && occupancy[t] &&
          std::abs(layout[t].position.z - plane.z_center_um) < policy.crosstalk_window_um) {
        soft.push_back(layout[t].position);
      }
    }
    router.set_soft_obstacles(std::move(soft), policy.crosstalk_radius_um);
  }
  return router;
}

void check_policy(const PlannerPolicy& policy) {
  if (!(policy.collision_radius_um >= 0.0) || !(policy.exit_distance_um > 0.0) ||
      !(policy.crosstalk_window_um >= 0.0) || !(policy.crosstalk_radius_um >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "planner policy distances must be non-negative");
  }
}

}  // namespace

const char* to_string(MoveKind kind) { return kind == MoveKind::transfer ? "transfer" : "eject"; }

double Move::path_length_um() const { return polyline_length(path); }

std::size_t MovePlan::transfer_count() const {
  return static_cast<std::size_t>(
      std::count_if(moves.begin(), moves.end(), [](const Move& m) { return m.kind == MoveKind::transfer; }));
}

std::size_t MovePlan::eject_count() const { return moves.size() - transfer_count(); }

double MovePlan::path_length_um() const {
  return std::accumulate(moves.begin(), moves.end(), 0.0,
                         [](double acc, const Move& m) { return acc + m.path_length_um(); });
}

std::size_t AssemblyPlan::total_moves() const {
  return std::accumulate(planes.begin(), planes.end(), std::size_t{0},
                         [](std::size_t acc, const MovePlan& p) { return acc + p.moves.size(); });
}

double AssemblyPlan::total_path_length_um() const {
  return std::accumulate(planes.begin(), planes.end(), 0.0,
                         [](double acc, const MovePlan& p) { return acc + p.path_length_um(); });
}

InsufficientAtoms::InsufficientAtoms(int plane, std::size_t loaded, std::size_t targets)
    : Error(ErrorCode::insufficient_atoms, "plane " + std::to_string(plane) + " holds " + std::to_string(loaded) +
                                               " atoms for " + std::to_string(targets) + " targets"),
      plane_(plane),
      loaded_(loaded),
      targets_(targets) {}

std::vector<Move> order_moves(const std::vector<Transfer>& matching, const Occupancy& occupancy,
                              const TrapLayout& layout, double collision_radius_um,
                              const std::vector<std::size_t>& plane_traps) {
  check_occupancy(occupancy, layout);
  std::vector<std::size_t> traps = plane_traps;
  if (traps.empty()) {
    traps.resize(layout.size());
    std::iota(traps.begin(), traps.end(), std::size_t{0});
  }
  std::vector<char> seen_from(layout.size(), 0);
  std::vector<char> seen_to(layout.size(), 0);
  double z = 0.0;
  for (const auto& m : matching) {
    if (m.from >= layout.size() || m.to >= layout.size() || m.from == m.to) {
      throw Error(ErrorCode::invalid_argument, "transfer indices must be distinct and in range");
    }
    if (seen_from[m.from] || seen_to[m.to]) {
      throw Error(ErrorCode::invalid_argument, "each trap may be lifted from and dropped onto at most once");
    }
    if (!occupancy[m.from]) {
      throw Error(ErrorCode::invalid_argument, "transfer source " + std::to_string(m.from) + " is empty");
    }
    seen_from[m.from] = 1;
    seen_to[m.to] = 1;
    z = layout[m.from].position.z;
  }
  Router router(layout, std::move(traps), collision_radius_um, z);
  Occupancy occ = occupancy;
  return order_transfers(matching, occ, router);
}

MovePlan plan_plane(const Occupancy& occupancy, const TrapLayout& layout, const PlaneDecomposition& planes,
                    int plane_index, const PlannerPolicy& policy) {
  check_occupancy(occupancy, layout);
  check_policy(policy);
  const Plane& plane = plane_at(planes, plane_index);

  std::vector<std::size_t> sources;
  std::vector<std::size_t> targets;
  for (std::size_t t : plane.traps) {
    if (occupancy[t]) {
      sources.push_back(t);
    }
    if (layout[t].is_target) {
      targets.push_back(t);
    }
  }
  if (sources.size() < targets.size()) {
    throw InsufficientAtoms(plane_index, sources.size(), targets.size());
  }

  std::vector<Vec3> src_pos;
  std::vector<Vec3> tgt_pos;
  src_pos.reserve(sources.size());
  tgt_pos.reserve(targets.size());
  for (std::size_t s : sources) {
    src_pos.push_back(layout[s].position);
  }
  for (std::size_t t : targets) {
    tgt_pos.push_back(layout[t].position);
  }
  const Assignment assignment = assignment_min_cost(src_pos, tgt_pos, policy.metric, policy.method);

  std::vector<Transfer> matching;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const std::size_t s = sources[assignment.source_of_target[k]];
    if (s != targets[k]) {
      matching.push_back({s, targets[k]});
    }
  }

  MovePlan plan;
  plan.plane_index = plane_index;
  plan.mt_z_um = plane.z_center_um;
  const Router router = make_router(occupancy, layout, planes, plane_index, policy);
  Occupancy occ = occupancy;
  plan.moves = order_transfers(std::move(matching), occ, router);

  std::vector<std::size_t> surplus;
  for (std::size_t t : plane.traps) {
    if (occ[t] && !layout[t].is_target) {
      surplus.push_back(t);
    }
  }
  const ExitFinder exits(layout, plane.traps, policy.exit_distance_um, plane.z_center_um);
  auto ejections = plan_ejections(std::move(surplus), occ, router, exits);
  std::move(ejections.begin(), ejections.end(), std::back_inserter(plan.moves));
  return plan;
}

AssemblyPlan plan_assembly(const Occupancy& occupancy, const TrapLayout& layout, const PlaneDecomposition& planes,
                           const PlannerPolicy& policy) {
  check_occupancy(occupancy, layout);
  for (std::size_t p = 0; p < planes.planes.size(); ++p) {
    std::size_t loaded = 0;
    std::size_t targets = 0;
    for (std::size_t t : planes.planes[p].traps) {
      loaded += occupancy[t] ? 1 : 0;
      targets += layout[t].is_target ? 1 : 0;
    }
    if (loaded < targets) {
      throw InsufficientAtoms(static_cast<int>(p), loaded, targets);
    }
  }
  AssemblyPlan out;
  Occupancy current = occupancy;
  for (std::size_t p = 0; p < planes.planes.size(); ++p) {
    const auto& traps = planes.planes[p].traps;
    const bool has_work = std::any_of(traps.begin(), traps.end(),
                                      [&](std::size_t t) { return layout[t].is_target || current[t]; });
    if (!has_work) {
      continue;
    }
    MovePlan plan = plan_plane(current, layout, planes, static_cast<int>(p), policy);
    current = apply_plan_lossless(current, plan);
    out.planes.push_back(std::move(plan));
  }
  return out;
}

MovePlan plan_remove_all(const Occupancy& occupancy, const TrapLayout& layout, const PlaneDecomposition& planes,
                         int plane_index, const PlannerPolicy& policy) {
  check_occupancy(occupancy, layout);
  check_policy(policy);
  const Plane& plane = plane_at(planes, plane_index);
  MovePlan plan;
  plan.plane_index = plane_index;
  plan.mt_z_um = plane.z_center_um;
  std::vector<std::size_t> atoms;
  for (std::size_t t : plane.traps) {
    if (occupancy[t]) {
      atoms.push_back(t);
    }
  }
  const Router router = make_router(occupancy, layout, planes, plane_index, policy);
  const ExitFinder exits(layout, plane.traps, policy.exit_distance_um, plane.z_center_um);
  Occupancy occ = occupancy;
  plan.moves = plan_ejections(std::move(atoms), occ, router, exits);
  return plan;
}

namespace {

void replay(Occupancy& occ, const MovePlan& plan, std::size_t& index) {
  for (const Move& m : plan.moves) {
    if (m.from >= occ.size() || !occ[m.from]) {
      throw ExecutabilityError(index, "move " + std::to_string(index) + " lifts from empty trap " +
                                          std::to_string(m.from));
    }
    if (m.kind == MoveKind::transfer) {
      if (!m.to || *m.to >= occ.size() || *m.to == m.from) {
        throw ExecutabilityError(index, "move " + std::to_string(index) + " has no valid destination");
      }
      if (occ[*m.to]) {
        throw ExecutabilityError(index, "move " + std::to_string(index) + " drops onto occupied trap " +
                                            std::to_string(*m.to));
      }
      occ[*m.to] = true;
    }
    occ[m.from] = false;
    ++index;
  }
}

}  // namespace

Occupancy apply_plan_lossless(const Occupancy& occupancy, const MovePlan& plan) {
  Occupancy occ = occupancy;
  std::size_t index = 0;
  replay(occ, plan, index);
  return occ;
}

Occupancy apply_plan_lossless(const Occupancy& occupancy, const AssemblyPlan& plan) {
  Occupancy occ = occupancy;
  std::size_t index = 0;
  for (const auto& p : plan.planes) {
    replay(occ, p, index);
  }
  return occ;
}

}  // namespace tweezer
