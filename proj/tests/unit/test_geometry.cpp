#include "tweezer/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

using namespace tweezer;

namespace {

TrapLayout make_layout(std::vector<Vec3> points, LayoutLimits limits = {}) {
  std::vector<TrapSite> sites;
  for (auto p : points) {
    sites.push_back({p, true, std::nullopt});
  }
  return TrapLayout("test", std::move(sites), limits);
}

PresetParams cubic_params(int n, double lateral, double axial) {
  PresetParams p;
  p.counts = {n, n, n};
  p.spacing_um = {lateral, lateral, axial};
  return p;
}

}  // namespace

TEST(Layout, RejectsEmptyLayout) {
  EXPECT_THROW(make_layout({}), LayoutError);
}

TEST(Layout, RejectsTooManyTraps) {
  LayoutLimits limits;
  limits.max_traps = 3;
  EXPECT_THROW(make_layout({{0, 0, 0}, {5, 0, 0}, {10, 0, 0}, {15, 0, 0}}, limits), LayoutError);
}

TEST(Layout, DuplicatePositionNamesThePair) {
  try {
    make_layout({{0, 0, 0}, {10, 0, 0}, {10, 0, 0}});
    FAIL() << "expected a layout error";
  } catch (const LayoutError& e) {
    EXPECT_EQ(e.code(), ErrorCode::layout_invalid);
    ASSERT_EQ(e.indices().size(), 2u);
    EXPECT_EQ(e.indices()[0], 1u);
    EXPECT_EQ(e.indices()[1], 2u);
  }
}

TEST(Layout, RejectsPairCloserThanMinimum) {
  EXPECT_THROW(make_layout({{0, 0, 0}, {2.9, 0, 0}}), LayoutError);
  EXPECT_NO_THROW(make_layout({{0, 0, 0}, {3.0, 0, 0}}));
}

TEST(Layout, RejectsPointsOutsideFieldOfView) {
  EXPECT_THROW(make_layout({{50.5, 0, 0}}), LayoutError);
  EXPECT_THROW(make_layout({{0, 0, -100.5}}), LayoutError);
  EXPECT_NO_THROW(make_layout({{50, -50, 100}}));
}

TEST(Layout, RejectsNonFinitePositions) {
  EXPECT_THROW(make_layout({{std::nan(""), 0, 0}}), Error);
}

TEST(Presets, CubicFiveCubedHasFiveAxialPlanes) {
  const auto layout = generate_preset(Preset::cubic, cubic_params(5, 10, 17));
  EXPECT_EQ(layout.size(), 125u);
  const auto planes = decompose_planes(layout);
  ASSERT_EQ(planes.plane_count(), 5u);
  const double expected[] = {-34, -17, 0, 17, 34};
  for (int k = 0; k < 5; ++k) {
    EXPECT_NEAR(planes.planes[k].z_center_um, expected[k], 1e-12);
    EXPECT_EQ(planes.planes[k].traps.size(), 25u);
  }
}

TEST(Presets, OffsetBilayerShiftsSecondLayerByHalfSpacing) {
  PresetParams p;
  p.counts = {6, 6, 1};
  p.spacing_um = {4, 4, 5};
  const auto layout = generate_preset(Preset::bilayer_square_offset, p);
  ASSERT_EQ(layout.size(), 72u);
  std::set<std::pair<long, long>> lower;
  for (const auto& t : layout.traps()) {
    if (t.position.z == 0.0) {
      lower.insert({std::lround(t.position.x * 1000), std::lround(t.position.y * 1000)});
    }
  }
  EXPECT_EQ(lower.size(), 36u);
  int upper = 0;
  for (const auto& t : layout.traps()) {
    if (t.position.z == 5.0) {
      ++upper;
      const long x = std::lround((t.position.x - 2.0) * 1000);
      const long y = std::lround((t.position.y - 2.0) * 1000);
      EXPECT_TRUE(lower.count({x, y})) << t.position.x << ", " << t.position.y;
    }
  }
  EXPECT_EQ(upper, 36);
}

TEST(Presets, TrefoilSitesLieOnTheKnot) {
  PresetParams p;
  p.sites = 60;
  p.scale_um = 20;
  const auto layout = generate_preset(Preset::trefoil_knot, p);
  ASSERT_EQ(layout.size(), 60u);
  const double s = 10.0;  // scale is the major radius, which is 2 in knot units
  for (int k = 0; k < 60; ++k) {
    const double t = 2 * M_PI * k / 60;
    const Vec3 expect{s * (std::sin(t) + 2 * std::sin(2 * t)), s * (std::cos(t) - 2 * std::cos(2 * t)),
                      -s * std::sin(3 * t)};
    EXPECT_NEAR(distance(layout[static_cast<std::size_t>(k)].position, expect), 0.0, 1e-9);
  }
}

TEST(Presets, AreDeterministicAndCentred) {
  for (auto preset : all_presets()) {
    PresetParams p;
    p.counts = {3, 3, 2};
    p.spacing_um = {8, 8, 17};
    p.sites = 24;
    p.scale_um = 20;
    p.limits.max_traps = 1000;
    if (preset == Preset::pyrochlore) {
      p.spacing_um = {12, 12, 12};  // nearest neighbours sit sqrt(2)/4 of a cell apart
    }
    const auto a = generate_preset(preset, p);
    const auto b = generate_preset(preset, p);
    EXPECT_TRUE(a == b) << to_string(preset);
    // bilayers keep the bottom layer centred; the top layer carries the stacking shift
    const bool bilayer = preset == Preset::bilayer_square_offset || preset == Preset::bilayer_graphene;
    Vec3 c{};
    std::size_t n = 0;
    for (const auto& t : a.traps()) {
      if (!bilayer || t.position.z == 0.0) {
        c = c + t.position;
        ++n;
      }
    }
    c = (1.0 / static_cast<double>(n)) * c;
    EXPECT_NEAR(c.x, 0.0, 1e-9) << to_string(preset);
    EXPECT_NEAR(c.y, 0.0, 1e-9) << to_string(preset);
  }
}

TEST(Presets, ReservoirDoublesEachPlane) {
  PresetParams p;
  p.counts = {3, 3, 2};
  p.spacing_um = {10, 10, 17};
  p.reservoir_factor = 2.0;
  const auto layout = generate_preset(Preset::cubic, p);
  EXPECT_EQ(layout.target_count(), 18u);
  EXPECT_EQ(layout.size(), 36u);
  const auto planes = decompose_planes(layout);
  ASSERT_EQ(planes.plane_count(), 2u);
  for (const auto& plane : planes.planes) {
    std::size_t targets = 0;
    for (auto t : plane.traps) {
      targets += layout[t].is_target ? 1 : 0;
    }
    EXPECT_EQ(targets, 9u);
    EXPECT_EQ(plane.traps.size(), 18u);
  }
}

TEST(Presets, RejectsBadParameters) {
  auto p = cubic_params(0, 10, 17);
  EXPECT_THROW(generate_preset(Preset::cubic, p), Error);
  p = cubic_params(2, -1, 17);
  EXPECT_THROW(generate_preset(Preset::cubic, p), Error);
  p = cubic_params(20, 10, 17);  // 8000 traps
  EXPECT_THROW(generate_preset(Preset::cubic, p), LayoutError);
}

TEST(Presets, NamesRoundTrip) {
  for (auto preset : all_presets()) {
    EXPECT_EQ(parse_preset(to_string(preset)), preset);
  }
  EXPECT_FALSE(parse_preset("dodecahedron").has_value());
}

TEST(Planes, BilayerGivesTwoPlanes) {
  const auto layout = make_layout({{0, 0, 0}, {5, 0, 0}, {2.5, 2.5, 5}, {7.5, 2.5, 5}});
  const auto planes = decompose_planes(layout, 1.0);
  ASSERT_EQ(planes.plane_count(), 2u);
  EXPECT_EQ(planes.planes[0].traps, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(planes.planes[1].traps, (std::vector<std::size_t>{2, 3}));
}

TEST(Planes, FlatLayoutIsOnePlane) {
  const auto layout = make_layout({{0, 0, 0}, {5, 0, 0}, {0, 5, 0}});
  EXPECT_EQ(decompose_planes(layout).plane_count(), 1u);
}

TEST(Planes, SingleLinkageChainsSmallGaps) {
  const auto layout = make_layout({{0, 0, 0}, {5, 0, 0.8}, {10, 0, 1.6}, {15, 0, 5}});
  const auto planes = decompose_planes(layout, 1.0);
  ASSERT_EQ(planes.plane_count(), 2u);
  EXPECT_NEAR(planes.planes[0].z_center_um, 0.8, 1e-12);
}

TEST(Planes, SmearWiderThanTwoEpsilonIsAnError) {
  const auto layout = make_layout({{0, 0, 0}, {5, 0, 0.9}, {10, 0, 1.8}, {15, 0, 2.7}});
  EXPECT_THROW(decompose_planes(layout, 1.0), Error);
  EXPECT_THROW(decompose_planes(layout, -1.0), Error);
}

TEST(Planes, WithPlanesAssignsIndices) {
  const auto layout = make_layout({{0, 0, 10}, {5, 0, 0}});
  const auto planed = with_planes(layout, decompose_planes(layout));
  EXPECT_EQ(planed[0].plane_index, 1);
  EXPECT_EQ(planed[1].plane_index, 0);
}

TEST(Safety, AxiallyStackedPairConflicts) {
  const auto layout = make_layout({{0, 0, 0}, {0, 0, 10}});
  const auto report = validate_mt_safety(layout, decompose_planes(layout), {17, 3});
  ASSERT_EQ(report.conflicts.size(), 1u);
  EXPECT_FALSE(report.pass());
  EXPECT_NEAR(report.conflicts[0].axial_um, 10.0, 1e-12);
  EXPECT_NEAR(report.conflicts[0].lateral_um, 0.0, 1e-12);
}

TEST(Safety, OffsetBilayerPassesWithTwoMicronRadius) {
  PresetParams p;
  p.counts = {6, 6, 1};
  p.spacing_um = {4, 4, 5};
  const auto layout = generate_preset(Preset::bilayer_square_offset, p);
  EXPECT_TRUE(validate_mt_safety(layout, decompose_planes(layout), {17, 2}).pass());
}

TEST(Safety, SinglePlanePasses) {
  const auto layout = make_layout({{0, 0, 0}, {3, 0, 0}, {6, 0, 0}});
  EXPECT_TRUE(validate_mt_safety(layout, decompose_planes(layout)).pass());
}

TEST(Safety, RejectsNonPositiveThresholds) {
  const auto layout = make_layout({{0, 0, 0}});
  EXPECT_THROW(validate_mt_safety(layout, decompose_planes(layout), {0, 3}), Error);
}

TEST(Rotation, PreservesDistancesAndCentroid) {
  const auto layout = generate_preset(Preset::cubic, cubic_params(3, 8, 10));
  const auto rotated = rotate_layout(layout, Axis::x, 30.0);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    for (std::size_t j = i + 1; j < layout.size(); ++j) {
      EXPECT_NEAR(distance(layout[i].position, layout[j].position),
                  distance(rotated[i].position, rotated[j].position), 1e-9);
    }
  }
  EXPECT_NEAR(distance(layout.centroid(), rotated.centroid()), 0.0, 1e-9);
}

TEST(Rotation, QuarterTurnAboutXMapsYOntoZ) {
  const Vec3 r = rotate_about({0, 1, 0}, Axis::x, 90.0, {0, 0, 0});
  EXPECT_NEAR(r.x, 0.0, 1e-12);
  EXPECT_NEAR(r.y, 0.0, 1e-12);
  EXPECT_NEAR(r.z, 1.0, 1e-12);
}

TEST(Rotation, RejectsAnglesBeyondFortyFive) {
  const auto layout = make_layout({{0, 0, 0}});
  EXPECT_THROW(rotate_layout(layout, Axis::y, 46.0), Error);
}

TEST(Rotation, AlreadySafeLayoutNeedsNoRotation) {
  const auto layout = make_layout({{0, 0, 0}, {10, 0, 0}});
  const auto s = suggest_rotation(layout);
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->angle_deg, 0.0);
}

TEST(Rotation, StackedPairNeedsAngleWithTenSinThetaAboveThree) {
  const auto layout = make_layout({{0, 0, -5}, {0, 0, 5}});
  const auto s = suggest_rotation(layout, {17, 3}, 45.0);
  ASSERT_TRUE(s.has_value());
  // smallest grid angle with 10 sin(theta) >= 3
  const double exact = std::asin(0.3) * 180.0 / M_PI;
  const double grid = std::ceil(exact / 0.5) * 0.5;
  EXPECT_DOUBLE_EQ(std::abs(s->angle_deg), grid);
  const auto rotated = rotate_layout(layout, s->axis, s->angle_deg);
  EXPECT_TRUE(validate_mt_safety(rotated, decompose_planes(rotated), {17, 3}).pass());
  const auto just_below = rotate_layout(layout, s->axis, s->angle_deg - 0.5);
  EXPECT_FALSE(validate_mt_safety(just_below, decompose_planes(just_below), {17, 3}).pass());
}

TEST(Rotation, CloselyStackedPairHasNoFix) {
  LayoutLimits limits;
  limits.min_pair_distance_um = 0.5;
  const auto layout = make_layout({{0, 0, 0}, {0, 0, 1}}, limits);
  EXPECT_FALSE(suggest_rotation(layout, {17, 3}, 45.0, 0.5).has_value());
}

TEST(Rotation, DenseCubeFixableWithTwoMicronRadius) {
  const auto layout = generate_preset(Preset::cubic, cubic_params(5, 10, 5));
  EXPECT_FALSE(suggest_rotation(layout, {17, 3}).has_value());
  const auto s = suggest_rotation(layout, {17, 2});
  ASSERT_TRUE(s.has_value());
  const auto rotated = rotate_layout(layout, s->axis, s->angle_deg);
  EXPECT_TRUE(validate_mt_safety(rotated, decompose_planes(rotated), {17, 2}).pass());
}

TEST(GeometryProperties, SafetyConflictsMonotoneInThresholds) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-20, 20);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec3> pts;
    while (pts.size() < 15) {
      const Vec3 p{u(rng), u(rng), std::round(u(rng) / 4) * 4};
      bool ok = true;
      for (auto q : pts) {
        ok = ok && distance(p, q) >= 3.0;
      }
      if (ok) {
        pts.push_back(p);
      }
    }
    const auto layout = make_layout(pts);
    const auto planes = decompose_planes(layout);
    const auto small = validate_mt_safety(layout, planes, {10, 2}).conflicts.size();
    const auto wide_z = validate_mt_safety(layout, planes, {20, 2}).conflicts.size();
    const auto wide_r = validate_mt_safety(layout, planes, {10, 4}).conflicts.size();
    EXPECT_LE(small, wide_z);
    EXPECT_LE(small, wide_r);
  }
}

TEST(GeometryProperties, PlanesPartitionTheTraps) {
  for (auto preset : all_presets()) {
    PresetParams p;
    p.counts = {3, 3, 3};
    p.spacing_um = {8, 8, 6};
    p.sites = 30;
    p.scale_um = 20;
    p.limits.max_traps = 1000;
    if (preset == Preset::pyrochlore) {
      p.spacing_um = {12, 12, 12};  // nearest neighbours sit sqrt(2)/4 of a cell apart
    }
    const auto layout = generate_preset(preset, p);
    const auto planes = decompose_planes(layout, 0.5);
    std::vector<int> seen(layout.size(), 0);
    for (std::size_t k = 0; k < planes.plane_count(); ++k) {
      if (k > 0) {
        EXPECT_LT(planes.planes[k - 1].z_center_um, planes.planes[k].z_center_um);
      }
      for (auto t : planes.planes[k].traps) {
        ++seen[t];
        EXPECT_LE(std::abs(layout[t].position.z - planes.planes[k].z_center_um), 0.5 + 1e-12);
      }
    }
    for (int s : seen) {
      EXPECT_EQ(s, 1) << to_string(preset);
    }
  }
}

TEST(GeometryProperties, OffsetBilayersPassForAnyLayerGap) {
  for (double dz : {0.5, 2.0, 5.0, 12.0}) {
    PresetParams p;
    p.counts = {4, 4, 1};
    p.spacing_um = {6, 6, dz};
    const auto layout = generate_preset(Preset::bilayer_square_offset, p);
    EXPECT_TRUE(validate_mt_safety(layout, decompose_planes(layout, 0.25), {17, 3}).pass()) << dz;
  }
}
