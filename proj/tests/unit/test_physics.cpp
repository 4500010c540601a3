#include "tweezer/physics.hpp"
#include "tweezer/common.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace tweezer;

namespace {

// Harmonic frequencies of a Gaussian focus written out in SI units:
// U(r) ~ -U0 (1 - 2 r^2 / w0^2) gives m w^2 = 4 U0 / w0^2, and along z
// U ~ -U0 (1 - z^2 / zR^2) gives m w^2 = 2 U0 / zR^2.
double radial_khz(double depth_mk, double w0_um) {
  const double u0 = depth_mk * 1.380649e-26;
  return std::sqrt(4 * u0 / (1.443160e-25 * std::pow(w0_um * 1e-6, 2))) / (2 * M_PI) / 1000;
}

double axial_khz(double depth_mk, double zr_um) {
  const double u0 = depth_mk * 1.380649e-26;
  return std::sqrt(2 * u0 / (1.443160e-25 * std::pow(zr_um * 1e-6, 2))) / (2 * M_PI) / 1000;
}

const MtParams& calibrated() {
  static const MtParams mt = calibrate_crosstalk(MtParams{});
  return mt;
}

}  // namespace

TEST(TrapDepth, LinearFromTheAnchor) {
  EXPECT_DOUBLE_EQ(trap_depth(3.5), 1.0);
  EXPECT_DOUBLE_EQ(trap_depth(0.0), 0.0);
  EXPECT_DOUBLE_EQ(trap_depth(7.0), 2.0);
  EXPECT_THROW(trap_depth(-1.0), Error);
  EXPECT_DOUBLE_EQ(TrapPhysics{}.depth_mk(), 1.0);
}

TEST(TrapFrequencies, MatchesHarmonicExpansion) {
  const auto f = trap_frequencies(1.0, 1.1, 4.47);
  EXPECT_NEAR(f.radial_khz, radial_khz(1.0, 1.1), 1e-9);
  EXPECT_NEAR(f.axial_khz, axial_khz(1.0, 4.47), 1e-9);
  EXPECT_NEAR(f.radial_khz, 90.0, 5.0);
  EXPECT_NEAR(f.axial_khz, 16.0, 2.0);
}

TEST(TrapFrequencies, ScalesAsSquareRootOfDepth) {
  const auto a = trap_frequencies(1.0, 1.1, 4.47);
  const auto b = trap_frequencies(4.0, 1.1, 4.47);
  EXPECT_NEAR(b.radial_khz / a.radial_khz, 2.0, 1e-12);
  EXPECT_NEAR(b.axial_khz / a.axial_khz, 2.0, 1e-12);
  const auto c = trap_frequencies(2.7, 1.1, 4.47);
  EXPECT_NEAR(c.radial_khz / a.radial_khz, std::sqrt(2.7), 1e-12);
}

TEST(TrapFrequencies, DoublingWaistHalvesRadialOnly) {
  const auto a = trap_frequencies(1.0, 1.1, 4.47);
  const auto b = trap_frequencies(1.0, 2.2, 4.47);
  EXPECT_NEAR(b.radial_khz, 0.5 * a.radial_khz, 1e-12);
  EXPECT_DOUBLE_EQ(b.axial_khz, a.axial_khz);
  EXPECT_THROW(trap_frequencies(0.0, 1.1, 4.47), Error);
}

TEST(Rayleigh, FormulaValues) {
  EXPECT_NEAR(rayleigh_length(1.1, 0.85), 4.4719, 1e-3);
  EXPECT_NEAR(rayleigh_length(1.3, 0.85), 6.2462, 1e-3);
  EXPECT_NEAR(rayleigh_length(2.6, 0.85) / rayleigh_length(1.3, 0.85), 4.0, 1e-12);
  EXPECT_NEAR(MtParams{}.rayleigh_um, rayleigh_length(1.3, 0.85), 1e-12);
  EXPECT_THROW(rayleigh_length(-1, 0.85), Error);
}

TEST(Crosstalk, CalibrationHitsAllThreeAnchors) {
  const auto& mt = calibrated();
  EXPECT_NEAR(mt_pass_loss(17.0, 0.0, mt), 0.01, 1e-4);
  EXPECT_NEAR(mt_pass_loss(0.0, 0.0, mt), 0.99, 1e-4);
  EXPECT_NEAR(mt_pass_loss(14.0, 0.0, reduced_power(mt)), 0.01, 1e-4);
  EXPECT_LE(mt_pass_loss(17.0, 0.0, mt), 0.01 + 1e-9);
  EXPECT_LE(mt_pass_loss(14.0, 0.0, reduced_power(mt)), 0.01 + 1e-9);
  EXPECT_GE(mt_pass_loss(0.0, 0.0, mt), 0.99 - 1e-9);
}

TEST(Crosstalk, ReducedPowerFractionFromAxialIntensity) {
  // on-axis MT intensity falls as 1 / (1 + (dz / zR)^2); equal perturbation at
  // 14 um (reduced) and 17 um (full) fixes the fraction
  const double zr = MtParams{}.rayleigh_um;
  const double expect = (1 + std::pow(14 / zr, 2)) / (1 + std::pow(17 / zr, 2));
  EXPECT_NEAR(reduced_power_fraction(MtParams{}), expect, 1e-12);
  EXPECT_NEAR(expect, 0.72, 0.01);
}

TEST(Crosstalk, RecalibrationIsIdempotent) {
  const auto& once = calibrated();
  const auto twice = calibrate_crosstalk(once);
  EXPECT_NEAR(twice.loss_threshold_theta, once.loss_threshold_theta, 1e-6);
  EXPECT_NEAR(twice.loss_steepness, once.loss_steepness, 1e-6);
}

TEST(Crosstalk, MonotoneInOffsetsAndPower) {
  const auto& mt = calibrated();
  EXPECT_GT(mt_pass_loss(10.0, 0.0, mt), mt_pass_loss(17.0, 0.0, mt));
  // off axis the beam intensity grows with dz while 1 + (dz/zR)^2 < 2 dr^2 / w0^2,
  // so monotonicity in dz holds for dr <= w0 / sqrt(2)
  const double dr_max = mt.waist_um / std::sqrt(2.0);
  for (double dr : {0.0, 0.3, 0.6, dr_max}) {
    double prev = 2.0;
    for (double dz = 0.0; dz <= 40.0; dz += 0.5) {
      const double l = mt_pass_loss(dz, dr, mt);
      EXPECT_LE(l, prev + 1e-15);
      EXPECT_GE(l, 0.0);
      EXPECT_LE(l, 1.0);
      prev = l;
    }
  }
  for (double dz = 0.0; dz <= 30.0; dz += 1.5) {
    double prev = 2.0;
    for (double dr = 0.0; dr <= 8.0; dr += 0.25) {
      const double l = mt_pass_loss(dz, dr, mt);
      EXPECT_LE(l, prev + 1e-15);
      prev = l;
    }
  }
  MtParams stronger = mt;
  for (double dz = 0.0; dz <= 30.0; dz += 2.0) {
    stronger.power_ratio = mt.power_ratio * 1.3;
    EXPECT_GE(mt_pass_loss(dz, 0.5, stronger), mt_pass_loss(dz, 0.5, mt));
  }
}

TEST(Crosstalk, VanishesFarAway) {
  const auto& mt = calibrated();
  // linear in the perturbation near zero, which falls as 1 / dz^2 far from focus
  const double far = mt_pass_loss(1e4, 0.0, mt);
  EXPECT_LT(far, 1e-6);
  EXPECT_NEAR(mt_pass_loss(2e4, 0.0, mt) / far, 0.25, 0.0025);
  EXPECT_LT(mt_pass_loss(0.0, 50.0, mt), 1e-12);
  EXPECT_THROW(mt_pass_loss(-1.0, 0.0, mt), Error);
}

TEST(Crosstalk, OffAxisLossRisesBeforeItFalls) {
  const auto& mt = calibrated();
  const double dr = 2.0;
  // peak of exp(-2 dr^2 / (w0^2 q)) / q sits at q = 2 dr^2 / w0^2
  const double q_peak = 2 * dr * dr / (mt.waist_um * mt.waist_um);
  const double dz_peak = mt.rayleigh_um * std::sqrt(q_peak - 1);
  EXPECT_LT(mt_pass_loss(0.0, dr, mt), mt_pass_loss(dz_peak, dr, mt));
  EXPECT_GT(mt_pass_loss(dz_peak, dr, mt), mt_pass_loss(2 * dz_peak, dr, mt));
}

TEST(Crosstalk, PerturbationFollowsGaussianBeam) {
  MtParams mt;
  const double dz = 5.0;
  const double dr = 1.2;
  const double q = 1 + std::pow(dz / mt.rayleigh_um, 2);
  const double w2 = mt.waist_um * mt.waist_um * q;
  EXPECT_NEAR(mt_perturbation(dz, dr, mt), mt.power_ratio / q * std::exp(-2 * dr * dr / w2), 1e-12);
}

TEST(Crosstalk, CalibrationRejectsInvalidParameters) {
  MtParams mt;
  mt.power_ratio = 0.0;
  try {
    calibrate_crosstalk(mt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::calibration_failed);
  }
}

TEST(Survival, ExponentialDecay) {
  EXPECT_DOUBLE_EQ(survival(0.0, 10.0), 1.0);
  EXPECT_NEAR(survival(10.0, 10.0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(survival(0.5, 10.0), 0.9512, 1e-4);
  EXPECT_DOUBLE_EQ(survival(3.0, std::numeric_limits<double>::infinity()), 1.0);
  EXPECT_THROW(survival(-1.0, 10.0), Error);
  EXPECT_THROW(survival(1.0, 0.0), Error);
}

TEST(Survival, Multiplicative) {
  for (double a : {0.1, 0.7, 2.5}) {
    for (double b : {0.05, 1.3}) {
      EXPECT_NEAR(survival(a + b, 10.0), survival(a, 10.0) * survival(b, 10.0), 1e-12);
    }
  }
}
