#pragma once

namespace tweezer {

inline constexpr double kBoltzmann = 1.380649e-23;  // J/K
inline constexpr double kRb87Mass = 1.443160e-25;   // kg

/// Depth per unit power, anchored at 3.5 mW -> 1.0 mK.
inline constexpr double kDepthPerPowerMkPerMw = 1.0 / 3.5;

struct TrapPhysics {
  double power_per_trap_mw = 3.5;
  double waist_um = 1.1;
  double wavelength_um = 0.850;
  double atom_mass_kg = kRb87Mass;
  double temperature_uk = 25.0;  // carried for reference, unused by the loss model
  double lifetime_s = 10.0;

  [[nodiscard]] double depth_mk() const;
  [[nodiscard]] double rayleigh_um() const;
};

/// Linear depth-power scaling through the calibration anchor.
double trap_depth(double power_mw);

struct TrapFrequencies {
  double radial_khz = 0.0;
  double axial_khz = 0.0;
};

/// Harmonic expansion of a Gaussian focus:
///   omega_r = sqrt(4 U0 / (m w0^2)),  omega_z = sqrt(2 U0 / (m zR^2)).
TrapFrequencies trap_frequencies(double depth_mk, double waist_um, double rayleigh_um,
                                 double mass_kg = kRb87Mass);

/// pi w0^2 / lambda.
double rayleigh_length(double waist_um, double wavelength_um);

/// Moving-tweezers beam and its crosstalk loss curve.
struct MtParams {
  double waist_um = 1.3;
  double power_ratio = 3.0;  // MT peak intensity / trap peak intensity
  double rayleigh_um = 6.246225393607942;  // pi * 1.3^2 / 0.85
  double loss_threshold_theta = 1.0;
  double loss_steepness = 4.0;
};

/// Loss probability for one MT pass at axial offset dz and lateral offset dr.
///   s = power_ratio / (1 + (dz/zR)^2) * exp(-2 dr^2 / w(dz)^2)
///   loss = (L((s - theta) k) - L(-theta k)) / (1 - L(-theta k)),  L = logistic
/// The offset makes loss vanish as s -> 0; the result is clamped to [0, 1].
double mt_pass_loss(double dz_um, double dr_um, const MtParams& mt);

/// Relative perturbation s used inside mt_pass_loss.
double mt_perturbation(double dz_um, double dr_um, const MtParams& mt);

/// Axial offsets at which the calibrated loss reaches kCrosstalkAnchorLoss.
inline constexpr double kFullPowerSafeDzUm = 17.0;
inline constexpr double kReducedPowerSafeDzUm = 14.0;
inline constexpr double kCrosstalkAnchorLoss = 0.01;
inline constexpr double kOnAxisExtractionLoss = 0.99;

/// Power fraction at which the on-axis perturbation at 14 um equals the
/// full-power perturbation at 17 um: (1 + (14/zR)^2) / (1 + (17/zR)^2).
double reduced_power_fraction(const MtParams& mt);

/// Same beam at reduced power.
MtParams reduced_power(const MtParams& mt);

/// Solves (theta, steepness) so that loss(17 um, 0) = 0.01 and
/// loss(0, 0) = 0.99 at full power (Newton iteration, residual < 1e-12).
/// At the reduced power fraction, loss(14 um, 0) = 0.01 follows.
MtParams calibrate_crosstalk(const MtParams& mt);

/// exp(-t / tau).
double survival(double t_s, double tau_s);

struct LossModel {
  double move_fidelity = 0.993;
  double lifetime_s = 10.0;  // infinity disables lifetime loss
  bool crosstalk_enabled = true;
  MtParams crosstalk = calibrate_crosstalk(MtParams{});
};

}  // namespace tweezer
