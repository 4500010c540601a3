#include "tweezer/physics.hpp"
#include "tweezer/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace tweezer {

double TrapPhysics::depth_mk() const { return trap_depth(power_per_trap_mw); }

double TrapPhysics::rayleigh_um() const { return rayleigh_length(waist_um, wavelength_um); }

double trap_depth(double power_mw) {
  if (!(power_mw >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "trap power must be >= 0");
  }
  return power_mw * kDepthPerPowerMkPerMw;
}

TrapFrequencies trap_frequencies(double depth_mk, double waist_um, double rayleigh_um, double mass_kg) {
  if (!(depth_mk > 0.0) || !(waist_um > 0.0) || !(rayleigh_um > 0.0) || !(mass_kg > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "trap_frequencies needs positive inputs");
  }
  const double u0 = depth_mk * 1e-3 * kBoltzmann;
  const double w0 = waist_um * 1e-6;
  const double zr = rayleigh_um * 1e-6;
  const double omega_r = std::sqrt(4.0 * u0 / (mass_kg * w0 * w0));
  const double omega_z = std::sqrt(2.0 * u0 / (mass_kg * zr * zr));
  return {omega_r / kTwoPi * 1e-3, omega_z / kTwoPi * 1e-3};
}

double rayleigh_length(double waist_um, double wavelength_um) {
  if (!(waist_um > 0.0) || !(wavelength_um > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "rayleigh_length needs positive inputs");
  }
  return kPi * waist_um * waist_um / wavelength_um;
}

namespace {

double logistic(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

double shaped_loss(double s, double theta, double steepness) {
  const double floor = logistic(-theta * steepness);
  const double v = (logistic((s - theta) * steepness) - floor) / (1.0 - floor);
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace

double mt_perturbation(double dz_um, double dr_um, const MtParams& mt) {
  if (!(dz_um >= 0.0) || !(dr_um >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "MT offsets must be >= 0");
  }
  const double q = 1.0 + (dz_um / mt.rayleigh_um) * (dz_um / mt.rayleigh_um);
  const double w2 = mt.waist_um * mt.waist_um * q;
  return mt.power_ratio / q * std::exp(-2.0 * dr_um * dr_um / w2);
}

double mt_pass_loss(double dz_um, double dr_um, const MtParams& mt) {
  return shaped_loss(mt_perturbation(dz_um, dr_um, mt), mt.loss_threshold_theta, mt.loss_steepness);
}

double reduced_power_fraction(const MtParams& mt) {
  const double a = kReducedPowerSafeDzUm / mt.rayleigh_um;
  const double b = kFullPowerSafeDzUm / mt.rayleigh_um;
  return (1.0 + a * a) / (1.0 + b * b);
}

MtParams reduced_power(const MtParams& mt) {
  MtParams out = mt;
  out.power_ratio = mt.power_ratio * reduced_power_fraction(mt);
  return out;
}

MtParams calibrate_crosstalk(const MtParams& mt) {
  if (!(mt.power_ratio > 0.0) || !(mt.waist_um > 0.0) || !(mt.rayleigh_um > 0.0)) {
    throw Error(ErrorCode::calibration_failed, "MT parameters must be positive");
  }
  MtParams probe = mt;
  const double s_far = mt_perturbation(kFullPowerSafeDzUm, 0.0, probe);
  const double s_near = mt_perturbation(0.0, 0.0, probe);

  auto residual = [&](double theta, double k) {
    return std::array<double, 2>{shaped_loss(s_far, theta, k) - kCrosstalkAnchorLoss,
                                 shaped_loss(s_near, theta, k) - kOnAxisExtractionLoss};
  };

  double theta = 0.5 * (s_near + s_far);
  double k = 2.0 * std::log(kOnAxisExtractionLoss / (1.0 - kOnAxisExtractionLoss)) / (s_near - s_far);
  for (int it = 0; it < 100; ++it) {
    const auto r = residual(theta, k);
    if (std::abs(r[0]) < 1e-13 && std::abs(r[1]) < 1e-13) {
      break;
    }
    const double ht = 1e-7 * std::max(1.0, std::abs(theta));
    const double hk = 1e-7 * std::max(1.0, std::abs(k));
    const auto rt_p = residual(theta + ht, k);
    const auto rt_m = residual(theta - ht, k);
    const auto rk_p = residual(theta, k + hk);
    const auto rk_m = residual(theta, k - hk);
    const double j00 = (rt_p[0] - rt_m[0]) / (2 * ht);
    const double j10 = (rt_p[1] - rt_m[1]) / (2 * ht);
    const double j01 = (rk_p[0] - rk_m[0]) / (2 * hk);
    const double j11 = (rk_p[1] - rk_m[1]) / (2 * hk);
    const double det = j00 * j11 - j01 * j10;
    if (!(std::abs(det) > 0.0)) {
      throw Error(ErrorCode::calibration_failed, "singular Jacobian while calibrating crosstalk");
    }
    double dt = (j11 * r[0] - j01 * r[1]) / det;
    double dk = (-j10 * r[0] + j00 * r[1]) / det;
    // damp steps that would leave the admissible region
    double lambda = 1.0;
    while (lambda > 1e-6 && !(theta - lambda * dt > 0.0 && k - lambda * dk > 0.0)) {
      lambda *= 0.5;
    }
    theta -= lambda * dt;
    k -= lambda * dk;
  }
  const auto r = residual(theta, k);
  if (!(std::abs(r[0]) < 1e-9 && std::abs(r[1]) < 1e-9) || !(theta > 0.0 && theta < s_near) || !(k > 0.0)) {
    throw Error(ErrorCode::calibration_failed, "crosstalk calibration did not converge within bounds");
  }
  MtParams out = mt;
  out.loss_threshold_theta = theta;
  out.loss_steepness = k;
  return out;
}

double survival(double t_s, double tau_s) {
  if (!(t_s >= 0.0) || !(tau_s > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "survival needs t >= 0 and tau > 0");
  }
  if (std::isinf(tau_s)) {
    return 1.0;
  }
  return std::exp(-t_s / tau_s);
}

}  // namespace tweezer
