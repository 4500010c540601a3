#pragma once

// Reference computations used by the tests. Each one is written from the
// defining formula, independently of the library code it checks.

#include "tweezer/common.hpp"
#include "tweezer/hologram.hpp"
#include "tweezer/imaging.hpp"

#include <complex>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace oracle {

/// Minimum of sum_r cost[r][perm[r]] over all injective row-to-column maps,
/// found by enumerating every permutation of the columns.
double brute_force_assignment(const std::vector<std::vector<double>>& cost);

/// C(n, k) p^k (1-p)^(n-k), evaluated with long double products.
long double binomial_pmf(int n, int k, long double p);

/// Field at a focal point for a phase function phi(x_um, y_um), evaluated by
/// an explicit double loop over SLM pixels: sum A exp(i(phi + transfer)) / sum A.
std::complex<double> direct_sum_field(const tweezer::SlmConfig& slm,
                                      const std::function<double(double, double)>& phi, tweezer::Vec3 point);

/// Phase mask built by evaluating phi at every pixel centre, with the SLM's
/// row/column to micrometre convention (row 0 at the top, +y upward).
tweezer::PhaseMask mask_from_function(const tweezer::SlmConfig& slm, const std::function<double(double, double)>& phi);

/// 1/e^2 radius of a Gaussian profile I(r) = I0 exp(-2 r^2 / w^2) fitted by
/// linear least squares on ln I against r^2, using samples above floor * max.
double fit_gaussian_waist(const std::vector<double>& r, const std::vector<double>& intensity, double floor = 0.05);

/// Half-width z_R of a Lorentzian I(z) = I0 / (1 + (z - z0)^2 / z_R^2) fitted
/// by least squares on I0/I - 1 = (z - z0)^2 / z_R^2, using samples above floor * max.
double fit_lorentzian_halfwidth(const std::vector<double>& z, const std::vector<double>& intensity,
                                double floor = 0.2);

/// Strict local maxima (8-neighbourhood) above threshold.
std::size_t count_local_maxima(const tweezer::Image2D& image, double threshold);

double median(std::vector<double> values);

double mean(const std::vector<double>& values);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace oracle
