#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "geodialect/geo.hpp"

namespace geodialect {

enum class VariogramFamily { kSpherical, kExponential, kGaussian };

const char* to_string(VariogramFamily family);
std::optional<VariogramFamily> variogram_family_from_string(const std::string& name);

/// Binned empirical semivariogram. Only nonempty bins are kept; lag centers
/// are strictly increasing.
struct VariogramBin {
  double lag_km = 0.0;
  double gamma = 0.0;
  std::size_t pairs = 0;
};

struct EmpiricalVariogram {
  std::vector<VariogramBin> bins;
  double max_lag_km = 0.0;
};

/// Theoretical model gamma(h) = nugget + partial_sill * shape(h / range).
/// The range is the effective range: gamma reaches ~95% of the sill there
/// for the exponential and gaussian families, and exactly the sill for the
/// spherical family.
struct VariogramModel {
  VariogramFamily family = VariogramFamily::kSpherical;
  double nugget = 0.0;
  double partial_sill = 0.0;
  double range_km = 1.0;

  double sill() const { return nugget + partial_sill; }
};

void validate_model(const VariogramModel& model);

inline constexpr std::size_t kDefaultVariogramBins = 15;

/// Pairs are assigned to equal-width bins on (0, max_lag]; the default max
/// lag is half the maximum pairwise distance. Bin gamma is half the mean
/// squared value difference of its pairs; coincident pairs (zero lag) and
/// pairs beyond max_lag are excluded.
EmpiricalVariogram empirical_variogram(const std::vector<Site>& sites,
                                       std::size_t n_bins = kDefaultVariogramBins,
                                       std::optional<double> max_lag_km = std::nullopt);

/// gamma(0) = 0 by convention; the nugget is the limit from the right.
double model_gamma(const VariogramModel& model, double h_km);

struct VariogramFit {
  VariogramModel model;
  double objective = 0.0;
};

/// Weighted least squares objective sum_bins N(h) * (gamma_emp - gamma_model)^2.
double fit_objective(const EmpiricalVariogram& emp, const VariogramModel& model);

/// Best least-squares fit for one family, subject to nugget >= 0,
/// partial_sill >= 0, range > 0. The nugget/partial-sill pair is profiled
/// out exactly for each candidate range; the range is found by a coarse
/// scan (seeded with starts at {1/4, 1/2, 1} of the max lag) refined by
/// golden-section search. A fit with zero partial sill reports the max lag
/// as its range.
VariogramFit fit_variogram_model(const EmpiricalVariogram& emp, VariogramFamily family);

/// Fits all three families and keeps the lowest objective; ties break in
/// the order spherical < exponential < gaussian.
VariogramFit fit_variogram_model(const EmpiricalVariogram& emp);

std::string empirical_variogram_to_csv(const EmpiricalVariogram& emp);

}  // namespace geodialect
