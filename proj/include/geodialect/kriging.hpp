#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geodialect/geo.hpp"
#include "geodialect/linalg.hpp"
#include "geodialect/variogram.hpp"

namespace geodialect {

struct KrigingWeight {
  std::string site_id;
  double lambda = 0.0;
};

struct KrigingPrediction {
  double value = 0.0;
  double variance = 0.0;  // clamped at zero; see negative_variance_clamp_count()
  std::vector<KrigingWeight> weights;
};

/// Process-wide count of kriging variances that came out negative from
/// round-off and were clamped to zero.
std::uint64_t negative_variance_clamp_count();
void reset_negative_variance_clamp_count();

/// Ordinary kriging: factors the (n+1) x (n+1) semivariance system once and
/// predicts at any number of targets. Weights sum to 1 by construction of
/// the Lagrange constraint row.
///
/// A degenerate all-zero model (nugget = 0, partial sill = 0) makes the
/// system singular; it is treated as an equal-weight average, the limit
/// solution, so that regression kriging of a zero-residual field stays
/// well defined.
class OrdinaryKriger {
 public:
  OrdinaryKriger(std::vector<Site> train, VariogramModel model);

  KrigingPrediction predict(const GeoPoint& target) const;
  double predict_value(const GeoPoint& target) const;

  const std::vector<Site>& train() const { return train_; }
  const VariogramModel& model() const { return model_; }

 private:
  std::vector<double> solve_weights(const GeoPoint& target,
                                    std::vector<double>& rhs) const;

  std::vector<Site> train_;
  VariogramModel model_;
  bool degenerate_flat_ = false;
  Matrix system_;
  std::optional<LuDecomposition> lu_;
};

KrigingPrediction ordinary_krige(const std::vector<Site>& train,
                                 const VariogramModel& model, const GeoPoint& target);

/// Ordinary least squares of value on (1, covariate).
struct DriftModel {
  std::vector<double> coefficients;  // [intercept, slope]
  std::vector<double> residuals;     // per training site, in training order

  double predict(double covariate) const {
    return coefficients[0] + coefficients[1] * covariate;
  }
};

DriftModel fit_drift(const std::vector<Site>& train);

/// Regression kriging: drift regression on the covariate plus ordinary
/// kriging of the drift residuals under a variogram fitted on those
/// residuals (auto family selection unless one is forced).
class RegressionKriger {
 public:
  explicit RegressionKriger(std::vector<Site> train,
                            std::optional<VariogramFamily> family = std::nullopt,
                            std::size_t n_bins = kDefaultVariogramBins);

  KrigingPrediction predict(const GeoPoint& target, double target_covariate) const;
  double predict_value(const GeoPoint& target, double target_covariate) const;

  const DriftModel& drift() const { return drift_; }
  const VariogramFit& residual_fit() const { return residual_fit_; }

 private:
  DriftModel drift_;
  VariogramFit residual_fit_;
  OrdinaryKriger residual_kriger_;
};

KrigingPrediction regression_krige(const std::vector<Site>& train, const GeoPoint& target,
                                   double target_covariate,
                                   std::optional<VariogramFamily> family = std::nullopt);

}  // namespace geodialect
