#include "geodialect/kriging.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace geodialect {

namespace {

std::atomic<std::uint64_t> g_negative_variance_clamps{0};

// Coincident sites make the semivariance system singular; name the pair.
void check_training_sites(const std::vector<Site>& train) {
  require_unique_ids(train);
  for (std::size_t i = 0; i < train.size(); ++i) {
    for (std::size_t j = i + 1; j < train.size(); ++j) {
      if (haversine_km(train[i].point, train[j].point) == 0.0) {
        throw std::runtime_error(
            "coincident training sites: '" + train[i].id + "' and '" + train[j].id +
            "' share coordinates; merge them first (e.g. --dedupe mean)");
      }
    }
  }
}

}  // namespace

std::uint64_t negative_variance_clamp_count() { return g_negative_variance_clamps.load(); }
void reset_negative_variance_clamp_count() { g_negative_variance_clamps.store(0); }

OrdinaryKriger::OrdinaryKriger(std::vector<Site> train, VariogramModel model)
    : train_(std::move(train)), model_(model) {
  if (train_.size() < 2) {
    throw std::invalid_argument("ordinary kriging needs at least 2 training sites");
  }
  validate_model(model_);
  check_training_sites(train_);

  degenerate_flat_ = model_.nugget == 0.0 && model_.partial_sill == 0.0;
  if (degenerate_flat_) return;

  const std::size_t n = train_.size();
  system_ = Matrix(n + 1, n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double g = model_gamma(model_, haversine_km(train_[i].point, train_[j].point));
      system_(i, j) = g;
      system_(j, i) = g;
    }
    system_(i, n) = 1.0;
    system_(n, i) = 1.0;
  }
  try {
    lu_.emplace(system_);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(std::string("singular ordinary-kriging system: ") + e.what());
  }
}

std::vector<double> OrdinaryKriger::solve_weights(const GeoPoint& target,
                                                  std::vector<double>& rhs) const {
  const std::size_t n = train_.size();
  rhs.assign(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    rhs[i] = model_gamma(model_, haversine_km(train_[i].point, target));
  }
  rhs[n] = 1.0;
  return lu_->solve_refined(system_, rhs);
}

KrigingPrediction OrdinaryKriger::predict(const GeoPoint& target) const {
  const std::size_t n = train_.size();
  KrigingPrediction out;
  out.weights.reserve(n);

  if (degenerate_flat_) {
    const double w = 1.0 / static_cast<double>(n);
    CompensatedSum value;
    for (const Site& s : train_) {
      value.add(w * s.value);
      out.weights.push_back({s.id, w});
    }
    out.value = value.value();
    out.variance = 0.0;
    return out;
  }

  std::vector<double> rhs;
  const std::vector<double> solution = solve_weights(target, rhs);

  CompensatedSum value;
  CompensatedSum variance;
  for (std::size_t i = 0; i < n; ++i) {
    value.add(solution[i] * train_[i].value);
    variance.add(solution[i] * rhs[i]);
    out.weights.push_back({train_[i].id, solution[i]});
  }
  variance.add(solution[n]);  // Lagrange multiplier

  out.value = value.value();
  out.variance = variance.value();
  if (out.variance < 0.0) {
    g_negative_variance_clamps.fetch_add(1);
    out.variance = 0.0;
  }
  return out;
}

double OrdinaryKriger::predict_value(const GeoPoint& target) const {
  if (degenerate_flat_) {
    CompensatedSum value;
    const double w = 1.0 / static_cast<double>(train_.size());
    for (const Site& s : train_) value.add(w * s.value);
    return value.value();
  }
  std::vector<double> rhs;
  const std::vector<double> solution = solve_weights(target, rhs);
  CompensatedSum value;
  for (std::size_t i = 0; i < train_.size(); ++i) {
    value.add(solution[i] * train_[i].value);
  }
  return value.value();
}

KrigingPrediction ordinary_krige(const std::vector<Site>& train,
                                 const VariogramModel& model, const GeoPoint& target) {
  return OrdinaryKriger(train, model).predict(target);
}

DriftModel fit_drift(const std::vector<Site>& train) {
  if (train.size() < 3) {
    throw std::invalid_argument("drift regression needs at least 3 training sites");
  }
  std::string missing;
  for (const Site& s : train) {
    if (!s.covariate) {
      if (!missing.empty()) missing += ", ";
      missing += "'" + s.id + "'";
    }
  }
  if (!missing.empty()) {
    throw std::runtime_error("sites missing the covariate required for drift regression: " +
                             missing);
  }

  const std::size_t n = train.size();
  CompensatedSum x_acc, y_acc;
  for (const Site& s : train) {
    x_acc.add(*s.covariate);
    y_acc.add(s.value);
  }
  const double x_mean = x_acc.value() / static_cast<double>(n);
  const double y_mean = y_acc.value() / static_cast<double>(n);

  CompensatedSum sxx, sxy;
  for (const Site& s : train) {
    const double dx = *s.covariate - x_mean;
    sxx.add(dx * dx);
    sxy.add(dx * (s.value - y_mean));
  }
  if (sxx.value() == 0.0) {
    throw std::runtime_error(
        "constant covariate: drift regression is undefined, use ordinary kriging");
  }

  DriftModel model;
  const double slope = sxy.value() / sxx.value();
  model.coefficients = {y_mean - slope * x_mean, slope};
  model.residuals.reserve(n);
  for (const Site& s : train) {
    model.residuals.push_back(s.value - model.predict(*s.covariate));
  }
  return model;
}

namespace {

std::vector<Site> residual_sites(const std::vector<Site>& train, const DriftModel& drift) {
  std::vector<Site> out = train;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].value = drift.residuals[i];
  }
  return out;
}

VariogramFit fit_residual_variogram(const std::vector<Site>& residuals,
                                    std::optional<VariogramFamily> family,
                                    std::size_t n_bins) {
  const EmpiricalVariogram emp = empirical_variogram(residuals, n_bins);
  return family ? fit_variogram_model(emp, *family) : fit_variogram_model(emp);
}

}  // namespace

RegressionKriger::RegressionKriger(std::vector<Site> train,
                                   std::optional<VariogramFamily> family,
                                   std::size_t n_bins)
    : drift_(fit_drift(train)),
      residual_fit_(fit_residual_variogram(residual_sites(train, drift_), family, n_bins)),
      residual_kriger_(residual_sites(train, drift_), residual_fit_.model) {}

KrigingPrediction RegressionKriger::predict(const GeoPoint& target,
                                            double target_covariate) const {
  KrigingPrediction out = residual_kriger_.predict(target);
  out.value += drift_.predict(target_covariate);
  return out;
}

double RegressionKriger::predict_value(const GeoPoint& target,
                                       double target_covariate) const {
  return residual_kriger_.predict_value(target) + drift_.predict(target_covariate);
}

KrigingPrediction regression_krige(const std::vector<Site>& train, const GeoPoint& target,
                                   double target_covariate,
                                   std::optional<VariogramFamily> family) {
  return RegressionKriger(std::vector<Site>(train), family).predict(target, target_covariate);
}

}  // namespace geodialect
