#include "geodialect/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "geodialect/linalg.hpp"
#include "geodialect/rng.hpp"

namespace geodialect {

const char* to_string(Method method) {
  switch (method) {
    case Method::kNearestNeighbor: return "nn";
    case Method::kIdw: return "idw";
    case Method::kOrdinaryKriging: return "ok";
    case Method::kRegressionKriging: return "rk";
  }
  return "unknown";
}

std::optional<Method> method_from_string(const std::string& name) {
  if (name == "nn") return Method::kNearestNeighbor;
  if (name == "idw") return Method::kIdw;
  if (name == "ok") return Method::kOrdinaryKriging;
  if (name == "rk") return Method::kRegressionKriging;
  return std::nullopt;
}

std::vector<std::string> valid_method_names() { return {"nn", "idw", "ok", "rk"}; }

std::size_t min_train_size(Method method) {
  switch (method) {
    case Method::kNearestNeighbor:
    case Method::kIdw:
      return 1;
    case Method::kOrdinaryKriging:
      return 2;
    case Method::kRegressionKriging:
      return 3;
  }
  return 1;
}

std::size_t min_train_size(Method method, const MethodParams& params) {
  std::size_t minimum = min_train_size(method);
  if (method == Method::kIdw && params.idw.neighbors) {
    minimum = std::max(minimum, *params.idw.neighbors);
  }
  return minimum;
}

SplitResult split_sites(const std::vector<Site>& sites, const SplitSpec& spec) {
  const double sum = spec.train_ratio + spec.val_ratio + spec.test_ratio;
  if (!(spec.train_ratio > 0.0) || !(spec.val_ratio > 0.0) || !(spec.test_ratio > 0.0) ||
      std::fabs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be positive and sum to 1");
  }
  const std::size_t n = sites.size();
  if (n < 10) {
    throw std::invalid_argument("splitting needs at least 10 sites, got " +
                                std::to_string(n));
  }

  const auto n_val = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * spec.val_ratio));
  const auto n_test = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * spec.test_ratio));
  if (n_val + n_test >= n) {
    throw std::invalid_argument("split leaves no training sites");
  }
  const std::size_t n_train = n - n_val - n_test;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 gen(derive_stream(spec.seed, kSplitStream));
  fisher_yates_shuffle(order, gen);

  SplitResult out;
  out.train.reserve(n_train);
  out.val.reserve(n_val);
  out.test.reserve(n_test);
  for (std::size_t i = 0; i < n; ++i) {
    const Site& s = sites[order[i]];
    if (i < n_train) out.train.push_back(s);
    else if (i < n_train + n_val) out.val.push_back(s);
    else out.test.push_back(s);
  }
  return out;
}

std::string describe_params(Method method, const MethodParams& params) {
  switch (method) {
    case Method::kNearestNeighbor:
      return "-";
    case Method::kIdw: {
      char power[32];
      std::snprintf(power, sizeof power, "%g", params.idw.power);
      std::string out = std::string("power=") + power + " neighbors=";
      out += params.idw.neighbors ? std::to_string(*params.idw.neighbors) : "all";
      return out;
    }
    case Method::kOrdinaryKriging:
    case Method::kRegressionKriging:
      return std::string("family=") +
             (params.family ? to_string(*params.family) : "auto");
  }
  return "-";
}

std::vector<MethodParams> enumerate_grid(Method method, const ParameterGrid& grid) {
  std::vector<MethodParams> out;
  switch (method) {
    case Method::kNearestNeighbor:
      out.emplace_back();
      break;
    case Method::kIdw:
      for (double power : grid.idw_powers) {
        for (const auto& neighbors : grid.idw_neighbors) {
          MethodParams p;
          p.idw.power = power;
          p.idw.neighbors = neighbors;
          out.push_back(p);
        }
      }
      break;
    case Method::kOrdinaryKriging:
    case Method::kRegressionKriging:
      for (const auto& family : grid.families) {
        MethodParams p;
        p.family = family;
        out.push_back(p);
      }
      break;
  }
  if (out.empty()) {
    throw std::invalid_argument("empty parameter grid");
  }
  return out;
}

Predictor Predictor::fit(Method method, const MethodParams& params,
                         std::vector<Site> train) {
  if (train.size() < min_train_size(method)) {
    throw std::invalid_argument(std::string("method '") + to_string(method) +
                                "' needs at least " +
                                std::to_string(min_train_size(method)) +
                                " training sites, got " + std::to_string(train.size()));
  }
  std::sort(train.begin(), train.end(),
            [](const Site& a, const Site& b) { return a.id < b.id; });

  Predictor p;
  p.method_ = method;
  p.params_ = params;
  switch (method) {
    case Method::kNearestNeighbor:
    case Method::kIdw:
      p.train_ = std::move(train);
      break;
    case Method::kOrdinaryKriging: {
      const EmpiricalVariogram emp = empirical_variogram(train);
      const VariogramFit fit = params.family
                                   ? fit_variogram_model(emp, *params.family)
                                   : fit_variogram_model(emp);
      p.ok_.emplace(std::move(train), fit.model);
      break;
    }
    case Method::kRegressionKriging:
      p.rk_.emplace(std::move(train), params.family);
      break;
  }
  return p;
}

double Predictor::predict(const Site& target) const {
  switch (method_) {
    case Method::kNearestNeighbor:
      return nn_interpolate(train_, target.point);
    case Method::kIdw:
      return idw_interpolate(train_, target.point, params_.idw);
    case Method::kOrdinaryKriging:
      return ok_->predict_value(target.point);
    case Method::kRegressionKriging:
      if (!target.covariate) {
        throw std::runtime_error("target '" + target.id +
                                 "' lacks the covariate required by regression kriging");
      }
      return rk_->predict_value(target.point, *target.covariate);
  }
  throw std::logic_error("unreachable");
}

double rmse(const std::vector<double>& predictions, const std::vector<double>& gold) {
  if (predictions.size() != gold.size()) {
    throw std::invalid_argument("RMSE length mismatch: " +
                                std::to_string(predictions.size()) + " vs " +
                                std::to_string(gold.size()));
  }
  if (predictions.empty()) {
    throw std::invalid_argument("RMSE needs at least one value");
  }
  CompensatedSum acc;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - gold[i];
    acc.add(d * d);
  }
  return std::sqrt(acc.value() / static_cast<double>(predictions.size()));
}

double evaluate_rmse(Method method, const MethodParams& params,
                     const std::vector<Site>& train, const std::vector<Site>& test) {
  if (test.empty()) {
    throw std::invalid_argument("evaluation needs a non-empty test set");
  }
  const Predictor predictor = Predictor::fit(method, params, train);
  std::vector<double> predictions;
  std::vector<double> gold;
  predictions.reserve(test.size());
  gold.reserve(test.size());
  for (const Site& s : test) {
    predictions.push_back(predictor.predict(s));
    gold.push_back(s.value);
  }
  return rmse(predictions, gold);
}

GridSearchResult grid_search(Method method, const ParameterGrid& grid,
                             const std::vector<Site>& train,
                             const std::vector<Site>& val) {
  if (train.empty() || val.empty()) {
    throw std::invalid_argument("grid search needs non-empty train and validation sets");
  }
  const std::vector<MethodParams> combos = enumerate_grid(method, grid);

  GridSearchResult out;
  out.best_rmse = std::numeric_limits<double>::infinity();
  bool have_best = false;
  for (const MethodParams& params : combos) {
    double score = std::numeric_limits<double>::infinity();
    try {
      score = evaluate_rmse(method, params, train, val);
    } catch (const std::exception& e) {
      out.failures.emplace_back(params, e.what());
    }
    out.scored.emplace_back(params, score);
    if (score < out.best_rmse) {
      out.best_rmse = score;
      out.best = params;
      have_best = true;
    }
  }
  if (!have_best) {
    throw std::runtime_error(std::string("grid search: every combination failed for '") +
                             to_string(method) + "' (first failure: " +
                             out.failures.front().second + ")");
  }
  return out;
}

LearningCurve learning_curve(const std::vector<Site>& train_pool,
                             const std::vector<Site>& test, Method method,
                             const MethodParams& params,
                             const std::vector<double>& fractions, std::size_t reps,
                             std::uint64_t seed) {
  if (train_pool.empty() || test.empty()) {
    throw std::invalid_argument("learning curve needs non-empty train pool and test set");
  }
  if (reps < 1) {
    throw std::invalid_argument("learning curve needs reps >= 1");
  }
  if (fractions.empty()) {
    throw std::invalid_argument("learning curve needs at least one fraction");
  }
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] > 0.0) || fractions[i] > 1.0) {
      throw std::invalid_argument("learning-curve fractions must lie in (0, 1]");
    }
    if (i > 0 && fractions[i] <= fractions[i - 1]) {
      throw std::invalid_argument("learning-curve fractions must be strictly increasing");
    }
  }

  const std::size_t pool = train_pool.size();
  LearningCurve curve;
  curve.points.reserve(fractions.size());

  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    const double fraction = fractions[fi];
    const auto m = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pool))));

    LearningCurvePoint point;
    point.fraction = fraction;
    if (m < min_train_size(method, params)) {
      point.available = false;
      point.mean_rmse = std::numeric_limits<double>::quiet_NaN();
      point.std_rmse = std::numeric_limits<double>::quiet_NaN();
      point.reps = 0;
      curve.points.push_back(point);
      continue;
    }

    std::vector<double> scores;
    scores.reserve(reps);
    bool fit_failed = false;
    for (std::size_t rep = 0; rep < reps && !fit_failed; ++rep) {
      SplitMix64 gen(derive_stream(seed, kCurveStream, fi, rep));
      const std::vector<std::size_t> pick = sample_without_replacement(pool, m, gen);
      std::vector<Site> subsample;
      subsample.reserve(m);
      for (std::size_t idx : pick) subsample.push_back(train_pool[idx]);
      try {
        scores.push_back(evaluate_rmse(method, params, subsample, test));
      } catch (const std::exception&) {
        // e.g. a residual variogram with too few nonempty bins at this
        // subsample size; the whole fraction is reported unavailable
        fit_failed = true;
      }
    }
    if (fit_failed) {
      point.available = false;
      point.mean_rmse = std::numeric_limits<double>::quiet_NaN();
      point.std_rmse = std::numeric_limits<double>::quiet_NaN();
      point.reps = 0;
      curve.points.push_back(point);
      continue;
    }

    const bool degenerate =
        std::all_of(scores.begin(), scores.end(),
                    [&](double s) { return s == scores.front(); });
    if (degenerate) {
      // all reps identical (e.g. fraction 1.0); the mean is the value itself
      point.mean_rmse = scores.front();
      point.std_rmse = 0.0;
    } else {
      CompensatedSum mean_acc;
      for (double s : scores) mean_acc.add(s);
      const double mean = mean_acc.value() / static_cast<double>(scores.size());
      CompensatedSum var_acc;
      for (double s : scores) var_acc.add((s - mean) * (s - mean));
      point.mean_rmse = mean;
      point.std_rmse =
          std::sqrt(var_acc.value() / static_cast<double>(scores.size() - 1));
    }
    point.reps = reps;
    curve.points.push_back(point);
  }
  return curve;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("correlation length mismatch");
  }
  if (x.size() < 3) {
    throw std::invalid_argument("correlation needs at least 3 observations");
  }
  const auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  if (constant(x) || constant(y)) {
    throw std::invalid_argument("correlation is undefined for a constant input");
  }

  const double n = static_cast<double>(x.size());
  CompensatedSum sx, sy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx.add(x[i]);
    sy.add(y[i]);
  }
  const double mx = sx.value() / n;
  const double my = sy.value() / n;
  CompensatedSum sxy, sxx, syy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy.add(dx * dy);
    sxx.add(dx * dx);
    syy.add(dy * dy);
  }
  const double r = sxy.value() / std::sqrt(sxx.value() * syy.value());
  return std::clamp(r, -1.0, 1.0);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based average
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("correlation length mismatch");
  }
  return pearson(average_ranks(x), average_ranks(y));
}

std::vector<double> similarity_covariate(const DistanceMatrix& distances,
                                         const std::vector<std::string>& matrix_ids,
                                         const std::map<std::string, double>& score_by_id) {
  if (matrix_ids.size() != distances.size()) {
    throw std::invalid_argument("matrix id list does not match matrix size");
  }
  std::string missing;
  for (const std::string& id : matrix_ids) {
    if (score_by_id.find(id) == score_by_id.end()) {
      if (!missing.empty()) missing += ", ";
      missing += "'" + id + "'";
    }
  }
  if (!missing.empty()) {
    throw std::runtime_error("sites missing a score: " + missing);
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < matrix_ids.size(); ++i) {
    const double si = score_by_id.at(matrix_ids[i]);
    const double sb = score_by_id.at(matrix_ids[best]);
    if (si > sb || (si == sb && matrix_ids[i] < matrix_ids[best])) {
      best = i;
    }
  }

  std::vector<double> covariate(matrix_ids.size());
  for (std::size_t i = 0; i < matrix_ids.size(); ++i) {
    covariate[i] = distances.at(i, best);
  }
  return covariate;
}

}  // namespace geodialect
