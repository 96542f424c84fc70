#include "geodialect/variogram.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "geodialect/csv.hpp"

namespace geodialect {

const char* to_string(VariogramFamily family) {
  switch (family) {
    case VariogramFamily::kSpherical: return "spherical";
    case VariogramFamily::kExponential: return "exponential";
    case VariogramFamily::kGaussian: return "gaussian";
  }
  return "unknown";
}

std::optional<VariogramFamily> variogram_family_from_string(const std::string& name) {
  if (name == "spherical") return VariogramFamily::kSpherical;
  if (name == "exponential") return VariogramFamily::kExponential;
  if (name == "gaussian") return VariogramFamily::kGaussian;
  return std::nullopt;
}

void validate_model(const VariogramModel& model) {
  if (!(model.nugget >= 0.0) || !std::isfinite(model.nugget)) {
    throw std::invalid_argument("variogram nugget must be >= 0");
  }
  if (!(model.partial_sill >= 0.0) || !std::isfinite(model.partial_sill)) {
    throw std::invalid_argument("variogram partial sill must be >= 0");
  }
  if (!(model.range_km > 0.0) || !std::isfinite(model.range_km)) {
    throw std::invalid_argument("variogram range must be > 0");
  }
}

EmpiricalVariogram empirical_variogram(const std::vector<Site>& sites, std::size_t n_bins,
                                       std::optional<double> max_lag_km) {
  if (sites.size() < 2) {
    throw std::invalid_argument("empirical variogram needs at least 2 sites");
  }
  if (n_bins < 1) {
    throw std::invalid_argument("empirical variogram needs at least 1 bin");
  }

  const std::size_t n = sites.size();
  std::vector<double> dist;
  dist.reserve(n * (n - 1) / 2);
  double max_pair = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = haversine_km(sites[i].point, sites[j].point);
      dist.push_back(d);
      max_pair = std::max(max_pair, d);
    }
  }

  double max_lag = max_lag_km.value_or(0.5 * max_pair);
  if (!(max_lag > 0.0) || !std::isfinite(max_lag)) {
    throw std::invalid_argument("variogram max lag must be positive");
  }
  const double width = max_lag / static_cast<double>(n_bins);

  std::vector<double> sq_sum(n_bins, 0.0);
  std::vector<std::size_t> count(n_bins, 0);
  std::size_t pair_idx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j, ++pair_idx) {
      const double d = dist[pair_idx];
      if (d <= 0.0 || d > max_lag) continue;
      // bins are (k*width, (k+1)*width]
      std::size_t bin = static_cast<std::size_t>(std::ceil(d / width)) - 1;
      bin = std::min(bin, n_bins - 1);
      const double diff = sites[i].value - sites[j].value;
      sq_sum[bin] += diff * diff;
      count[bin] += 1;
    }
  }

  EmpiricalVariogram emp;
  emp.max_lag_km = max_lag;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (count[b] == 0) continue;
    VariogramBin bin;
    bin.lag_km = (static_cast<double>(b) + 0.5) * width;
    bin.gamma = 0.5 * sq_sum[b] / static_cast<double>(count[b]);
    bin.pairs = count[b];
    emp.bins.push_back(bin);
  }
  return emp;
}

namespace {

// Unit shape g(h) with nugget 0 and partial sill 1.
double unit_shape(VariogramFamily family, double h, double range) {
  switch (family) {
    case VariogramFamily::kSpherical: {
      if (h >= range) return 1.0;
      const double r = h / range;
      return 1.5 * r - 0.5 * r * r * r;
    }
    case VariogramFamily::kExponential:
      return 1.0 - std::exp(-3.0 * h / range);
    case VariogramFamily::kGaussian: {
      const double r = h / range;
      return 1.0 - std::exp(-3.0 * r * r);
    }
  }
  return 0.0;
}

}  // namespace

double model_gamma(const VariogramModel& model, double h_km) {
  validate_model(model);
  if (h_km < 0.0 || !std::isfinite(h_km)) {
    throw std::invalid_argument("variogram lag must be >= 0");
  }
  if (h_km == 0.0) return 0.0;
  return model.nugget + model.partial_sill * unit_shape(model.family, h_km, model.range_km);
}

double fit_objective(const EmpiricalVariogram& emp, const VariogramModel& model) {
  double obj = 0.0;
  for (const VariogramBin& bin : emp.bins) {
    const double diff = bin.gamma - model_gamma(model, bin.lag_km);
    obj += static_cast<double>(bin.pairs) * diff * diff;
  }
  return obj;
}

namespace {

struct ProfilePoint {
  double nugget = 0.0;
  double partial_sill = 0.0;
  double objective = std::numeric_limits<double>::infinity();
};

// Exact weighted least squares of gamma on (1, g(h; range)) with both
// coefficients clamped to be nonnegative: the best of the interior solution
// and each boundary face of the constraint set.
ProfilePoint profile_nugget_sill(const EmpiricalVariogram& emp, VariogramFamily family,
                                 double range) {
  double w_sum = 0.0, g_sum = 0.0, gg_sum = 0.0, y_sum = 0.0, gy_sum = 0.0;
  for (const VariogramBin& bin : emp.bins) {
    const double w = static_cast<double>(bin.pairs);
    const double g = unit_shape(family, bin.lag_km, range);
    w_sum += w;
    g_sum += w * g;
    gg_sum += w * g * g;
    y_sum += w * bin.gamma;
    gy_sum += w * g * bin.gamma;
  }

  auto objective_at = [&](double nugget, double ps) {
    double obj = 0.0;
    for (const VariogramBin& bin : emp.bins) {
      const double diff =
          bin.gamma - (nugget + ps * unit_shape(family, bin.lag_km, range));
      obj += static_cast<double>(bin.pairs) * diff * diff;
    }
    return obj;
  };

  ProfilePoint best;
  auto consider = [&](double nugget, double ps) {
    if (!(nugget >= 0.0) || !(ps >= 0.0) || !std::isfinite(nugget) || !std::isfinite(ps)) {
      return;
    }
    const double obj = objective_at(nugget, ps);
    if (obj < best.objective) {
      best = ProfilePoint{nugget, ps, obj};
    }
  };

  const double det = w_sum * gg_sum - g_sum * g_sum;
  if (std::fabs(det) > 1e-12 * std::max(1.0, w_sum * gg_sum)) {
    consider((gg_sum * y_sum - g_sum * gy_sum) / det,
             (w_sum * gy_sum - g_sum * y_sum) / det);
  }
  if (gg_sum > 0.0) consider(0.0, std::max(0.0, gy_sum / gg_sum));
  if (w_sum > 0.0) consider(std::max(0.0, y_sum / w_sum), 0.0);
  consider(0.0, 0.0);
  return best;
}

}  // namespace

VariogramFit fit_variogram_model(const EmpiricalVariogram& emp, VariogramFamily family) {
  const std::size_t nonempty =
      static_cast<std::size_t>(std::count_if(emp.bins.begin(), emp.bins.end(),
                                             [](const VariogramBin& b) { return b.pairs > 0; }));
  if (nonempty < 3) {
    throw std::invalid_argument("variogram fit needs at least 3 nonempty bins");
  }
  if (!(emp.max_lag_km > 0.0) || !std::isfinite(emp.max_lag_km)) {
    throw std::invalid_argument("variogram fit needs a positive max lag");
  }
  const double max_lag = emp.max_lag_km;

  auto objective_of_range = [&](double range) {
    return profile_nugget_sill(emp, family, range).objective;
  };

  // Coarse scan over candidate ranges; includes the documented multi-start
  // points 1/4, 1/2 and 1 times the max lag. Strict comparison keeps the
  // lowest range among equal-objective candidates.
  std::vector<double> candidates;
  const int kScan = 64;
  for (int i = 0; i <= kScan; ++i) {
    const double t = static_cast<double>(i) / kScan;
    candidates.push_back(max_lag * (0.01 + (2.0 - 0.01) * t));
  }
  candidates.push_back(0.25 * max_lag);
  candidates.push_back(0.5 * max_lag);
  candidates.push_back(max_lag);
  std::sort(candidates.begin(), candidates.end());

  double best_range = candidates.front();
  double best_obj = objective_of_range(best_range);
  std::size_t best_idx = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double obj = objective_of_range(candidates[i]);
    if (obj < best_obj) {
      best_obj = obj;
      best_range = candidates[i];
      best_idx = i;
    }
  }

  // Golden-section refinement between the scan neighbors of the best point.
  double lo = (best_idx == 0) ? candidates.front() : candidates[best_idx - 1];
  double hi = (best_idx + 1 == candidates.size()) ? candidates.back()
                                                  : candidates[best_idx + 1];
  if (hi > lo) {
    const double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = objective_of_range(x1);
    double f2 = objective_of_range(x2);
    const double tol = 1e-7 * max_lag;
    while (b - a > tol) {
      if (f1 <= f2) {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - inv_phi * (b - a);
        f1 = objective_of_range(x1);
      } else {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + inv_phi * (b - a);
        f2 = objective_of_range(x2);
      }
    }
    const double mid = 0.5 * (a + b);
    const double fmid = objective_of_range(mid);
    if (fmid < best_obj) {
      best_obj = fmid;
      best_range = mid;
    }
  }

  ProfilePoint prof = profile_nugget_sill(emp, family, best_range);
  VariogramFit fit;
  fit.model.family = family;
  fit.model.nugget = prof.nugget;
  fit.model.partial_sill = prof.partial_sill;
  // With no structured component the range carries no information.
  fit.model.range_km = (prof.partial_sill == 0.0) ? max_lag : best_range;
  fit.objective = prof.objective;
  return fit;
}

VariogramFit fit_variogram_model(const EmpiricalVariogram& emp) {
  const VariogramFamily families[] = {VariogramFamily::kSpherical,
                                      VariogramFamily::kExponential,
                                      VariogramFamily::kGaussian};
  std::optional<VariogramFit> best;
  for (VariogramFamily family : families) {
    VariogramFit fit = fit_variogram_model(emp, family);
    if (!best || fit.objective < best->objective) {
      best = fit;
    }
  }
  return *best;
}

std::string empirical_variogram_to_csv(const EmpiricalVariogram& emp) {
  std::string out = "lag_km,gamma,pairs\n";
  for (const VariogramBin& bin : emp.bins) {
    out += format_double(bin.lag_km);
    out += ',';
    out += format_double(bin.gamma);
    out += ',';
    out += std::to_string(bin.pairs);
    out += '\n';
  }
  return out;
}

}  // namespace geodialect
