#include "geodialect/interpolate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace geodialect {

namespace {

struct Neighbor {
  double distance;
  const Site* site;
};

std::vector<Neighbor> distances_to(const std::vector<Site>& train, const GeoPoint& target) {
  std::vector<Neighbor> out;
  out.reserve(train.size());
  for (const Site& s : train) {
    out.push_back({haversine_km(s.point, target), &s});
  }
  return out;
}

}  // namespace

double nn_interpolate(const std::vector<Site>& train, const GeoPoint& target) {
  if (train.empty()) {
    throw std::invalid_argument("nearest-neighbor interpolation needs a non-empty training set");
  }
  const Site* best = &train.front();
  double best_d = haversine_km(best->point, target);
  for (std::size_t i = 1; i < train.size(); ++i) {
    const double d = haversine_km(train[i].point, target);
    if (d < best_d || (d == best_d && train[i].id < best->id)) {
      best_d = d;
      best = &train[i];
    }
  }
  return best->value;
}

double idw_interpolate(const std::vector<Site>& train, const GeoPoint& target,
                       const IdwParams& params) {
  if (train.empty()) {
    throw std::invalid_argument("IDW needs a non-empty training set");
  }
  if (!(params.power > 0.0) || !std::isfinite(params.power)) {
    throw std::invalid_argument("IDW power must be positive");
  }
  if (params.neighbors) {
    if (*params.neighbors == 0) {
      throw std::invalid_argument("IDW neighbor count must be positive");
    }
    if (*params.neighbors > train.size()) {
      throw std::invalid_argument("IDW neighbor count exceeds training set size");
    }
  }

  std::vector<Neighbor> neigh = distances_to(train, target);

  // 1/d^p diverges at zero lag; a coincident site's value is passed through.
  const Site* coincident = nullptr;
  for (const Neighbor& n : neigh) {
    if (n.distance == 0.0 && (coincident == nullptr || n.site->id < coincident->id)) {
      coincident = n.site;
    }
  }
  if (coincident != nullptr) return coincident->value;

  std::sort(neigh.begin(), neigh.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.site->id < b.site->id;
  });
  const std::size_t k = params.neighbors ? *params.neighbors : neigh.size();

  // Weights are scaled by the nearest distance so the largest weight is 1;
  // this keeps large powers (p ~ 60) away from overflow/underflow traps.
  const double d_min = neigh.front().distance;
  double weight_sum = 0.0;
  double value_sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = std::pow(d_min / neigh[i].distance, params.power);
    weight_sum += w;
    value_sum += w * neigh[i].site->value;
  }
  return value_sum / weight_sum;
}

}  // namespace geodialect
