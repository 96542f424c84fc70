#include "geodialect/geo.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace geodialect {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be finite");
  }
}

}  // namespace

GeoPoint::GeoPoint(double lat_deg, double lon_deg) : lat(lat_deg), lon(lon_deg) {
  check_finite(lat, "latitude");
  check_finite(lon, "longitude");
  if (lat < -90.0 || lat > 90.0) {
    throw std::invalid_argument("latitude " + std::to_string(lat) +
                                " out of range [-90, 90]");
  }
  if (lon < -180.0 || lon > 180.0) {
    throw std::invalid_argument("longitude " + std::to_string(lon) +
                                " out of range [-180, 180]");
  }
}

DistanceMatrix::DistanceMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

void DistanceMatrix::set(std::size_t i, std::size_t j, double distance) {
  if (i >= n_ || j >= n_) {
    throw std::out_of_range("distance matrix index out of range");
  }
  check_finite(distance, "distance");
  if (distance < 0.0) {
    throw std::invalid_argument("distance must be nonnegative");
  }
  if (i == j && distance != 0.0) {
    throw std::invalid_argument("distance matrix diagonal must be zero");
  }
  data_[i * n_ + j] = distance;
  data_[j * n_ + i] = distance;
}

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  // Absolute differences keep the formula bitwise symmetric in (a, b).
  const double phi_a = a.lat * kDegToRad;
  const double phi_b = b.lat * kDegToRad;
  const double d_phi = std::fabs(b.lat - a.lat) * kDegToRad;
  const double d_lam = std::fabs(b.lon - a.lon) * kDegToRad;
  const double s_phi = std::sin(0.5 * d_phi);
  const double s_lam = std::sin(0.5 * d_lam);
  const double h = s_phi * s_phi + std::cos(phi_a) * std::cos(phi_b) * s_lam * s_lam;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

void require_unique_ids(const std::vector<Site>& sites) {
  std::unordered_set<std::string> seen;
  seen.reserve(sites.size());
  for (const Site& s : sites) {
    if (!seen.insert(s.id).second) {
      throw std::invalid_argument("duplicate site id '" + s.id + "'");
    }
  }
}

DistanceMatrix pairwise_distances(const std::vector<Site>& sites) {
  if (sites.empty()) {
    throw std::invalid_argument("pairwise_distances needs at least one site");
  }
  require_unique_ids(sites);
  DistanceMatrix m(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    for (std::size_t j = i + 1; j < sites.size(); ++j) {
      m.set(i, j, haversine_km(sites[i].point, sites[j].point));
    }
  }
  return m;
}

namespace {

std::vector<double> axis_points(double lo, double hi, double cell) {
  const auto steps = static_cast<long long>(std::floor((hi - lo) / cell + 1e-9));
  std::vector<double> pts;
  pts.reserve(static_cast<std::size_t>(steps) + 2);
  for (long long i = 0; i <= steps; ++i) {
    pts.push_back(lo + static_cast<double>(i) * cell);
  }
  const double tol = 1e-9 * std::max({1.0, std::fabs(hi), cell});
  if (std::fabs(pts.back() - hi) <= tol) {
    pts.back() = hi;
  } else {
    pts.push_back(hi);
  }
  return pts;
}

}  // namespace

std::vector<GeoPoint> build_grid(const GeoPoint& min_corner,
                                 const GeoPoint& max_corner, double cell_deg) {
  if (!(cell_deg > 0.0) || !std::isfinite(cell_deg)) {
    throw std::invalid_argument("grid cell size must be positive");
  }
  if (!(min_corner.lat < max_corner.lat) || !(min_corner.lon < max_corner.lon)) {
    throw std::invalid_argument("grid bbox min must be strictly below max in both axes");
  }
  const std::vector<double> lats = axis_points(min_corner.lat, max_corner.lat, cell_deg);
  const std::vector<double> lons = axis_points(min_corner.lon, max_corner.lon, cell_deg);
  std::vector<GeoPoint> grid;
  grid.reserve(lats.size() * lons.size());
  for (auto it = lats.rbegin(); it != lats.rend(); ++it) {
    for (double lon : lons) {
      grid.emplace_back(*it, lon);
    }
  }
  return grid;
}

std::vector<Site> merge_coincident_sites(const std::vector<Site>& sites) {
  struct Group {
    std::string id;
    double value_sum = 0.0;
    std::size_t count = 0;
    double cov_sum = 0.0;
    std::size_t cov_count = 0;
    GeoPoint point;
  };
  std::map<std::pair<double, double>, std::size_t> index;
  std::vector<Group> groups;
  for (const Site& s : sites) {
    const std::pair<double, double> key{s.point.lat, s.point.lon};
    auto [it, inserted] = index.emplace(key, groups.size());
    if (inserted) {
      groups.push_back(Group{s.id, 0.0, 0, 0.0, 0, s.point});
    }
    Group& g = groups[it->second];
    g.id = std::min(g.id, s.id);
    g.value_sum += s.value;
    g.count += 1;
    if (s.covariate) {
      g.cov_sum += *s.covariate;
      g.cov_count += 1;
    }
  }
  std::vector<Site> merged;
  merged.reserve(groups.size());
  for (const Group& g : groups) {
    Site s;
    s.id = g.id;
    s.point = g.point;
    s.value = g.value_sum / static_cast<double>(g.count);
    if (g.cov_count > 0) {
      s.covariate = g.cov_sum / static_cast<double>(g.cov_count);
    }
    merged.push_back(std::move(s));
  }
  return merged;
}

}  // namespace geodialect
