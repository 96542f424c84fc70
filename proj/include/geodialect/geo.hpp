#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace geodialect {

inline constexpr double kEarthRadiusKm = 6371.0;

/// Geographic coordinate in degrees; bounds are checked on construction.
struct GeoPoint {
  GeoPoint() = default;
  GeoPoint(double lat_deg, double lon_deg);

  double lat = 0.0;
  double lon = 0.0;
};

/// A geotagged observation: a scalar score plus an optional covariate
/// (used as the drift variable by regression kriging).
struct Site {
  std::string id;
  GeoPoint point;
  double value = 0.0;
  std::optional<double> covariate;
};

/// Symmetric nonnegative matrix with a zero diagonal.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(std::size_t n);

  std::size_t size() const { return n_; }
  double at(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

  /// Sets both (i, j) and (j, i); rejects negative, non-finite, and
  /// nonzero diagonal entries.
  void set(std::size_t i, std::size_t j, double distance);

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Great-circle distance in km on a sphere of radius 6371 km.
double haversine_km(const GeoPoint& a, const GeoPoint& b);

/// Throws when two sites share an id.
void require_unique_ids(const std::vector<Site>& sites);

DistanceMatrix pairwise_distances(const std::vector<Site>& sites);

/// Regular lattice covering [min_corner, max_corner] with the given cell
/// size in degrees, row-major with latitude descending and longitude
/// ascending. Both corners are always part of the lattice.
std::vector<GeoPoint> build_grid(const GeoPoint& min_corner,
                                 const GeoPoint& max_corner, double cell_deg);

/// Merges sites that share exact coordinates into one site carrying the
/// mean value (and mean of the covariates that are present), keeping the
/// lexicographically smallest id. Order follows first occurrence.
std::vector<Site> merge_coincident_sites(const std::vector<Site>& sites);

}  // namespace geodialect
