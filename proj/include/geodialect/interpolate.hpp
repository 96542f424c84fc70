#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "geodialect/geo.hpp"

namespace geodialect {

/// Inverse-distance-weighting parameters: weight = 1/d^power over the
/// `neighbors` nearest sites (all sites when absent).
struct IdwParams {
  double power = 2.0;
  std::optional<std::size_t> neighbors;
};

/// Value of the geodesically nearest training site; exact-distance ties go
/// to the lexicographically smallest site id.
double nn_interpolate(const std::vector<Site>& train, const GeoPoint& target);

/// Inverse distance weighting. A target coincident with a training site
/// returns that site's value exactly (smallest id among coincident sites).
double idw_interpolate(const std::vector<Site>& train, const GeoPoint& target,
                       const IdwParams& params);

}  // namespace geodialect
