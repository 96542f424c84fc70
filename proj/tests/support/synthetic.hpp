#pragma once

// Seeded synthetic performance field shared by unit and acceptance tests:
// 200 sites uniform in a 10x10 degree box, value = 20 + 3*covariate +
// spatially correlated noise (exponential covariance C(h) = 25*exp(-h/150km))
// + white noise of variance 1, where covariate = -(distance to a designated
// best site)/100 km.

#include <cstdint>
#include <string>
#include <vector>

#include "geodialect/geo.hpp"
#include "geodialect/linalg.hpp"
#include "geodialect/rng.hpp"

namespace synthetic {

struct Field {
  std::vector<geodialect::Site> sites;
  std::size_t designated_best = 0;
};

inline Field make_field(std::uint64_t seed, std::size_t n = 200) {
  using geodialect::Matrix;
  using geodialect::Site;

  geodialect::SplitMix64 gen(geodialect::derive_stream(seed, 0x53594e46ULL));
  Field field;
  field.sites.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Site s;
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%03zu", i);
    s.id = buf;
    s.point = geodialect::GeoPoint(36.0 + 10.0 * gen.uniform(), 6.0 + 10.0 * gen.uniform());
    field.sites.push_back(std::move(s));
  }
  field.designated_best = static_cast<std::size_t>(gen.below(n));

  const geodialect::DistanceMatrix dist = geodialect::pairwise_distances(field.sites);
  for (std::size_t i = 0; i < n; ++i) {
    field.sites[i].covariate = -dist.at(i, field.designated_best) / 100.0;
  }

  Matrix cov(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      cov(i, j) = 25.0 * std::exp(-dist.at(i, j) / 150.0);
    }
  }
  const Matrix chol = geodialect::cholesky_lower(cov, 1e-8);

  std::vector<double> white(n);
  for (std::size_t i = 0; i < n; ++i) white[i] = gen.normal();
  std::vector<double> correlated(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j <= i; ++j) s += chol(i, j) * white[j];
    correlated[i] = s;
  }

  for (std::size_t i = 0; i < n; ++i) {
    field.sites[i].value =
        20.0 + 3.0 * *field.sites[i].covariate + correlated[i] + gen.normal();
  }
  return field;
}

}  // namespace synthetic
