#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geodialect/geo.hpp"
#include "geodialect/interpolate.hpp"
#include "geodialect/kriging.hpp"
#include "geodialect/variogram.hpp"

namespace geodialect {

// Stream tags for derive_stream(); every randomized procedure draws from
// its own substream of the run seed.
inline constexpr std::uint64_t kSplitStream = 0x53504c49;    // site splitting
inline constexpr std::uint64_t kCurveStream = 0x43555256;    // learning-curve subsampling
inline constexpr std::uint64_t kPermuteStream = 0x5045524d;  // permutation controls

enum class Method { kNearestNeighbor, kIdw, kOrdinaryKriging, kRegressionKriging };

const char* to_string(Method method);
std::optional<Method> method_from_string(const std::string& name);
std::vector<std::string> valid_method_names();

/// Smallest training set the method can be fitted on.
std::size_t min_train_size(Method method);

struct MethodParams;

/// Parameter-aware minimum: IDW with a fixed neighbor count needs at least
/// that many training sites.
std::size_t min_train_size(Method method, const MethodParams& params);

struct SplitSpec {
  double train_ratio = 0.8;
  double val_ratio = 0.1;
  double test_ratio = 0.1;
  std::uint64_t seed = 42;
};

struct SplitResult {
  std::vector<Site> train;
  std::vector<Site> val;
  std::vector<Site> test;
};

/// Seeded uniform shuffle partition. Validation/test sizes are
/// round(n * ratio); the remainder goes to train.
SplitResult split_sites(const std::vector<Site>& sites, const SplitSpec& spec);

/// Hyperparameters for one fit; fields not used by the method are ignored.
struct MethodParams {
  IdwParams idw;
  std::optional<VariogramFamily> family;  // nullopt = auto-select by fit objective
};

std::string describe_params(Method method, const MethodParams& params);

/// Grid-search space. Defaults: IDW power in {0.5, 1, 1.5, 2, 2.5, 3, 4},
/// neighbors in {4, 8, 16, all}; kriging variogram family in
/// {spherical, exponential, gaussian}.
struct ParameterGrid {
  std::vector<double> idw_powers{0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0};
  std::vector<std::optional<std::size_t>> idw_neighbors{4, 8, 16, std::nullopt};
  std::vector<std::optional<VariogramFamily>> families{
      VariogramFamily::kSpherical, VariogramFamily::kExponential,
      VariogramFamily::kGaussian};
};

/// Enumeration order is the documented tie-break order: powers outer,
/// neighbors inner for IDW; family order for kriging.
std::vector<MethodParams> enumerate_grid(Method method, const ParameterGrid& grid);

/// A fitted interpolator. Training sites are put in canonical (id-sorted)
/// order before fitting so results are independent of input permutation.
class Predictor {
 public:
  static Predictor fit(Method method, const MethodParams& params, std::vector<Site> train);

  /// Predicts at the target's location; regression kriging requires the
  /// target to carry a covariate.
  double predict(const Site& target) const;

  Method method() const { return method_; }

 private:
  Predictor() = default;

  Method method_ = Method::kNearestNeighbor;
  MethodParams params_;
  std::vector<Site> train_;
  std::optional<OrdinaryKriger> ok_;
  std::optional<RegressionKriger> rk_;
};

double rmse(const std::vector<double>& predictions, const std::vector<double>& gold);

/// Convenience: fit on `train`, predict every site in `test`, return RMSE
/// against the observed values.
double evaluate_rmse(Method method, const MethodParams& params,
                     const std::vector<Site>& train, const std::vector<Site>& test);

struct GridSearchResult {
  MethodParams best;
  double best_rmse = 0.0;
  std::vector<std::pair<MethodParams, double>> scored;  // enumeration order
  std::vector<std::pair<MethodParams, std::string>> failures;
};

/// Exhaustive search minimizing validation RMSE; combinations that fail to
/// fit score +infinity and are recorded. Ties keep the first combination in
/// enumeration order.
GridSearchResult grid_search(Method method, const ParameterGrid& grid,
                             const std::vector<Site>& train, const std::vector<Site>& val);

struct LearningCurvePoint {
  double fraction = 0.0;
  double mean_rmse = 0.0;
  double std_rmse = 0.0;
  std::size_t reps = 0;
  bool available = true;
};

struct LearningCurve {
  std::vector<LearningCurvePoint> points;
};

/// For each fraction, `reps` seeded subsamples of the training pool are
/// fitted and scored on the fixed test set. Subsample streams derive from
/// (seed, kCurveStream, fraction index, rep). Fractions whose subsample is
/// smaller than the method minimum, or where a repetition's model cannot
/// be fitted (e.g. too few nonempty variogram bins), are marked
/// unavailable rather than skipped.
LearningCurve learning_curve(const std::vector<Site>& train_pool,
                             const std::vector<Site>& test, Method method,
                             const MethodParams& params,
                             const std::vector<double>& fractions, std::size_t reps,
                             std::uint64_t seed);

double pearson(const std::vector<double>& x, const std::vector<double>& y);
double spearman(const std::vector<double>& x, const std::vector<double>& y);

/// Distance from each site to the best-scoring site (ties to the smallest
/// id): row `argmax` of the matrix. `matrix_ids[i]` names row i and must
/// have a score.
std::vector<double> similarity_covariate(const DistanceMatrix& distances,
                                         const std::vector<std::string>& matrix_ids,
                                         const std::map<std::string, double>& score_by_id);

}  // namespace geodialect
