#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geodialect/geo.hpp"
#include "geodialect/linalg.hpp"

namespace geodialect {

/// Per-frame acoustic features for one spoken word: T frames x D dimensions.
class FeatureSequence {
 public:
  FeatureSequence(std::size_t frames, std::size_t dims);
  static FeatureSequence from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t frames() const { return frames_; }
  std::size_t dims() const { return dims_; }
  double at(std::size_t t, std::size_t d) const { return data_[t * dims_ + d]; }
  double& at(std::size_t t, std::size_t d) { return data_[t * dims_ + d]; }

 private:
  std::size_t frames_;
  std::size_t dims_;
  std::vector<double> data_;
};

/// Length-normalized dynamic time warping with Euclidean frame cost and
/// steps {diagonal, down, right}: the minimum over all monotone warping
/// paths of (accumulated cost / number of cells on the path). Identical
/// sequences score exactly 0.
double dtw_distance(const FeatureSequence& x, const FeatureSequence& y);

/// One site's word list; entries are aligned by word index across sites and
/// may be missing.
struct SiteWordList {
  std::string site_id;
  std::vector<std::optional<FeatureSequence>> words;
};

/// Mean per-word DTW distance over the word pairs present on both sides;
/// pairs with a missing side are skipped.
double site_distance(const SiteWordList& x, const SiteWordList& y);

DistanceMatrix linguistic_distance_matrix(const std::vector<SiteWordList>& sites);

struct MdsEmbedding {
  Matrix coords;  // n x k
  double stress = 0.0;
};

/// Classical (Torgerson) multidimensional scaling: eigendecomposition of the
/// double-centered squared-distance matrix, top-k eigenpairs with negative
/// eigenvalues clamped to zero. Stress is
/// sqrt(sum_{i<j} (d_ij - |y_i - y_j|)^2 / sum_{i<j} d_ij^2).
MdsEmbedding classical_mds(const DistanceMatrix& distances, std::size_t k);

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
};

/// Each of the three dimensions min-max scaled to [0, 255] independently and
/// rounded half-up; a constant dimension maps to 128.
std::vector<Rgb> mds_to_rgb(const MdsEmbedding& embedding);

// ---- feature files ----------------------------------------------------
//
// One CSV per (site, word): T rows x D columns of decimal floats, no
// header. A manifest CSV `site_id,word_index,path` names them; relative
// paths resolve against the manifest's directory.

FeatureSequence read_feature_csv(const std::string& path);
std::string feature_to_csv(const FeatureSequence& seq);

struct FeatureManifestEntry {
  std::string site_id;
  std::size_t word_index = 0;
  std::string path;
};

std::vector<FeatureManifestEntry> read_feature_manifest(const std::string& path);

/// Loads every sequence in the manifest. Sites appear in first-occurrence
/// order; the word-list length is max word index + 1 across the whole
/// manifest, with absent entries left missing. A feature-dimension mismatch
/// is an error naming both files.
std::vector<SiteWordList> load_feature_set(const std::string& manifest_path);

}  // namespace geodialect
