#include "geodialect/dialectometry.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>

#include "geodialect/csv.hpp"

namespace geodialect {

FeatureSequence::FeatureSequence(std::size_t frames, std::size_t dims)
    : frames_(frames), dims_(dims), data_(frames * dims, 0.0) {
  if (frames == 0 || dims == 0) {
    throw std::invalid_argument("feature sequence needs at least 1 frame and 1 dimension");
  }
}

FeatureSequence FeatureSequence::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty() || rows.front().empty()) {
    throw std::invalid_argument("feature sequence needs at least 1 frame and 1 dimension");
  }
  FeatureSequence seq(rows.size(), rows.front().size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t].size() != seq.dims_) {
      throw std::invalid_argument("feature rows have inconsistent dimension");
    }
    for (std::size_t d = 0; d < seq.dims_; ++d) {
      if (!std::isfinite(rows[t][d])) {
        throw std::invalid_argument("feature values must be finite");
      }
      seq.at(t, d) = rows[t][d];
    }
  }
  return seq;
}

namespace {

double frame_cost(const FeatureSequence& x, std::size_t i, const FeatureSequence& y,
                  std::size_t j) {
  double sq = 0.0;
  for (std::size_t d = 0; d < x.dims(); ++d) {
    const double diff = x.at(i, d) - y.at(j, d);
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

}  // namespace

double dtw_distance(const FeatureSequence& x, const FeatureSequence& y) {
  if (x.dims() != y.dims()) {
    throw std::invalid_argument("DTW feature dimension mismatch: " +
                                std::to_string(x.dims()) + " vs " +
                                std::to_string(y.dims()));
  }
  const std::size_t n = x.frames();
  const std::size_t m = y.frames();
  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      cost[i * m + j] = frame_cost(x, i, y, j);
    }
  }

  // Minimum of cost/length over paths of every feasible cell count L; a
  // layered pass per L keeps the normalization exact rather than dividing
  // one arbitrary optimal path's cost by its own length.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(n * m, inf);
  std::vector<double> cur(n * m, inf);
  const std::size_t l_min = std::max(n, m);
  const std::size_t l_max = n + m - 1;
  double best = inf;

  for (std::size_t level = 1; level <= l_max; ++level) {
    if (level == 1) {
      cur[0] = cost[0];
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          if (i == 0 && j == 0) {
            cur[0] = inf;
            continue;
          }
          double reach = inf;
          if (i > 0) reach = std::min(reach, prev[(i - 1) * m + j]);
          if (j > 0) reach = std::min(reach, prev[i * m + (j - 1)]);
          if (i > 0 && j > 0) reach = std::min(reach, prev[(i - 1) * m + (j - 1)]);
          cur[i * m + j] = (reach == inf) ? inf : cost[i * m + j] + reach;
        }
      }
    }
    if (level >= l_min) {
      const double total = cur[(n - 1) * m + (m - 1)];
      if (total != inf) {
        best = std::min(best, total / static_cast<double>(level));
      }
    }
    std::swap(prev, cur);
  }
  return best;
}

double site_distance(const SiteWordList& x, const SiteWordList& y) {
  if (x.words.size() != y.words.size()) {
    throw std::invalid_argument("word lists are not aligned: site '" + x.site_id +
                                "' has " + std::to_string(x.words.size()) +
                                " words, site '" + y.site_id + "' has " +
                                std::to_string(y.words.size()));
  }
  CompensatedSum total;
  std::size_t present = 0;
  for (std::size_t w = 0; w < x.words.size(); ++w) {
    if (!x.words[w] || !y.words[w]) continue;
    total.add(dtw_distance(*x.words[w], *y.words[w]));
    ++present;
  }
  if (present == 0) {
    throw std::runtime_error("no overlapping words between sites '" + x.site_id +
                             "' and '" + y.site_id + "'");
  }
  return total.value() / static_cast<double>(present);
}

DistanceMatrix linguistic_distance_matrix(const std::vector<SiteWordList>& sites) {
  if (sites.size() < 2) {
    throw std::invalid_argument("linguistic distance matrix needs at least 2 sites");
  }
  DistanceMatrix m(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    for (std::size_t j = i + 1; j < sites.size(); ++j) {
      m.set(i, j, site_distance(sites[i], sites[j]));
    }
  }
  return m;
}

MdsEmbedding classical_mds(const DistanceMatrix& distances, std::size_t k) {
  const std::size_t n = distances.size();
  if (n == 0) {
    throw std::invalid_argument("MDS needs a non-empty distance matrix");
  }
  if (k < 1 || k > n) {
    throw std::invalid_argument("MDS dimension k must satisfy 1 <= k <= n (k=" +
                                std::to_string(k) + ", n=" + std::to_string(n) + ")");
  }

  // B = -1/2 J D^2 J, done via row/column/grand means of the squared matrix.
  Matrix b(n, n, 0.0);
  std::vector<double> row_mean(n, 0.0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = distances.at(i, j);
      const double sq = d * d;
      b(i, j) = sq;
      row_mean[i] += sq;
    }
    row_mean[i] /= static_cast<double>(n);
    grand += row_mean[i];
  }
  grand /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      b(i, j) = -0.5 * (b(i, j) - row_mean[i] - row_mean[j] + grand);
    }
  }

  const SymmetricEigen eig = symmetric_eigen(std::move(b));

  // Eigenvalues at round-off scale would otherwise be blown up by the
  // sqrt scaling (and later by min-max RGB normalization).
  const double lambda_floor = 1e-12 * std::max(0.0, eig.values.front());

  MdsEmbedding out;
  out.coords = Matrix(n, k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    const double lambda = eig.values[c];
    if (lambda <= lambda_floor) continue;  // negative mass shows up in the stress
    const double scale = std::sqrt(lambda);

    // Deterministic sign: the component with the largest magnitude is
    // made positive.
    std::size_t pivot = 0;
    double pivot_abs = -1.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double a = std::fabs(eig.vectors(r, c));
      if (a > pivot_abs) {
        pivot_abs = a;
        pivot = r;
      }
    }
    const double sign = eig.vectors(pivot, c) < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < n; ++r) {
      out.coords(r, c) = sign * scale * eig.vectors(r, c);
    }
  }

  // Numerical centering; exact in theory since B annihilates the ones vector.
  for (std::size_t c = 0; c < k; ++c) {
    CompensatedSum mean;
    for (std::size_t r = 0; r < n; ++r) mean.add(out.coords(r, c));
    const double shift = mean.value() / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) out.coords(r, c) -= shift;
  }

  CompensatedSum num;
  CompensatedSum den;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double sq = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        const double diff = out.coords(i, c) - out.coords(j, c);
        sq += diff * diff;
      }
      const double resid = distances.at(i, j) - std::sqrt(sq);
      num.add(resid * resid);
      den.add(distances.at(i, j) * distances.at(i, j));
    }
  }
  out.stress = den.value() > 0.0 ? std::sqrt(num.value() / den.value()) : 0.0;
  return out;
}

std::vector<Rgb> mds_to_rgb(const MdsEmbedding& embedding) {
  if (embedding.coords.cols() != 3) {
    throw std::invalid_argument("RGB conversion needs a 3-dimensional embedding (k=3)");
  }
  const std::size_t n = embedding.coords.rows();
  std::vector<Rgb> out(n);
  for (std::size_t c = 0; c < 3; ++c) {
    double lo = embedding.coords(0, c);
    double hi = lo;
    for (std::size_t r = 1; r < n; ++r) {
      lo = std::min(lo, embedding.coords(r, c));
      hi = std::max(hi, embedding.coords(r, c));
    }
    for (std::size_t r = 0; r < n; ++r) {
      double byte = 128.0;
      if (hi > lo) {
        const double scaled = (embedding.coords(r, c) - lo) / (hi - lo) * 255.0;
        byte = std::floor(scaled + 0.5);  // half-up
      }
      const auto v = static_cast<std::uint8_t>(std::clamp(byte, 0.0, 255.0));
      if (c == 0) out[r].r = v;
      else if (c == 1) out[r].g = v;
      else out[r].b = v;
    }
  }
  return out;
}

FeatureSequence read_feature_csv(const std::string& path) {
  const CsvTable raw = [&] {
    CsvTable t = read_csv_file(path);
    // no header line: the first record is data too
    t.rows.insert(t.rows.begin(), t.header);
    t.row_lines.insert(t.row_lines.begin(), 1);
    return t;
  }();

  std::vector<std::vector<double>> rows;
  rows.reserve(raw.rows.size());
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    std::vector<double> row;
    row.reserve(raw.rows[r].size());
    for (std::size_t c = 0; c < raw.rows[r].size(); ++c) {
      row.push_back(parse_double_field(
          raw.rows[r][c], path + ": line " + std::to_string(raw.row_lines[r]) +
                              ", column " + std::to_string(c + 1)));
    }
    rows.push_back(std::move(row));
  }
  try {
    return FeatureSequence::from_rows(rows);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::string feature_to_csv(const FeatureSequence& seq) {
  std::string out;
  for (std::size_t t = 0; t < seq.frames(); ++t) {
    for (std::size_t d = 0; d < seq.dims(); ++d) {
      if (d > 0) out += ',';
      out += format_double(seq.at(t, d));
    }
    out += '\n';
  }
  return out;
}

std::vector<FeatureManifestEntry> read_feature_manifest(const std::string& path) {
  const CsvTable t = read_csv_file(path);
  if (t.header != std::vector<std::string>{"site_id", "word_index", "path"}) {
    throw std::runtime_error(path + ": manifest header must be 'site_id,word_index,path'");
  }
  std::vector<FeatureManifestEntry> entries;
  entries.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = path + ": row " + std::to_string(r + 1) + " (line " +
                              std::to_string(t.row_lines[r]) + ")";
    if (row.size() != 3) {
      throw std::runtime_error(where + ": expected 3 fields");
    }
    FeatureManifestEntry e;
    e.site_id = row[0];
    if (e.site_id.empty()) throw std::runtime_error(where + ": empty site_id");
    const double idx = parse_double_field(row[1], where + ", column 'word_index'");
    if (idx < 0.0 || idx != std::floor(idx)) {
      throw std::runtime_error(where + ": word_index must be a nonnegative integer");
    }
    e.word_index = static_cast<std::size_t>(idx);
    e.path = row[2];
    if (e.path.empty()) throw std::runtime_error(where + ": empty path");
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<SiteWordList> load_feature_set(const std::string& manifest_path) {
  const std::vector<FeatureManifestEntry> entries = read_feature_manifest(manifest_path);
  if (entries.empty()) {
    throw std::runtime_error(manifest_path + ": manifest lists no feature files");
  }
  const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();

  std::vector<SiteWordList> sites;
  std::map<std::string, std::size_t> site_index;
  std::size_t n_words = 0;
  for (const auto& e : entries) n_words = std::max(n_words, e.word_index + 1);

  std::size_t established_dims = 0;
  std::string established_by;

  for (const auto& e : entries) {
    auto [it, inserted] = site_index.emplace(e.site_id, sites.size());
    if (inserted) {
      sites.push_back(SiteWordList{e.site_id, {}});
      sites.back().words.resize(n_words);
    }
    SiteWordList& s = sites[it->second];
    if (s.words[e.word_index]) {
      throw std::runtime_error(manifest_path + ": duplicate entry for site '" + e.site_id +
                               "' word " + std::to_string(e.word_index));
    }
    const std::filesystem::path entry_path(e.path);
    const std::filesystem::path resolved =
        entry_path.is_absolute() ? entry_path : base / entry_path;
    FeatureSequence seq = read_feature_csv(resolved.string());
    if (established_dims == 0) {
      established_dims = seq.dims();
      established_by = resolved.string();
    } else if (seq.dims() != established_dims) {
      throw std::runtime_error("feature dimension mismatch: '" + resolved.string() +
                               "' has D=" + std::to_string(seq.dims()) + " but '" +
                               established_by + "' established D=" +
                               std::to_string(established_dims));
    }
    s.words[e.word_index] = std::move(seq);
  }
  return sites;
}

}  // namespace geodialect
