#include "geodialect/dialectometry.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include <stdexcept>

#include "doctest.h"
#include "geodialect/rng.hpp"
#include "support/oracles.hpp"

using namespace geodialect;
using oracles::scalar_sequence;

namespace {

FeatureSequence random_sequence(SplitMix64& gen, std::size_t max_frames, std::size_t dims) {
  const std::size_t frames = 1 + gen.below(max_frames);
  FeatureSequence seq(frames, dims);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t d = 0; d < dims; ++d) {
      seq.at(t, d) = 4.0 * gen.uniform() - 2.0;
    }
  }
  return seq;
}

DistanceMatrix matrix_from_points(const std::vector<std::pair<double, double>>& pts) {
  DistanceMatrix m(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double dx = pts[i].first - pts[j].first;
      const double dy = pts[i].second - pts[j].second;
      m.set(i, j, std::sqrt(dx * dx + dy * dy));
    }
  }
  return m;
}

double embedded_distance(const MdsEmbedding& emb, std::size_t i, std::size_t j) {
  double sq = 0.0;
  for (std::size_t c = 0; c < emb.coords.cols(); ++c) {
    const double diff = emb.coords(i, c) - emb.coords(j, c);
    sq += diff * diff;
  }
  return std::sqrt(sq);
}

}  // namespace

TEST_CASE("dtw of identical sequences is exactly zero") {
  SplitMix64 gen(17);
  for (int trial = 0; trial < 10; ++trial) {
    const FeatureSequence s = random_sequence(gen, 8, 3);
    CHECK(dtw_distance(s, s) == 0.0);
  }
}

TEST_CASE("dtw of single frames is the euclidean frame distance") {
  FeatureSequence u(1, 2), v(1, 2);
  u.at(0, 0) = 1.0; u.at(0, 1) = 2.0;
  v.at(0, 0) = 4.0; v.at(0, 1) = 6.0;
  CHECK(dtw_distance(u, v) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("dtw matches exhaustive enumeration on a hand-built pair") {
  const FeatureSequence a = scalar_sequence({0.0, 1.0, 2.0});
  const FeatureSequence b = scalar_sequence({0.0, 2.0});
  CHECK(dtw_distance(a, b) == doctest::Approx(oracles::dtw_brute_force(a, b)).epsilon(1e-12));
}

TEST_CASE("dtw equals the brute-force minimum over short random pairs") {
  SplitMix64 gen(27);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t dims = 1 + gen.below(3);
    const FeatureSequence x = random_sequence(gen, 6, dims);
    const FeatureSequence y = random_sequence(gen, 6, dims);
    const double fast = dtw_distance(x, y);
    const double brute = oracles::dtw_brute_force(x, y);
    CHECK(fast == doctest::Approx(brute).epsilon(1e-10));
  }
}

TEST_CASE("dtw is symmetric") {
  SplitMix64 gen(37);
  for (int trial = 0; trial < 30; ++trial) {
    const FeatureSequence x = random_sequence(gen, 7, 2);
    const FeatureSequence y = random_sequence(gen, 7, 2);
    CHECK(dtw_distance(x, y) == dtw_distance(y, x));
  }
}

TEST_CASE("dtw dimension mismatch is an error") {
  const FeatureSequence x(2, 2);
  const FeatureSequence y(2, 3);
  CHECK_THROWS_AS(dtw_distance(x, y), std::invalid_argument);
}

TEST_CASE("site distance basics") {
  SiteWordList a{"a", {}};
  SiteWordList b{"b", {}};
  a.words.push_back(scalar_sequence({0.0, 1.0}));
  b.words.push_back(scalar_sequence({0.0, 1.0}));
  CHECK(site_distance(a, b) == 0.0);

  SiteWordList c{"c", {scalar_sequence({0.0, 1.0, 2.0})}};
  SiteWordList d{"d", {scalar_sequence({0.0, 2.0})}};
  CHECK(site_distance(c, d) ==
        doctest::Approx(dtw_distance(*c.words[0], *d.words[0])).epsilon(1e-15));
}

TEST_CASE("site distance averages per-word dtw values") {
  SiteWordList x{"x", {}};
  SiteWordList y{"y", {}};
  std::vector<double> expected;
  SplitMix64 gen(47);
  for (int w = 0; w < 3; ++w) {
    const FeatureSequence fx = random_sequence(gen, 5, 1);
    const FeatureSequence fy = random_sequence(gen, 5, 1);
    expected.push_back(dtw_distance(fx, fy));
    x.words.push_back(fx);
    y.words.push_back(fy);
  }
  const double mean = (expected[0] + expected[1] + expected[2]) / 3.0;
  CHECK(site_distance(x, y) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("site distance skips missing words and renormalizes") {
  SiteWordList x{"x", {}};
  SiteWordList y{"y", {}};
  x.words.push_back(scalar_sequence({1.0}));
  y.words.push_back(std::nullopt);
  x.words.push_back(scalar_sequence({2.0}));
  y.words.push_back(scalar_sequence({5.0}));
  CHECK(site_distance(x, y) == doctest::Approx(3.0).epsilon(1e-15));

  SiteWordList empty_x{"x", {std::nullopt}};
  SiteWordList empty_y{"y", {scalar_sequence({1.0})}};
  CHECK_THROWS_WITH_AS(site_distance(empty_x, empty_y), doctest::Contains("overlapping"),
                       std::runtime_error);

  SiteWordList misaligned{"z", {}};
  CHECK_THROWS_AS(site_distance(x, misaligned), std::invalid_argument);
}

TEST_CASE("linguistic distance matrix agrees with site_distance and invariants") {
  SplitMix64 gen(57);
  std::vector<SiteWordList> sites;
  for (int s = 0; s < 3; ++s) {
    SiteWordList list{"site" + std::to_string(s), {}};
    for (int w = 0; w < 2; ++w) list.words.push_back(random_sequence(gen, 4, 2));
    sites.push_back(std::move(list));
  }
  const DistanceMatrix m = linguistic_distance_matrix(sites);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(m.at(i, i) == 0.0);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(m.at(i, j) == m.at(j, i));
      if (i != j) {
        CHECK(m.at(i, j) == doctest::Approx(site_distance(sites[i], sites[j])).epsilon(1e-15));
      }
    }
  }

  std::vector<SiteWordList> identical{sites[0], sites[0]};
  identical[1].site_id = "copy";
  const DistanceMatrix z = linguistic_distance_matrix(identical);
  CHECK(z.at(0, 1) == 0.0);
}

TEST_CASE("classical MDS on an all-zero matrix") {
  const DistanceMatrix zeros(4);
  const MdsEmbedding emb = classical_mds(zeros, 2);
  CHECK(emb.stress == 0.0);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(emb.coords(r, c) == 0.0);
    }
  }
}

TEST_CASE("classical MDS reconstructs collinear points in one dimension") {
  DistanceMatrix d(3);
  d.set(0, 1, 1.0);
  d.set(1, 2, 1.0);
  d.set(0, 2, 2.0);
  const MdsEmbedding emb = classical_mds(d, 1);
  CHECK(emb.stress <= 1e-9);
  CHECK(embedded_distance(emb, 0, 1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(embedded_distance(emb, 1, 2) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(embedded_distance(emb, 0, 2) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("classical MDS embeds an equilateral triangle exactly in 2-D") {
  DistanceMatrix d(3);
  d.set(0, 1, 1.0);
  d.set(1, 2, 1.0);
  d.set(0, 2, 1.0);
  const MdsEmbedding emb = classical_mds(d, 2);
  CHECK(emb.stress <= 1e-9);
  CHECK(embedded_distance(emb, 0, 1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(embedded_distance(emb, 1, 2) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(embedded_distance(emb, 0, 2) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("classical MDS recovers planar point sets with near-zero stress") {
  SplitMix64 gen(67);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::pair<double, double>> pts;
    const std::size_t n = 4 + gen.below(10);
    for (std::size_t i = 0; i < n; ++i) {
      pts.emplace_back(10.0 * gen.uniform(), 10.0 * gen.uniform());
    }
    const DistanceMatrix d = matrix_from_points(pts);
    const MdsEmbedding emb = classical_mds(d, 2);
    CHECK(emb.stress <= 1e-9);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        CHECK(embedded_distance(emb, i, j) == doctest::Approx(d.at(i, j)).epsilon(1e-7));
      }
    }
    // embedded configuration is centered
    for (std::size_t c = 0; c < 2; ++c) {
      CompensatedSum mean;
      for (std::size_t r = 0; r < n; ++r) mean.add(emb.coords(r, c));
      CHECK(std::fabs(mean.value() / static_cast<double>(n)) <= 1e-9);
    }
  }
}

TEST_CASE("classical MDS rejects bad k") {
  const DistanceMatrix d(3);
  CHECK_THROWS_AS(classical_mds(d, 0), std::invalid_argument);
  CHECK_THROWS_AS(classical_mds(d, 4), std::invalid_argument);
}

TEST_CASE("mds_to_rgb endpoints, constants and midpoint rounding") {
  MdsEmbedding emb;
  emb.coords = Matrix(3, 3, 0.0);
  // dim 0: {0, 5, 10} -> {0, 128, 255}; dim 1 constant -> 128; dim 2: {-1, 0, 1}
  emb.coords(0, 0) = 0.0;  emb.coords(1, 0) = 5.0;  emb.coords(2, 0) = 10.0;
  emb.coords(0, 1) = 7.0;  emb.coords(1, 1) = 7.0;  emb.coords(2, 1) = 7.0;
  emb.coords(0, 2) = -1.0; emb.coords(1, 2) = 1.0;  emb.coords(2, 2) = 0.0;
  const auto rgb = mds_to_rgb(emb);
  CHECK(rgb[0].r == 0);
  CHECK(rgb[1].r == 128);  // 127.5 rounds half-up
  CHECK(rgb[2].r == 255);
  CHECK(rgb[0].g == 128);
  CHECK(rgb[1].g == 128);
  CHECK(rgb[2].g == 128);
  CHECK(rgb[0].b == 0);
  CHECK(rgb[1].b == 255);
  CHECK(rgb[2].b == 128);
}

TEST_CASE("mds_to_rgb needs k=3") {
  MdsEmbedding emb;
  emb.coords = Matrix(2, 2, 0.0);
  CHECK_THROWS_AS(mds_to_rgb(emb), std::invalid_argument);
}

TEST_CASE("mds_to_rgb is invariant to positive affine rescaling of one dimension") {
  SplitMix64 gen(77);
  for (int trial = 0; trial < 20; ++trial) {
    MdsEmbedding emb;
    const std::size_t n = 5;
    emb.coords = Matrix(n, 3, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < 3; ++c) emb.coords(r, c) = 10.0 * gen.uniform();
    }
    const auto base = mds_to_rgb(emb);
    MdsEmbedding scaled = emb;
    const std::size_t dim = gen.below(3);
    const double a = 0.5 + 2.0 * gen.uniform();
    const double b = 10.0 * gen.uniform() - 5.0;
    for (std::size_t r = 0; r < n; ++r) {
      scaled.coords(r, dim) = a * scaled.coords(r, dim) + b;
    }
    const auto out = mds_to_rgb(scaled);
    for (std::size_t r = 0; r < n; ++r) {
      CHECK(out[r].r == base[r].r);
      CHECK(out[r].g == base[r].g);
      CHECK(out[r].b == base[r].b);
    }
  }
}

TEST_CASE("feature CSV and manifest round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "geodialect_feature_io_test";
  fs::create_directories(dir / "siteA");
  fs::create_directories(dir / "siteB");

  const FeatureSequence seq = scalar_sequence({1.5, -2.0, 0.25});
  {
    std::ofstream out(dir / "siteA" / "0.csv");
    out << feature_to_csv(seq);
  }
  {
    std::ofstream out(dir / "siteA" / "1.csv");
    out << "1,2\n3,4\n";
  }
  // dims must match across every file -> make siteB word 0 two-dimensional too
  {
    std::ofstream out(dir / "siteB" / "0.csv");
    out << "5,6\n";
  }

  // inconsistent D: siteA/0.csv is 1-D, siteA/1.csv is 2-D
  {
    std::ofstream out(dir / "manifest_bad.csv");
    out << "site_id,word_index,path\n";
    out << "siteA,0,siteA/0.csv\n";
    out << "siteA,1,siteA/1.csv\n";
  }
  CHECK_THROWS_WITH_AS(load_feature_set((dir / "manifest_bad.csv").string()),
                       doctest::Contains("dimension mismatch"), std::runtime_error);

  {
    std::ofstream out(dir / "manifest.csv");
    out << "site_id,word_index,path\n";
    out << "siteA,1,siteA/1.csv\n";
    out << "siteB,0,siteB/0.csv\n";
  }
  const auto sites = load_feature_set((dir / "manifest.csv").string());
  REQUIRE(sites.size() == 2);
  CHECK(sites[0].site_id == "siteA");
  REQUIRE(sites[0].words.size() == 2);
  CHECK(!sites[0].words[0].has_value());  // missing word stays missing
  REQUIRE(sites[0].words[1].has_value());
  CHECK(sites[0].words[1]->at(1, 1) == 4.0);
  REQUIRE(sites[1].words[0].has_value());
  CHECK(!sites[1].words[1].has_value());

  {
    std::ofstream out(dir / "manifest_dup.csv");
    out << "site_id,word_index,path\n";
    out << "siteB,0,siteB/0.csv\n";
    out << "siteB,0,siteB/0.csv\n";
  }
  CHECK_THROWS_WITH_AS(load_feature_set((dir / "manifest_dup.csv").string()),
                       doctest::Contains("duplicate"), std::runtime_error);

  fs::remove_all(dir);
}
