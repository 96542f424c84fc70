#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "geodialect/csv.hpp"
#include "geodialect/dialectometry.hpp"
#include "geodialect/eval.hpp"
#include "geodialect/geo.hpp"
#include "geodialect/interpolate.hpp"
#include "geodialect/kriging.hpp"
#include "geodialect/rng.hpp"
#include "geodialect/text_metrics.hpp"
#include "geodialect/variogram.hpp"

namespace gd = geodialect;
namespace fs = std::filesystem;

namespace {

// Output files are written to `<name>.tmp` and renamed on commit, so a
// failing command never leaves partial outputs behind.
class OutputStage {
 public:
  explicit OutputStage(const std::string& dir) : dir_(dir) {
    if (!dir_.empty()) fs::create_directories(dir_);
  }

  OutputStage(const OutputStage&) = delete;
  OutputStage& operator=(const OutputStage&) = delete;

  ~OutputStage() {
    for (const auto& p : pending_) {
      std::error_code ec;
      fs::remove(p.tmp, ec);
    }
  }

  void add(const std::string& name, const std::string& content) {
    const fs::path final_path = dir_ / name;
    const fs::path tmp_path = dir_ / (name + ".tmp");
    std::ofstream out(tmp_path, std::ios::binary);
    if (!out) {
      throw std::runtime_error("cannot write '" + tmp_path.string() + "'");
    }
    out << content;
    out.close();
    if (!out) {
      throw std::runtime_error("failed writing '" + tmp_path.string() + "'");
    }
    pending_.push_back({tmp_path, final_path});
  }

  void commit() {
    for (const auto& p : pending_) {
      fs::rename(p.tmp, p.final_path);
      std::cout << "wrote " << p.final_path.string() << "\n";
    }
    pending_.clear();
  }

 private:
  struct Pending {
    fs::path tmp;
    fs::path final_path;
  };
  fs::path dir_;
  std::vector<Pending> pending_;
};

struct CommonOpts {
  std::uint64_t seed = 42;
  std::string out_dir = ".";
  std::string config_path;
};

void add_common(CLI::App* sub, CommonOpts& opts) {
  sub->add_option("--seed", opts.seed, "Random seed")->capture_default_str();
  sub->add_option("--out-dir", opts.out_dir, "Output directory")->capture_default_str();
  sub->add_option("--config", opts.config_path,
                  "Config file with key=value lines; flags win on conflict");
}

// Expands `--config file` into synthetic `--key=value` arguments placed
// before the explicit command-line ones; with take-last option policy the
// explicit flags win on conflict.
std::vector<std::string> expand_config_args(const std::vector<std::string>& args) {
  if (args.empty()) return args;
  std::string config_path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) {
    throw std::runtime_error("cannot open config file '" + config_path + "'");
  }
  const auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  std::vector<std::string> injected;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(config_path + ": line " + std::to_string(line_no) +
                               " is not key=value");
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error(config_path + ": line " + std::to_string(line_no) +
                               " has an empty key");
    }
    if (key == "config") continue;  // no recursive config files
    injected.push_back("--" + key + "=" + value);
  }

  std::vector<std::string> out;
  out.reserve(args.size() + injected.size());
  out.push_back(args.front());  // subcommand name
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), args.begin() + 1, args.end());
  return out;
}

std::vector<gd::Site> load_sites(const std::string& path, const std::string& dedupe) {
  std::vector<gd::Site> sites = gd::load_sites_csv(path);
  if (dedupe == "mean") {
    sites = gd::merge_coincident_sites(sites);
  }
  return sites;
}

std::optional<gd::VariogramFamily> parse_family(const std::string& name) {
  if (name == "auto") return std::nullopt;
  const auto family = gd::variogram_family_from_string(name);
  if (!family) {
    throw CLI::ValidationError("--family", "unknown family '" + name + "'");
  }
  return family;
}

std::vector<gd::Method> parse_methods(const std::vector<std::string>& names) {
  std::vector<gd::Method> methods;
  for (const std::string& name : names) {
    const auto m = gd::method_from_string(name);
    if (!m) {
      std::string valid;
      for (const auto& v : gd::valid_method_names()) {
        if (!valid.empty()) valid += ", ";
        valid += v;
      }
      throw CLI::ValidationError("--methods", "unknown method '" + name +
                                                  "' (valid: " + valid + ")");
    }
    methods.push_back(*m);
  }
  return methods;
}

std::map<std::string, double> scores_by_id(const std::vector<gd::Site>& sites) {
  std::map<std::string, double> scores;
  for (const auto& s : sites) scores.emplace(s.id, s.value);
  return scores;
}

// Restricts a feature-set distance matrix to the scored sites, in site order.
gd::DistanceMatrix restrict_matrix(const gd::DistanceMatrix& full,
                                   const std::vector<std::string>& full_ids,
                                   const std::vector<gd::Site>& sites) {
  std::map<std::string, std::size_t> row;
  for (std::size_t i = 0; i < full_ids.size(); ++i) row.emplace(full_ids[i], i);
  std::string missing;
  for (const auto& s : sites) {
    if (row.find(s.id) == row.end()) {
      if (!missing.empty()) missing += ", ";
      missing += "'" + s.id + "'";
    }
  }
  if (!missing.empty()) {
    throw std::runtime_error("sites missing from the feature manifest: " + missing);
  }
  gd::DistanceMatrix out(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    for (std::size_t j = i + 1; j < sites.size(); ++j) {
      out.set(i, j, full.at(row.at(sites[i].id), row.at(sites[j].id)));
    }
  }
  return out;
}

std::vector<std::string> site_ids(const std::vector<gd::Site>& sites) {
  std::vector<std::string> ids;
  ids.reserve(sites.size());
  for (const auto& s : sites) ids.push_back(s.id);
  return ids;
}

gd::DistanceMatrix linguistic_matrix_for(const std::vector<gd::Site>& sites,
                                         const std::string& manifest) {
  if (manifest.empty()) {
    throw std::runtime_error("linguistic covariate needs --manifest");
  }
  const std::vector<gd::SiteWordList> features = gd::load_feature_set(manifest);
  std::vector<std::string> feature_ids;
  feature_ids.reserve(features.size());
  for (const auto& f : features) feature_ids.push_back(f.site_id);
  const gd::DistanceMatrix full = gd::linguistic_distance_matrix(features);
  return restrict_matrix(full, feature_ids, sites);
}

/// Fills the covariate on every site: the distance (linguistic or
/// geographic) to the best-scoring site. "column" keeps values provided in
/// the input file; "auto" uses the column when complete, else geographic.
void apply_covariates(std::vector<gd::Site>& sites, const std::string& mode,
                      const std::string& manifest) {
  const bool column_complete =
      std::all_of(sites.begin(), sites.end(),
                  [](const gd::Site& s) { return s.covariate.has_value(); });
  if (mode == "column" || (mode == "auto" && column_complete)) {
    if (!column_complete) {
      std::string missing;
      for (const auto& s : sites) {
        if (!s.covariate) {
          if (!missing.empty()) missing += ", ";
          missing += "'" + s.id + "'";
        }
      }
      throw std::runtime_error("sites missing the covariate column: " + missing);
    }
    return;
  }
  const gd::DistanceMatrix matrix = (mode == "linguistic")
                                        ? linguistic_matrix_for(sites, manifest)
                                        : gd::pairwise_distances(sites);
  const std::vector<double> covariate =
      gd::similarity_covariate(matrix, site_ids(sites), scores_by_id(sites));
  for (std::size_t i = 0; i < sites.size(); ++i) sites[i].covariate = covariate[i];
}

void warn_if_fragile(const gd::VariogramModel& model) {
  if (model.family == gd::VariogramFamily::kGaussian && model.nugget == 0.0) {
    std::cerr << "note: gaussian variogram with zero nugget; kriging weights can be "
                 "ill-conditioned and extrapolation unstable (try --family "
                 "exponential or spherical)\n";
  }
}

std::pair<gd::GeoPoint, gd::GeoPoint> parse_bbox(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) {
    parts.push_back(gd::parse_double_field(field, "--bbox"));
  }
  if (parts.size() != 4) {
    throw CLI::ValidationError("--bbox", "expected 'minlat,minlon,maxlat,maxlon'");
  }
  return {gd::GeoPoint(parts[0], parts[1]), gd::GeoPoint(parts[2], parts[3])};
}

std::pair<gd::GeoPoint, gd::GeoPoint> sites_bbox(const std::vector<gd::Site>& sites) {
  double min_lat = sites.front().point.lat, max_lat = min_lat;
  double min_lon = sites.front().point.lon, max_lon = min_lon;
  for (const auto& s : sites) {
    min_lat = std::min(min_lat, s.point.lat);
    max_lat = std::max(max_lat, s.point.lat);
    min_lon = std::min(min_lon, s.point.lon);
    max_lon = std::max(max_lon, s.point.lon);
  }
  return {gd::GeoPoint(min_lat, min_lon), gd::GeoPoint(max_lat, max_lon)};
}

// ---- interpolate -------------------------------------------------------

struct InterpolateOpts {
  CommonOpts common;
  std::string sites_path;
  std::string method = "idw";
  double power = 2.0;
  std::size_t neighbors = 0;  // 0 = all
  std::string family = "auto";
  std::size_t bins = gd::kDefaultVariogramBins;
  double max_lag = 0.0;  // 0 = auto
  std::string bbox;
  double cell = 0.1;
  std::string dedupe = "error";
};

void run_interpolate(const InterpolateOpts& opts) {
  const std::vector<gd::Site> sites = load_sites(opts.sites_path, opts.dedupe);
  const auto [bbox_min, bbox_max] =
      opts.bbox.empty() ? sites_bbox(sites) : parse_bbox(opts.bbox);
  const std::vector<gd::GeoPoint> grid = gd::build_grid(bbox_min, bbox_max, opts.cell);

  std::vector<double> values(grid.size());
  if (opts.method == "nn") {
    for (std::size_t i = 0; i < grid.size(); ++i) {
      values[i] = gd::nn_interpolate(sites, grid[i]);
    }
  } else if (opts.method == "idw") {
    gd::IdwParams params;
    params.power = opts.power;
    if (opts.neighbors > 0) params.neighbors = opts.neighbors;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      values[i] = gd::idw_interpolate(sites, grid[i], params);
    }
  } else {  // ok
    const gd::EmpiricalVariogram emp = gd::empirical_variogram(
        sites, opts.bins,
        opts.max_lag > 0.0 ? std::optional<double>(opts.max_lag) : std::nullopt);
    const auto family = parse_family(opts.family);
    const gd::VariogramFit fit = family ? gd::fit_variogram_model(emp, *family)
                                        : gd::fit_variogram_model(emp);
    const gd::OrdinaryKriger kriger{sites, fit.model};
    std::cout << "variogram: family=" << gd::to_string(fit.model.family)
              << " nugget=" << gd::format_double(fit.model.nugget)
              << " partial_sill=" << gd::format_double(fit.model.partial_sill)
              << " range_km=" << gd::format_double(fit.model.range_km) << "\n";
    warn_if_fragile(fit.model);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      values[i] = kriger.predict_value(grid[i]);
    }
  }

  std::string csv = "lat,lon,value\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    csv += gd::format_double(grid[i].lat);
    csv += ',';
    csv += gd::format_double(grid[i].lon);
    csv += ',';
    csv += gd::format_double(values[i]);
    csv += '\n';
  }

  nlohmann::json features = nlohmann::json::array();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    features.push_back({{"type", "Feature"},
                        {"geometry",
                         {{"type", "Point"},
                          {"coordinates", {grid[i].lon, grid[i].lat}}}},
                        {"properties", {{"value", values[i]}}}});
  }
  const nlohmann::json geojson = {{"type", "FeatureCollection"},
                                  {"features", std::move(features)}};

  OutputStage stage(opts.common.out_dir);
  stage.add("grid.csv", csv);
  stage.add("grid.geojson", geojson.dump());
  stage.commit();
  std::cout << "interpolated " << grid.size() << " grid points with method '"
            << opts.method << "'\n";
}

// ---- fit-variogram -----------------------------------------------------

struct FitVariogramOpts {
  CommonOpts common;
  std::string sites_path;
  std::size_t bins = gd::kDefaultVariogramBins;
  double max_lag = 0.0;
  std::string family = "auto";
  std::string dedupe = "error";
};

void run_fit_variogram(const FitVariogramOpts& opts) {
  const std::vector<gd::Site> sites = load_sites(opts.sites_path, opts.dedupe);
  const gd::EmpiricalVariogram emp = gd::empirical_variogram(
      sites, opts.bins,
      opts.max_lag > 0.0 ? std::optional<double>(opts.max_lag) : std::nullopt);
  const auto family = parse_family(opts.family);
  const gd::VariogramFit fit =
      family ? gd::fit_variogram_model(emp, *family) : gd::fit_variogram_model(emp);

  std::string model_csv = "family,nugget,partial_sill,range_km,objective\n";
  model_csv += std::string(gd::to_string(fit.model.family)) + ',' +
               gd::format_double(fit.model.nugget) + ',' +
               gd::format_double(fit.model.partial_sill) + ',' +
               gd::format_double(fit.model.range_km) + ',' +
               gd::format_double(fit.objective) + '\n';

  OutputStage stage(opts.common.out_dir);
  stage.add("variogram.csv", gd::empirical_variogram_to_csv(emp));
  stage.add("variogram_model.csv", model_csv);
  stage.commit();
  std::cout << "fitted " << gd::to_string(fit.model.family)
            << " model: nugget=" << gd::format_double(fit.model.nugget)
            << " partial_sill=" << gd::format_double(fit.model.partial_sill)
            << " range_km=" << gd::format_double(fit.model.range_km)
            << " objective=" << gd::format_double(fit.objective) << "\n";
}

// ---- krige -------------------------------------------------------------

struct KrigeOpts {
  CommonOpts common;
  std::string sites_path;
  std::string targets_path;
  std::string method = "ok";
  std::string family = "auto";
  std::size_t bins = gd::kDefaultVariogramBins;
  double max_lag = 0.0;
  std::string covariate = "column";
  std::string dedupe = "error";
};

void run_krige(const KrigeOpts& opts) {
  std::vector<gd::Site> sites = load_sites(opts.sites_path, opts.dedupe);
  std::vector<gd::TargetPoint> targets = gd::load_targets_csv(opts.targets_path);
  const auto family = parse_family(opts.family);

  std::string csv = "id,lat,lon,value,variance\n";
  if (opts.method == "ok") {
    const gd::EmpiricalVariogram emp = gd::empirical_variogram(
        sites, opts.bins,
        opts.max_lag > 0.0 ? std::optional<double>(opts.max_lag) : std::nullopt);
    const gd::VariogramFit fit = family ? gd::fit_variogram_model(emp, *family)
                                        : gd::fit_variogram_model(emp);
    std::cout << "variogram: family=" << gd::to_string(fit.model.family)
              << " nugget=" << gd::format_double(fit.model.nugget)
              << " partial_sill=" << gd::format_double(fit.model.partial_sill)
              << " range_km=" << gd::format_double(fit.model.range_km) << "\n";
    warn_if_fragile(fit.model);
    const gd::OrdinaryKriger kriger{sites, fit.model};
    for (const auto& t : targets) {
      const gd::KrigingPrediction p = kriger.predict(t.point);
      csv += gd::csv_field(t.id) + ',' + gd::format_double(t.point.lat) + ',' +
             gd::format_double(t.point.lon) + ',' + gd::format_double(p.value) + ',' +
             gd::format_double(p.variance) + '\n';
    }
  } else {  // rk
    if (opts.covariate == "geographic") {
      // distance to the best-scoring site, for training sites and targets
      apply_covariates(sites, "geographic", "");
      const gd::Site* best = &sites.front();
      for (const auto& s : sites) {
        if (s.value > best->value || (s.value == best->value && s.id < best->id)) {
          best = &s;
        }
      }
      for (auto& t : targets) {
        t.covariate = gd::haversine_km(t.point, best->point);
      }
    }
    const gd::RegressionKriger kriger{std::vector<gd::Site>(sites), family, opts.bins};
    const gd::VariogramFit& fit = kriger.residual_fit();
    std::cout << "residual variogram: family=" << gd::to_string(fit.model.family)
              << " nugget=" << gd::format_double(fit.model.nugget)
              << " partial_sill=" << gd::format_double(fit.model.partial_sill)
              << " range_km=" << gd::format_double(fit.model.range_km) << "\n";
    warn_if_fragile(fit.model);
    for (const auto& t : targets) {
      if (!t.covariate) {
        throw std::runtime_error("target '" + t.id +
                                 "' lacks the covariate column required by "
                                 "regression kriging");
      }
      const gd::KrigingPrediction p = kriger.predict(t.point, *t.covariate);
      csv += gd::csv_field(t.id) + ',' + gd::format_double(t.point.lat) + ',' +
             gd::format_double(t.point.lon) + ',' + gd::format_double(p.value) + ',' +
             gd::format_double(p.variance) + '\n';
    }
  }

  OutputStage stage(opts.common.out_dir);
  stage.add("predictions.csv", csv);
  stage.commit();
  std::cout << "predicted " << targets.size() << " targets with method '" << opts.method
            << "'\n";
  const std::uint64_t clamps = gd::negative_variance_clamp_count();
  if (clamps > 0) {
    std::cerr << "note: " << clamps
              << " negative kriging variance(s) from round-off clamped to 0\n";
  }
}

// ---- evaluate ----------------------------------------------------------

struct EvaluateOpts {
  CommonOpts common;
  std::string sites_path;
  std::vector<std::string> methods{"nn", "idw", "rk"};
  std::string covariate = "auto";
  std::string manifest;
  std::string metric_name = "value";
  std::size_t num_seeds = 1;
  std::string dedupe = "error";
};

double evaluate_one_seed(const std::vector<gd::Site>& sites, gd::Method method,
                         std::uint64_t seed, std::string* chosen_params) {
  gd::SplitSpec spec;
  spec.seed = seed;
  const gd::SplitResult split = gd::split_sites(sites, spec);
  const gd::ParameterGrid grid;
  const gd::GridSearchResult search =
      gd::grid_search(method, grid, split.train, split.val);
  if (chosen_params != nullptr) {
    *chosen_params = gd::describe_params(method, search.best);
  }
  return gd::evaluate_rmse(method, search.best, split.train, split.test);
}

void run_evaluate(const EvaluateOpts& opts) {
  std::vector<gd::Site> sites = load_sites(opts.sites_path, opts.dedupe);
  const std::vector<gd::Method> methods = parse_methods(opts.methods);
  if (std::find(methods.begin(), methods.end(), gd::Method::kRegressionKriging) !=
      methods.end()) {
    apply_covariates(sites, opts.covariate, opts.manifest);
  }

  std::string csv = "metric,method,rmse\n";
  for (const gd::Method method : methods) {
    std::string params;
    double score = 0.0;
    try {
      score = evaluate_one_seed(sites, method, opts.common.seed, &params);
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("method '") + gd::to_string(method) +
                               "': " + e.what());
    }
    csv += gd::csv_field(opts.metric_name) + ',' + gd::to_string(method) + ',' +
           gd::format_double(score) + '\n';
    std::cout << gd::to_string(method) << ": test rmse=" << gd::format_double(score)
              << " (" << params << ")\n";
  }

  OutputStage stage(opts.common.out_dir);
  stage.add("results.csv", csv);

  if (opts.num_seeds > 1) {
    std::string multi = "metric,method,mean_rmse,std_rmse,seeds\n";
    for (const gd::Method method : methods) {
      gd::CompensatedSum acc;
      std::vector<double> scores;
      scores.reserve(opts.num_seeds);
      for (std::size_t i = 0; i < opts.num_seeds; ++i) {
        double score = 0.0;
        try {
          score = evaluate_one_seed(sites, method, opts.common.seed + i, nullptr);
        } catch (const std::exception& e) {
          throw std::runtime_error(std::string("method '") + gd::to_string(method) +
                                   "' (seed " + std::to_string(opts.common.seed + i) +
                                   "): " + e.what());
        }
        scores.push_back(score);
        acc.add(score);
      }
      const double mean = acc.value() / static_cast<double>(scores.size());
      gd::CompensatedSum var;
      for (double s : scores) var.add((s - mean) * (s - mean));
      const double stddev =
          scores.size() > 1
              ? std::sqrt(var.value() / static_cast<double>(scores.size() - 1))
              : 0.0;
      multi += gd::csv_field(opts.metric_name) + ',' + gd::to_string(method) + ',' +
               gd::format_double(mean) + ',' + gd::format_double(stddev) + ',' +
               std::to_string(opts.num_seeds) + '\n';
    }
    stage.add("results_multiseed.csv", multi);
  }
  stage.commit();
}

// ---- learning-curve ----------------------------------------------------

struct LearningCurveOpts {
  CommonOpts common;
  std::string sites_path;
  std::vector<std::string> methods{"nn", "idw", "rk"};
  std::vector<double> fractions{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::size_t reps = 100;
  std::string covariate = "auto";
  std::string manifest;
  std::string dedupe = "error";
};

void run_learning_curve(const LearningCurveOpts& opts) {
  std::vector<gd::Site> sites = load_sites(opts.sites_path, opts.dedupe);
  const std::vector<gd::Method> methods = parse_methods(opts.methods);
  if (std::find(methods.begin(), methods.end(), gd::Method::kRegressionKriging) !=
      methods.end()) {
    apply_covariates(sites, opts.covariate, opts.manifest);
  }

  gd::SplitSpec spec;
  spec.seed = opts.common.seed;
  const gd::SplitResult split = gd::split_sites(sites, spec);
  const gd::ParameterGrid grid;

  OutputStage stage(opts.common.out_dir);
  for (const gd::Method method : methods) {
    // Hyperparameters are tuned once on the full train/val split and then
    // held fixed across fractions.
    const gd::GridSearchResult search =
        gd::grid_search(method, grid, split.train, split.val);
    const gd::LearningCurve curve =
        gd::learning_curve(split.train, split.test, method, search.best, opts.fractions,
                           opts.reps, opts.common.seed);
    std::string csv = "fraction,mean_rmse,std_rmse,reps\n";
    for (const auto& p : curve.points) {
      csv += gd::format_double(p.fraction);
      csv += ',';
      if (p.available) {
        csv += gd::format_double(p.mean_rmse);
        csv += ',';
        csv += gd::format_double(p.std_rmse);
      } else {
        csv += ',';
      }
      csv += ',';
      csv += std::to_string(p.reps);
      csv += '\n';
    }
    stage.add(std::string("curve_") + gd::to_string(method) + ".csv", csv);
    std::cout << gd::to_string(method) << ": "
              << gd::describe_params(method, search.best) << "\n";
  }
  stage.commit();
}

// ---- mds-map -----------------------------------------------------------

struct MdsMapOpts {
  CommonOpts common;
  std::string manifest;
  std::string sites_path;
  std::size_t k = 3;
  bool rgb_requested = false;
  bool rgb_disabled = false;
};

void run_mds_map(const MdsMapOpts& opts) {
  if (opts.rgb_requested && opts.k != 3) {
    throw CLI::ValidationError("--rgb", "RGB export needs k=3 (got k=" +
                                            std::to_string(opts.k) + ")");
  }
  const bool want_rgb = !opts.rgb_disabled && (opts.rgb_requested || opts.k == 3);

  const std::vector<gd::SiteWordList> features = gd::load_feature_set(opts.manifest);
  const gd::DistanceMatrix matrix = gd::linguistic_distance_matrix(features);
  const gd::MdsEmbedding embedding = gd::classical_mds(matrix, opts.k);

  std::string emb_csv = "site_id";
  for (std::size_t c = 0; c < opts.k; ++c) emb_csv += ",dim_" + std::to_string(c);
  emb_csv += '\n';
  for (std::size_t i = 0; i < features.size(); ++i) {
    emb_csv += gd::csv_field(features[i].site_id);
    for (std::size_t c = 0; c < opts.k; ++c) {
      emb_csv += ',';
      emb_csv += gd::format_double(embedding.coords(i, c));
    }
    emb_csv += '\n';
  }

  OutputStage stage(opts.common.out_dir);
  stage.add("embedding.csv", emb_csv);

  if (want_rgb) {
    if (opts.sites_path.empty()) {
      throw std::runtime_error(
          "RGB export needs --sites for coordinates (or pass --no-rgb)");
    }
    const std::vector<gd::Site> sites = gd::load_sites_csv(opts.sites_path);
    std::map<std::string, const gd::Site*> by_id;
    for (const auto& s : sites) by_id.emplace(s.id, &s);
    std::string missing;
    for (const auto& f : features) {
      if (by_id.find(f.site_id) == by_id.end()) {
        if (!missing.empty()) missing += ", ";
        missing += "'" + f.site_id + "'";
      }
    }
    if (!missing.empty()) {
      throw std::runtime_error("feature sites missing from --sites: " + missing);
    }
    const std::vector<gd::Rgb> colors = gd::mds_to_rgb(embedding);
    std::string rgb_csv = "site_id,lat,lon,r,g,b\n";
    for (std::size_t i = 0; i < features.size(); ++i) {
      const gd::Site* s = by_id.at(features[i].site_id);
      rgb_csv += gd::csv_field(s->id) + ',' + gd::format_double(s->point.lat) + ',' +
                 gd::format_double(s->point.lon) + ',' + std::to_string(colors[i].r) +
                 ',' + std::to_string(colors[i].g) + ',' + std::to_string(colors[i].b) +
                 '\n';
    }
    stage.add("rgb.csv", rgb_csv);
  }

  std::string log = "sites: " + std::to_string(features.size()) + "\n";
  log += "k: " + std::to_string(opts.k) + "\n";
  log += "stress: " + gd::format_double(embedding.stress) + "\n";
  stage.add("mds_log.txt", log);
  stage.commit();
  std::cout << "mds stress: " << gd::format_double(embedding.stress) << "\n";
}

// ---- correlate ---------------------------------------------------------

struct CorrelateOpts {
  CommonOpts common;
  std::string sites_path;
  std::string manifest;
  bool geographic = false;
  bool permuted_control = false;
  std::string metric_name = "value";
};

void run_correlate(const CorrelateOpts& opts) {
  if (opts.manifest.empty() && !opts.geographic) {
    throw CLI::ValidationError(
        "correlate", "pass --manifest for linguistic distance or --geographic");
  }
  const std::vector<gd::Site> sites = gd::load_sites_csv(opts.sites_path);
  const gd::DistanceMatrix matrix = opts.geographic
                                        ? gd::pairwise_distances(sites)
                                        : linguistic_matrix_for(sites, opts.manifest);
  const std::vector<double> covariate =
      gd::similarity_covariate(matrix, site_ids(sites), scores_by_id(sites));

  std::vector<double> values;
  values.reserve(sites.size());
  for (const auto& s : sites) values.push_back(s.value);

  const double r_pearson = gd::pearson(values, covariate);
  const double r_spearman = gd::spearman(values, covariate);
  std::string csv = "metric,pearson,spearman\n";
  csv += gd::csv_field(opts.metric_name) + ',' + gd::format_double(r_pearson) + ',' +
         gd::format_double(r_spearman) + '\n';
  std::cout << opts.metric_name << ": pearson=" << gd::format_double(r_pearson)
            << " spearman=" << gd::format_double(r_spearman) << "\n";

  if (opts.permuted_control) {
    // Scores are shuffled while the covariate stays fixed, so the control
    // estimates the correlation level expected under no association.
    std::vector<double> permuted = values;
    gd::SplitMix64 gen(gd::derive_stream(opts.common.seed, gd::kPermuteStream));
    gd::fisher_yates_shuffle(permuted, gen);
    csv += gd::csv_field(opts.metric_name + "_permuted_control") + ',' +
           gd::format_double(gd::pearson(permuted, covariate)) + ',' +
           gd::format_double(gd::spearman(permuted, covariate)) + '\n';
  }

  OutputStage stage(opts.common.out_dir);
  stage.add("correlation.csv", csv);
  stage.commit();
}

// ---- score -------------------------------------------------------------

struct ScoreOpts {
  CommonOpts common;
  std::string segments_path;
};

void run_score(const ScoreOpts& opts) {
  const gd::CsvTable table = gd::read_csv_file(opts.segments_path);
  if (table.header.size() < 4 || table.header[0] != "site_id" ||
      table.header[1] != "segment_id" || table.header[2] != "hypothesis") {
    throw std::runtime_error(opts.segments_path +
                             ": header must be 'site_id,segment_id,hypothesis,ref_0[,...]'");
  }
  for (std::size_t c = 3; c < table.header.size(); ++c) {
    if (table.header[c].rfind("ref_", 0) != 0) {
      throw std::runtime_error(opts.segments_path + ": unexpected header column '" +
                               table.header[c] + "' (references must be named ref_*)");
    }
  }

  std::map<std::string, std::vector<gd::ScoredSegment>> by_site;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::string where = opts.segments_path + ": row " + std::to_string(r + 1) +
                              " (line " + std::to_string(table.row_lines[r]) + ")";
    if (row.size() != table.header.size()) {
      throw std::runtime_error(where + ": has " + std::to_string(row.size()) +
                               " fields, expected " +
                               std::to_string(table.header.size()));
    }
    if (row[0].empty()) throw std::runtime_error(where + ": empty site_id");
    gd::ScoredSegment seg;
    seg.hypothesis = row[2];
    for (std::size_t c = 3; c < row.size(); ++c) {
      if (!row[c].empty()) seg.references.push_back(row[c]);
    }
    if (seg.references.empty()) {
      throw std::runtime_error(where + ": no reference given");
    }
    by_site[row[0]].push_back(std::move(seg));
  }
  if (by_site.empty()) {
    throw std::runtime_error(opts.segments_path + ": no segments");
  }

  std::string csv = "site_id,chrf2,bleu\n";
  for (const auto& [site, segments] : by_site) {
    csv += gd::csv_field(site) + ',' + gd::format_double(gd::chrf(segments)) + ',' +
           gd::format_double(gd::bleu(segments)) + '\n';
  }

  OutputStage stage(opts.common.out_dir);
  stage.add("scores.csv", csv);
  stage.commit();
  std::cout << "scored " << by_site.size() << " sites\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geostatistical interpolation and acoustic dialectometry toolkit"};
  app.require_subcommand(1);

  InterpolateOpts interp;
  CLI::App* interp_cmd =
      app.add_subcommand("interpolate", "Interpolate site values onto a lat/lon grid");
  add_common(interp_cmd, interp.common);
  interp_cmd->add_option("--sites", interp.sites_path, "Site CSV (id,lat,lon,value[,covariate])")
      ->required();
  interp_cmd->add_option("--method", interp.method, "Interpolation method")
      ->check(CLI::IsMember({"nn", "idw", "ok"}))
      ->capture_default_str();
  interp_cmd->add_option("--power", interp.power, "IDW power")->capture_default_str();
  interp_cmd->add_option("--neighbors", interp.neighbors, "IDW neighbor count (0 = all)")
      ->capture_default_str();
  interp_cmd->add_option("--family", interp.family, "Variogram family for ok")
      ->check(CLI::IsMember({"auto", "spherical", "exponential", "gaussian"}))
      ->capture_default_str();
  interp_cmd->add_option("--bins", interp.bins, "Variogram bins")->capture_default_str();
  interp_cmd->add_option("--max-lag", interp.max_lag, "Variogram max lag km (0 = auto)")
      ->capture_default_str();
  interp_cmd->add_option("--bbox", interp.bbox, "minlat,minlon,maxlat,maxlon (default: site bbox)");
  interp_cmd->add_option("--cell", interp.cell, "Grid cell size in degrees")
      ->capture_default_str();
  interp_cmd->add_option("--dedupe", interp.dedupe, "Coincident-site handling")
      ->check(CLI::IsMember({"error", "mean"}))
      ->capture_default_str();

  FitVariogramOpts fitvar;
  CLI::App* fitvar_cmd =
      app.add_subcommand("fit-variogram", "Estimate and fit an empirical variogram");
  add_common(fitvar_cmd, fitvar.common);
  fitvar_cmd->add_option("--sites", fitvar.sites_path, "Site CSV")->required();
  fitvar_cmd->add_option("--bins", fitvar.bins, "Bin count")->capture_default_str();
  fitvar_cmd->add_option("--max-lag", fitvar.max_lag, "Max lag km (0 = auto)")
      ->capture_default_str();
  fitvar_cmd->add_option("--family", fitvar.family, "Model family")
      ->check(CLI::IsMember({"auto", "spherical", "exponential", "gaussian"}))
      ->capture_default_str();
  fitvar_cmd->add_option("--dedupe", fitvar.dedupe, "Coincident-site handling")
      ->check(CLI::IsMember({"error", "mean"}))
      ->capture_default_str();

  KrigeOpts krige;
  CLI::App* krige_cmd = app.add_subcommand("krige", "Kriging predictions at target points");
  add_common(krige_cmd, krige.common);
  krige_cmd->add_option("--sites", krige.sites_path, "Site CSV")->required();
  krige_cmd->add_option("--targets", krige.targets_path, "Target CSV (id,lat,lon[,covariate])")
      ->required();
  krige_cmd->add_option("--method", krige.method, "ok or rk")
      ->check(CLI::IsMember({"ok", "rk"}))
      ->capture_default_str();
  krige_cmd->add_option("--family", krige.family, "Variogram family")
      ->check(CLI::IsMember({"auto", "spherical", "exponential", "gaussian"}))
      ->capture_default_str();
  krige_cmd->add_option("--bins", krige.bins, "Variogram bins")->capture_default_str();
  krige_cmd->add_option("--max-lag", krige.max_lag, "Variogram max lag km (0 = auto)")
      ->capture_default_str();
  krige_cmd->add_option("--covariate", krige.covariate,
                        "RK covariate source for sites and targets")
      ->check(CLI::IsMember({"column", "geographic"}))
      ->capture_default_str();
  krige_cmd->add_option("--dedupe", krige.dedupe, "Coincident-site handling")
      ->check(CLI::IsMember({"error", "mean"}))
      ->capture_default_str();

  EvaluateOpts eval;
  CLI::App* eval_cmd = app.add_subcommand(
      "evaluate", "Split, grid-search, and report test RMSE per method");
  add_common(eval_cmd, eval.common);
  eval_cmd->add_option("--sites", eval.sites_path, "Site CSV")->required();
  eval_cmd->add_option("--methods", eval.methods, "Methods to evaluate")
      ->delimiter(',')
      ->check(CLI::IsMember(gd::valid_method_names()))
      ->capture_default_str();
  eval_cmd->add_option("--covariate", eval.covariate, "RK covariate source")
      ->check(CLI::IsMember({"auto", "column", "geographic", "linguistic"}))
      ->capture_default_str();
  eval_cmd->add_option("--manifest", eval.manifest, "Feature manifest for linguistic covariate");
  eval_cmd->add_option("--metric-name", eval.metric_name, "Label for the metric column")
      ->capture_default_str();
  eval_cmd->add_option("--num-seeds", eval.num_seeds,
                       "Also report mean/std RMSE over this many seeds")
      ->capture_default_str();
  eval_cmd->add_option("--dedupe", eval.dedupe, "Coincident-site handling")
      ->check(CLI::IsMember({"error", "mean"}))
      ->capture_default_str();

  LearningCurveOpts curve;
  CLI::App* curve_cmd = app.add_subcommand(
      "learning-curve", "Mean test RMSE as a function of training-data fraction");
  add_common(curve_cmd, curve.common);
  curve_cmd->add_option("--sites", curve.sites_path, "Site CSV")->required();
  curve_cmd->add_option("--methods", curve.methods, "Methods to evaluate")
      ->delimiter(',')
      ->check(CLI::IsMember(gd::valid_method_names()))
      ->capture_default_str();
  curve_cmd->add_option("--fractions", curve.fractions, "Training fractions in (0, 1]")
      ->delimiter(',')
      ->capture_default_str();
  curve_cmd->add_option("--reps", curve.reps, "Subsample repetitions per fraction")
      ->capture_default_str();
  curve_cmd->add_option("--covariate", curve.covariate, "RK covariate source")
      ->check(CLI::IsMember({"auto", "column", "geographic", "linguistic"}))
      ->capture_default_str();
  curve_cmd->add_option("--manifest", curve.manifest, "Feature manifest");
  curve_cmd->add_option("--dedupe", curve.dedupe, "Coincident-site handling")
      ->check(CLI::IsMember({"error", "mean"}))
      ->capture_default_str();

  MdsMapOpts mds;
  CLI::App* mds_cmd = app.add_subcommand(
      "mds-map", "Linguistic distances, classical MDS, and RGB continuum map");
  add_common(mds_cmd, mds.common);
  mds_cmd->add_option("--manifest", mds.manifest, "Feature manifest CSV")->required();
  mds_cmd->add_option("--sites", mds.sites_path, "Site CSV for RGB coordinates");
  mds_cmd->add_option("--k", mds.k, "Embedding dimension")->capture_default_str();
  mds_cmd->add_flag("--rgb", mds.rgb_requested, "Force RGB export (needs k=3)");
  mds_cmd->add_flag("--no-rgb", mds.rgb_disabled, "Skip RGB export");

  CorrelateOpts corr;
  CLI::App* corr_cmd = app.add_subcommand(
      "correlate", "Correlate scores with distance to the best-scoring site");
  add_common(corr_cmd, corr.common);
  corr_cmd->add_option("--sites", corr.sites_path, "Site CSV")->required();
  corr_cmd->add_option("--manifest", corr.manifest, "Feature manifest (linguistic distance)");
  corr_cmd->add_flag("--geographic", corr.geographic,
                     "Use geographic instead of linguistic distance");
  corr_cmd->add_flag("--permuted-control", corr.permuted_control,
                     "Also report a shuffled-score control row");
  corr_cmd->add_option("--metric-name", corr.metric_name, "Label for the metric column")
      ->capture_default_str();

  ScoreOpts score;
  CLI::App* score_cmd =
      app.add_subcommand("score", "Per-site corpus chrF2 and BLEU from a segments CSV");
  add_common(score_cmd, score.common);
  score_cmd->add_option("--segments", score.segments_path,
                        "Segments CSV (site_id,segment_id,hypothesis,ref_0[,...])")
      ->required();

  for (CLI::App* sub : app.get_subcommands(nullptr)) {
    for (CLI::Option* opt : sub->get_options()) {
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
  }

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config_args(args);
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (interp_cmd->parsed()) run_interpolate(interp);
    else if (fitvar_cmd->parsed()) run_fit_variogram(fitvar);
    else if (krige_cmd->parsed()) run_krige(krige);
    else if (eval_cmd->parsed()) run_evaluate(eval);
    else if (curve_cmd->parsed()) run_learning_curve(curve);
    else if (mds_cmd->parsed()) run_mds_map(mds);
    else if (corr_cmd->parsed()) run_correlate(corr);
    else if (score_cmd->parsed()) run_score(score);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
