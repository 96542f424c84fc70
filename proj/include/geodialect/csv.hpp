#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "geodialect/geo.hpp"

namespace geodialect {

/// Parsed CSV contents. `row_lines` holds the 1-based source line each row
/// starts on, for error reporting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines;
};

CsvTable read_csv_file(const std::string& path);
CsvTable parse_csv(std::istream& in, const std::string& source_name);

/// Escapes a value for CSV output (quotes when it contains comma, quote, or
/// newline).
std::string csv_field(const std::string& value);

/// Stable shortest-ish formatting used for all CSV output ("%.10g").
std::string format_double(double v);

/// Strict double parser; `context` names the file/row/column on failure.
double parse_double_field(const std::string& text, const std::string& context);

/// Site CSV: header `id,lat,lon,value[,covariate]`, one site per row; an
/// empty covariate field means absent.
std::vector<Site> load_sites_csv(const std::string& path);
std::string sites_to_csv(const std::vector<Site>& sites);

/// Prediction target CSV: header `id,lat,lon[,covariate]`.
struct TargetPoint {
  std::string id;
  GeoPoint point;
  std::optional<double> covariate;
};
std::vector<TargetPoint> load_targets_csv(const std::string& path);

}  // namespace geodialect
