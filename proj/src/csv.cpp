#include "geodialect/csv.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace geodialect {

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "'");
  }
  return parse_csv(in, path);
}

CsvTable parse_csv(std::istream& in, const std::string& source_name) {
  // strip a UTF-8 byte-order mark if present
  if (in.peek() == 0xEF) {
    char bom[3] = {};
    in.read(bom, 3);
    if (in.gcount() != 3 || bom[1] != '\xBB' || bom[2] != '\xBF') {
      throw std::runtime_error(source_name + ": malformed byte-order mark");
    }
  }

  std::vector<std::vector<std::string>> records;
  std::vector<std::size_t> record_lines;

  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool record_open = false;
  std::size_t line = 1;
  std::size_t record_start = 1;

  auto end_field = [&] {
    if (!record_open) record_start = line;
    fields.push_back(std::move(field));
    field.clear();
    record_open = true;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(fields));
    record_lines.push_back(record_start);
    fields.clear();
    record_open = false;
  };

  char ch;
  while (in.get(ch)) {
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_quotes = true;
        if (!record_open) record_start = line;
        record_open = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;  // swallowed; the following '\n' ends the record
      case '\n':
        end_record();
        ++line;
        break;
      default:
        if (!record_open) record_start = line;
        record_open = true;
        field.push_back(ch);
        break;
    }
  }
  if (in_quotes) {
    throw std::runtime_error(source_name + ": unterminated quoted field");
  }
  if (record_open || !field.empty()) end_record();

  CsvTable table;
  if (records.empty()) {
    throw std::runtime_error(source_name + ": empty file");
  }
  table.header = std::move(records.front());
  table.rows.assign(std::make_move_iterator(records.begin() + 1),
                    std::make_move_iterator(records.end()));
  table.row_lines.assign(record_lines.begin() + 1, record_lines.end());
  return table;
}

std::string csv_field(const std::string& value) {
  const bool needs_quote = value.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs_quote) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double parse_double_field(const std::string& text, const std::string& context) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data() + begin, text.data() + end, value);
  if (ec != std::errc{} || ptr != text.data() + end || begin == end) {
    throw std::runtime_error(context + ": cannot parse number '" + text + "'");
  }
  if (!std::isfinite(value)) {
    throw std::runtime_error(context + ": value '" + text + "' is not finite");
  }
  return value;
}

namespace {

std::string row_context(const std::string& path, std::size_t row_idx, std::size_t line,
                        const std::string& column) {
  return path + ": row " + std::to_string(row_idx + 1) + " (line " +
         std::to_string(line) + "), column '" + column + "'";
}

void check_header(const CsvTable& t, const std::string& path,
                  const std::vector<std::string>& required, std::size_t n_optional,
                  const std::vector<std::string>& optional_names) {
  if (t.header.size() < required.size() ||
      t.header.size() > required.size() + n_optional) {
    throw std::runtime_error(path + ": expected header starting with 'id,lat,lon'");
  }
  for (std::size_t i = 0; i < required.size(); ++i) {
    if (t.header[i] != required[i]) {
      throw std::runtime_error(path + ": header column " + std::to_string(i + 1) +
                               " must be '" + required[i] + "', found '" +
                               t.header[i] + "'");
    }
  }
  for (std::size_t i = required.size(); i < t.header.size(); ++i) {
    if (t.header[i] != optional_names[i - required.size()]) {
      throw std::runtime_error(path + ": unexpected header column '" + t.header[i] + "'");
    }
  }
}

GeoPoint parse_point(const std::string& path, std::size_t row_idx, std::size_t line,
                     const std::string& lat_text, const std::string& lon_text) {
  const double lat = parse_double_field(lat_text, row_context(path, row_idx, line, "lat"));
  const double lon = parse_double_field(lon_text, row_context(path, row_idx, line, "lon"));
  try {
    return GeoPoint(lat, lon);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(row_context(path, row_idx, line, "lat/lon") + ": " + e.what());
  }
}

}  // namespace

std::vector<Site> load_sites_csv(const std::string& path) {
  const CsvTable t = read_csv_file(path);
  check_header(t, path, {"id", "lat", "lon", "value"}, 1, {"covariate"});
  const bool has_covariate = t.header.size() == 5;

  std::vector<Site> sites;
  sites.reserve(t.rows.size());
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = t.row_lines[r];
    if (row.size() != t.header.size()) {
      throw std::runtime_error(path + ": row " + std::to_string(r + 1) + " (line " +
                               std::to_string(line) + ") has " +
                               std::to_string(row.size()) + " fields, expected " +
                               std::to_string(t.header.size()));
    }
    Site s;
    s.id = row[0];
    if (s.id.empty()) {
      throw std::runtime_error(row_context(path, r, line, "id") + ": empty id");
    }
    if (!seen.insert(s.id).second) {
      throw std::runtime_error(row_context(path, r, line, "id") + ": duplicate id '" +
                               s.id + "'");
    }
    s.point = parse_point(path, r, line, row[1], row[2]);
    s.value = parse_double_field(row[3], row_context(path, r, line, "value"));
    if (has_covariate && !row[4].empty()) {
      s.covariate = parse_double_field(row[4], row_context(path, r, line, "covariate"));
    }
    sites.push_back(std::move(s));
  }
  return sites;
}

std::string sites_to_csv(const std::vector<Site>& sites) {
  bool any_covariate = false;
  for (const Site& s : sites) any_covariate = any_covariate || s.covariate.has_value();
  std::string out = any_covariate ? "id,lat,lon,value,covariate\n" : "id,lat,lon,value\n";
  for (const Site& s : sites) {
    out += csv_field(s.id);
    out += ',';
    out += format_double(s.point.lat);
    out += ',';
    out += format_double(s.point.lon);
    out += ',';
    out += format_double(s.value);
    if (any_covariate) {
      out += ',';
      if (s.covariate) out += format_double(*s.covariate);
    }
    out += '\n';
  }
  return out;
}

std::vector<TargetPoint> load_targets_csv(const std::string& path) {
  const CsvTable t = read_csv_file(path);
  check_header(t, path, {"id", "lat", "lon"}, 1, {"covariate"});
  const bool has_covariate = t.header.size() == 4;

  std::vector<TargetPoint> targets;
  targets.reserve(t.rows.size());
  std::unordered_set<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::size_t line = t.row_lines[r];
    if (row.size() != t.header.size()) {
      throw std::runtime_error(path + ": row " + std::to_string(r + 1) + " (line " +
                               std::to_string(line) + ") has " +
                               std::to_string(row.size()) + " fields, expected " +
                               std::to_string(t.header.size()));
    }
    TargetPoint p;
    p.id = row[0];
    if (p.id.empty()) {
      throw std::runtime_error(row_context(path, r, line, "id") + ": empty id");
    }
    if (!seen.insert(p.id).second) {
      throw std::runtime_error(row_context(path, r, line, "id") + ": duplicate id '" +
                               p.id + "'");
    }
    p.point = parse_point(path, r, line, row[1], row[2]);
    if (has_covariate && !row[3].empty()) {
      p.covariate = parse_double_field(row[3], row_context(path, r, line, "covariate"));
    }
    targets.push_back(std::move(p));
  }
  return targets;
}

}  // namespace geodialect
