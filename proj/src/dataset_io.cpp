#include "rdforest/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>
#include <vector>

#include "rdforest/error.hpp"

namespace rdforest {

std::string format_full(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string format_short(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 6);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    std::string_view field = line.substr(start, comma == std::string_view::npos ? comma : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
      field.remove_suffix(1);
    }
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(std::string_view field, std::size_t line_no) {
  double v = 0.0;
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": cannot parse number '" +
                     std::string(field) + "'");
  }
  return v;
}

}  // namespace

Dataset read_dataset_csv(std::istream& in, const std::optional<AssignmentRule>& rule) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV input");
  const auto header = split_fields(line);
  if (header.size() < 2 || header[0] != "y") {
    throw ParseError("CSV header must start with 'y,x1'");
  }
  const bool has_d = header.back() == "d";
  const std::size_t dim = header.size() - 1 - (has_d ? 1 : 0);
  if (dim == 0) throw ParseError("CSV header has no score columns");
  for (std::size_t j = 0; j < dim; ++j) {
    if (header[j + 1] != "x" + std::to_string(j + 1)) {
      throw ParseError("CSV header column " + std::to_string(j + 2) + " must be x" +
                       std::to_string(j + 1));
    }
  }
  if (rule && rule->dim() != dim) throw DimensionError("CSV dimension does not match the rule");

  std::vector<double> y, x;
  std::vector<std::uint8_t> d;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields");
    }
    y.push_back(parse_double(fields[0], line_no));
    for (std::size_t j = 0; j < dim; ++j) x.push_back(parse_double(fields[j + 1], line_no));
    std::span<const double> point(x.data() + x.size() - dim, dim);
    int label = rule ? assign(*rule, point) : 0;
    if (has_d) {
      const std::string_view f = fields.back();
      if (f != "0" && f != "1") {
        throw ParseError("line " + std::to_string(line_no) + ": treatment must be 0 or 1");
      }
      const int given = f == "1" ? 1 : 0;
      if (rule && given != label) {
        throw ConfigError("line " + std::to_string(line_no) +
                          ": treatment column disagrees with the assignment rule");
      }
      label = given;
    }
    d.push_back(static_cast<std::uint8_t>(label));
  }
  if (y.empty()) throw ConfigError("CSV input has no data rows");
  return Dataset(dim, std::move(y), std::move(x), std::move(d), rule);
}

Dataset read_dataset_csv_file(const std::string& path, const std::optional<AssignmentRule>& rule) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_dataset_csv(in, rule);
}

void write_dataset_csv(std::ostream& out, const Dataset& data, bool include_treatment) {
  std::string buf = "y";
  for (std::size_t j = 0; j < data.dim(); ++j) buf += ",x" + std::to_string(j + 1);
  if (include_treatment) buf += ",d";
  buf += '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    buf += format_full(data.y(i));
    for (double v : data.point(i)) {
      buf += ',';
      buf += format_full(v);
    }
    if (include_treatment) buf += data.treatment(i) ? ",1" : ",0";
    buf += '\n';
  }
  out << buf;
  if (!out) throw IoError("write failed");
}

void write_dataset_csv_file(const std::string& path, const Dataset& data, bool include_treatment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_dataset_csv(out, data, include_treatment);
}

}  // namespace rdforest
