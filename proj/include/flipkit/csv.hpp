#pragma once

#include <charconv>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "flipkit/errors.hpp"

namespace flipkit::csv {

struct Table {
  std::vector<std::string> comments;  // leading '#' lines, prefix stripped
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      fields.emplace_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return fields;
}

}  // namespace detail

inline Table parse(std::string_view text, std::string_view source_name = "csv") {
  Table table;
  std::size_t pos = 0;
  bool saw_header = false;
  while (pos <= text.size()) {
    const std::size_t end = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos);
    pos = (end == std::string_view::npos) ? text.size() + 1 : end + 1;
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '#') {
      table.comments.emplace_back(detail::trim(line.substr(1)));
      continue;
    }
    if (!saw_header) {
      table.header = detail::split_fields(line);
      saw_header = true;
      continue;
    }
    auto fields = detail::split_fields(line);
    if (fields.size() != table.header.size()) {
      throw parse_error(std::string(source_name) + ": row has " + std::to_string(fields.size()) +
                        " fields, header has " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (!saw_header) {
    throw parse_error(std::string(source_name) + ": no header row");
  }
  return table;
}

inline std::size_t column_index(const Table& table, std::string_view name,
                                std::string_view source_name = "csv") {
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (table.header[i] == name) return i;
  }
  throw parse_error(std::string(source_name) + ": missing column '" + std::string(name) + "'");
}

inline double to_double(std::string_view field, std::string_view what = "value") {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw parse_error("cannot parse " + std::string(what) + " from '" + std::string(field) + "'");
  }
  return value;
}

inline long to_long(std::string_view field, std::string_view what = "value") {
  long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw parse_error("cannot parse " + std::string(what) + " from '" + std::string(field) + "'");
  }
  return value;
}

// Locale-independent numeric formatting for CSV emission.
inline std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.12g", value);
  return buffer;
}

// Quotes a field when it contains a delimiter, quote or newline.
inline std::string quote_field(std::string_view field) {
  if (field.find_first_of(",\"\n") == std::string_view::npos) {
    return std::string(field);
  }
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

}  // namespace flipkit::csv
