#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flipkit/csv.hpp"
#include "flipkit/datasets.hpp"
#include "flipkit/version.hpp"

// Structured run reports. Identical inputs produce byte-identical output:
// ordered JSON with insertion-ordered keys, or a flattened key,value CSV.
namespace flipkit::report {

using ordered_json = nlohmann::ordered_json;

struct InputRef {
  std::string path;
  std::string digest;
};

// JSON has no infinity literal (nlohmann would emit null); infinite results
// are spelled out as strings so absent decay channels stay explicit.
inline ordered_json json_number(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return value;
}

struct Report {
  std::string subcommand;
  std::vector<InputRef> inputs;
  ordered_json parameters = ordered_json::object();
  ordered_json results = ordered_json::object();
  std::vector<std::string> warnings;
  std::vector<std::string> notes;  // provenance notes from bundled datasets
};

inline InputRef to_ref(const bundled::InputDoc& doc) { return {doc.path, doc.digest}; }

inline ordered_json to_json(const Report& report) {
  ordered_json doc;
  doc["tool"] = std::string(kToolName);
  doc["version"] = std::string(kVersion);
  doc["subcommand"] = report.subcommand;
  doc["inputs"] = ordered_json::array();
  for (const auto& input : report.inputs) {
    doc["inputs"].push_back({{"path", input.path}, {"digest_fnv1a64", input.digest}});
  }
  doc["parameters"] = report.parameters;
  doc["results"] = report.results;
  doc["warnings"] = report.warnings;
  doc["notes"] = report.notes;
  return doc;
}

inline void write_json(std::ostream& out, const Report& report) {
  out << to_json(report).dump(2) << "\n";
}

namespace detail {

inline void flatten(const ordered_json& node, const std::string& prefix, std::ostream& out) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) {
      flatten(value, prefix.empty() ? key : prefix + "." + key, out);
    }
  } else if (node.is_array()) {
    std::size_t index = 0;
    for (const auto& value : node) {
      flatten(value, prefix + "." + std::to_string(index++), out);
    }
  } else if (node.is_number_float()) {
    out << prefix << "," << csv::format_double(node.get<double>()) << "\n";
  } else if (node.is_string()) {
    out << prefix << "," << csv::quote_field(node.get<std::string>()) << "\n";
  } else {
    out << prefix << "," << node.dump() << "\n";
  }
}

}  // namespace detail

inline void write_csv(std::ostream& out, const Report& report) {
  out << "key,value\n";
  out << "tool," << kToolName << "\n";
  out << "version," << kVersion << "\n";
  out << "subcommand," << report.subcommand << "\n";
  for (std::size_t i = 0; i < report.inputs.size(); ++i) {
    out << "inputs." << i << ".path," << report.inputs[i].path << "\n";
    out << "inputs." << i << ".digest_fnv1a64," << report.inputs[i].digest << "\n";
  }
  detail::flatten(report.parameters, "parameters", out);
  detail::flatten(report.results, "results", out);
  for (std::size_t i = 0; i < report.warnings.size(); ++i) {
    out << "warnings." << i << "," << csv::quote_field(report.warnings[i]) << "\n";
  }
  for (std::size_t i = 0; i < report.notes.size(); ++i) {
    out << "notes." << i << "," << csv::quote_field(report.notes[i]) << "\n";
  }
}

}  // namespace flipkit::report
