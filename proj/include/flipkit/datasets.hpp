#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "flipkit/bundled_data.hpp"
#include "flipkit/errors.hpp"

// Access to the bundled datasets (embedded at build time; data/ is the
// source of truth) and uniform input resolution for the CLI: a path either
// names a file or uses the "bundled:<id>" scheme. User data goes through the
// same loaders as the bundled transcriptions.
namespace flipkit::bundled {

struct Entry {
  std::string_view id;
  std::string_view content;
};

inline const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {"tableS3", generated::table_s3_json},
      {"tableS4", generated::table_s4_json},
      {"tableS7", generated::table_s7_csv},
      {"expectations", generated::expectations_json},
      {"config", generated::config_json},
  };
  return table;
}

inline std::string_view find(std::string_view id) {
  for (const auto& entry : entries()) {
    if (entry.id == id) return entry.content;
  }
  throw domain_error("unknown bundled dataset '" + std::string(id) + "'");
}

inline std::vector<std::string_view> ids() {
  std::vector<std::string_view> out;
  for (const auto& entry : entries()) out.push_back(entry.id);
  return out;
}

// 64-bit FNV-1a content digest, echoed into reports for provenance.
inline std::string fnv1a64_hex(std::string_view content) {
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (unsigned char c : content) {
    hash ^= c;
    hash *= 0x100000001b3ull;
  }
  char buffer[19];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

struct InputDoc {
  std::string path;     // as given (file path or bundled:<id>)
  std::string content;
  std::string digest;   // fnv1a64 of the content
};

inline InputDoc resolve_input(std::string_view path_or_bundled) {
  InputDoc doc;
  doc.path = std::string(path_or_bundled);
  constexpr std::string_view kScheme = "bundled:";
  if (doc.path.rfind(kScheme, 0) == 0) {
    doc.content = std::string(find(doc.path.substr(kScheme.size())));
  } else {
    std::ifstream in(doc.path, std::ios::binary);
    if (!in) {
      throw parse_error("cannot open input file '" + doc.path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    doc.content = buffer.str();
  }
  doc.digest = fnv1a64_hex(doc.content);
  return doc;
}

inline nlohmann::json parse_json(const InputDoc& doc) {
  try {
    return nlohmann::json::parse(doc.content);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(doc.path + ": " + e.what());
  }
}

inline nlohmann::json expectations() { return nlohmann::json::parse(find("expectations")); }

inline nlohmann::json config() { return nlohmann::json::parse(find("config")); }

}  // namespace flipkit::bundled
