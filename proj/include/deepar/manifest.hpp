#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace deepar {

inline constexpr const char* kEngineVersion = "0.1.0";

std::string sha256_file(const std::filesystem::path& path);
std::string utc_now();

// Record written next to every command output so the run can be repeated.
struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();
  std::string started_at;
  std::string finished_at;

  nlohmann::ordered_json to_json() const;
  // Writes to a temporary sibling and renames it into place.
  void write(const std::filesystem::path& path) const;
};

// Writes `contents` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace deepar
