#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "uamsim/errors.hpp"

namespace uamsim::cli {

/// FNV-1a 64-bit content hash, hex-encoded. Deterministic commands reproduce
/// identical hashes on rerun.
inline std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot hash missing file: " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

/// Run description written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::string scenario_path;
  std::string map_path;
  nlohmann::json config_overrides = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string out_dir;
  std::map<std::string, std::string> artifact_hashes;

  void add_artifact(const std::string& path) {
    std::string name = path;
    auto slash = name.find_last_of('/');
    if (slash != std::string::npos) name = name.substr(slash + 1);
    artifact_hashes[name] = file_hash(path);
  }

  void write(const std::string& path) const {
    nlohmann::json j;
    j["command"] = command;
    j["scenario"] = scenario_path;
    if (!map_path.empty()) j["map"] = map_path;
    j["config_overrides"] = config_overrides;
    j["seed"] = seed;
    j["out_dir"] = out_dir;
    j["artifacts"] = artifact_hashes;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path);
    out << j.dump(2) << "\n";
  }
};

}  // namespace uamsim::cli
