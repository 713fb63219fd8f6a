#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace stylemine {

inline const char* tool_version() { return "stylemine 0.1.0"; }

// Everything needed to reproduce a run byte-for-byte, wall clock aside.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;  // resolved key -> value
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string version = tool_version();
  double wall_clock_sec = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = config;
    j["seed"] = seed;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["tool_version"] = version;
    j["wall_clock_sec"] = wall_clock_sec;
    return j;
  }
};

// Write-then-rename keeps readers from ever seeing a partial manifest.
inline void write_manifest(const RunManifest& manifest, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("write_manifest: cannot open " + tmp);
    f << manifest.to_json().dump(2) << "\n";
    if (!f) throw std::runtime_error("write_manifest: write failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw std::runtime_error("write_manifest: rename to " + path + " failed");
  }
}

}  // namespace stylemine
