#pragma once

// Run manifest: every CLI command that writes artifacts drops one of these
// next to them.  Holds the resolved configuration and seed so a run can be
// reproduced; wall time is informational and excluded from reproducibility
// comparisons.

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "curstat/common.hpp"
#include "curstat/version.hpp"

namespace curstat {

struct RunManifest {
  std::string command;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;  // resolved key -> value, sorted
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double wall_ms = 0;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["version"] = kVersion;
    j["schema_version"] = kConfigSchemaVersion;
    j["seed"] = seed;
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["wall_ms"] = wall_ms;
    return j;
  }

  static RunManifest from_json(const nlohmann::json& j) {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    require(j.at("schema_version").get<int>() == kConfigSchemaVersion,
            "manifest schema version mismatch");
    m.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("config"))
      m.config = j.at("config").get<std::map<std::string, std::string>>();
    if (j.contains("inputs"))
      m.inputs = j.at("inputs").get<std::vector<std::string>>();
    if (j.contains("outputs"))
      m.outputs = j.at("outputs").get<std::vector<std::string>>();
    if (j.contains("wall_ms")) m.wall_ms = j.at("wall_ms").get<double>();
    return m;
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    require(out.good(), "cannot open manifest path for writing: " + path);
    out << to_json().dump(2) << "\n";
  }

  static RunManifest read(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open manifest: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }
};

}  // namespace curstat
