// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace crm {

inline constexpr const char* kToolVersion = "0.1.0";

struct ArtifactRef {
  std::string path;
  std::string digest;
};

// Provenance record written next to every command's outputs. Inputs carry
// the digests of the files consumed, so chains of manifests can be
// cross-checked artifact by artifact.
struct RunManifest {
  std::string command;
  std::string tool_version = kToolVersion;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  std::string config_digest;
  std::vector<ArtifactRef> inputs;
  std::vector<ArtifactRef> outputs;
  std::map<std::string, std::string> template_versions;
  std::string critique_generator = "none";
  std::string started_at;
  std::string finished_at;

  void add_input(const std::string& path);
  void add_output(const std::string& path);
  void finalize();  // config digest + finished_at timestamp

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
  void save(const std::string& path) const;
  static RunManifest load(const std::string& path);
};

std::string iso8601_utc_now();

// Path of the manifest that documents `artifact_path`.
std::string manifest_path_for(const std::string& artifact_path);

}  // namespace crm
