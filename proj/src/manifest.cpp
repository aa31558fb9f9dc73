// SPDX-License-Identifier: Apache-2.0
#include "critique_rm/manifest.hpp"

#include <ctime>

#include "critique_rm/digest.hpp"
#include "critique_rm/jsonl.hpp"

namespace crm {

std::string iso8601_utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::string manifest_path_for(const std::string& artifact_path) {
  return artifact_path + ".manifest.json";
}

void RunManifest::add_input(const std::string& path) {
  inputs.push_back({path, digest_file(path)});
}

void RunManifest::add_output(const std::string& path) {
  outputs.push_back({path, digest_file(path)});
}

void RunManifest::finalize() {
  config_digest = digest_hex(config.dump());
  finished_at = iso8601_utc_now();
}

namespace {

nlohmann::json refs_json(const std::vector<ArtifactRef>& refs) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : refs) out.push_back({{"path", r.path}, {"digest", r.digest}});
  return out;
}

std::vector<ArtifactRef> refs_from_json(const nlohmann::json& j) {
  std::vector<ArtifactRef> out;
  for (const auto& r : j) {
    out.push_back({r.at("path").get<std::string>(), r.at("digest").get<std::string>()});
  }
  return out;
}

}  // namespace

nlohmann::json RunManifest::to_json() const {
  return {{"command", command},
          {"tool_version", tool_version},
          {"seed", seed},
          {"config", config},
          {"config_digest", config_digest},
          {"inputs", refs_json(inputs)},
          {"outputs", refs_json(outputs)},
          {"template_versions", template_versions},
          {"critique_generator", critique_generator},
          {"started_at", started_at},
          {"finished_at", finished_at}};
}

RunManifest RunManifest::from_json(const nlohmann::json& j) {
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.tool_version = j.at("tool_version").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.config = j.at("config");
  m.config_digest = j.at("config_digest").get<std::string>();
  m.inputs = refs_from_json(j.at("inputs"));
  m.outputs = refs_from_json(j.at("outputs"));
  m.template_versions = j.at("template_versions").get<std::map<std::string, std::string>>();
  m.critique_generator = j.at("critique_generator").get<std::string>();
  m.started_at = j.at("started_at").get<std::string>();
  m.finished_at = j.at("finished_at").get<std::string>();
  return m;
}

void RunManifest::save(const std::string& path) const {
  write_file_atomic(path, to_json().dump(2) + "\n");
}

RunManifest RunManifest::load(const std::string& path) {
  return from_json(nlohmann::json::parse(read_file(path)));
}

}  // namespace crm
