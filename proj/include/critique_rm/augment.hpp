// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "critique_rm/prefdata.hpp"

namespace crm {

// Rendered (x, y+:c+) / (x, y-:c-) pair, ready for tokenization.
struct AugmentedPair {
  std::string example_id;
  std::string text_chosen;
  std::string text_rejected;
  double margin = 0.0;
  std::string critique_generator = "none";
};

inline constexpr const char* kDefaultRoleTemplate = "\n\nCritique of the response above:\n";

struct MissingSideError : std::runtime_error {
  MissingSideError(const std::string& id, Side missing)
      : std::runtime_error("example " + id + " has a critique for only one side (missing " +
                           to_string(missing) + ")") {}
};

struct IdMismatchError : std::runtime_error {
  IdMismatchError(const std::string& example_id, const std::string& critique_id)
      : std::runtime_error("critique example_id " + critique_id + " does not match example " +
                           example_id) {}
};

struct CoverageGapError : std::runtime_error {
  std::vector<std::pair<std::string, Side>> missing;
  explicit CoverageGapError(std::vector<std::pair<std::string, Side>> gaps);
};

// "User: ...\n\nChatbot: ..." blocks, one per message.
std::string serialize_conversation(const std::vector<Message>& messages);

// No-critique mode when both critique pointers are null; critique mode
// inserts role_template between the completion and the critique text.
AugmentedPair render_pair(const PreferenceExample& example, const Critique* chosen_critique,
                          const Critique* rejected_critique, const std::string& role_template,
                          const MarginMap& margins);

// store == nullptr renders the whole dataset in no-critique mode.
std::vector<AugmentedPair> render_dataset(const std::vector<PreferenceExample>& dataset,
                                          const CritiqueStore* store,
                                          const std::string& role_template,
                                          const MarginMap& margins);

nlohmann::json to_json(const AugmentedPair& pair);
AugmentedPair augmented_pair_from_json(const nlohmann::json& j);
std::vector<AugmentedPair> load_augmented(const std::string& path);
void save_augmented(const std::string& path, const std::vector<AugmentedPair>& pairs);

}  // namespace crm
