// SPDX-License-Identifier: Apache-2.0
#include "critique_rm/augment.hpp"

#include <sstream>

#include "critique_rm/jsonl.hpp"

namespace crm {

namespace {

std::string gap_message(const std::vector<std::pair<std::string, Side>>& gaps) {
  std::ostringstream os;
  os << "critique store does not cover " << gaps.size() << " (example, side) pair(s):";
  std::size_t shown = 0;
  for (const auto& [id, side] : gaps) {
    os << ' ' << id << '/' << to_string(side);
    if (++shown == 8 && gaps.size() > 8) {
      os << " ...";
      break;
    }
  }
  return os.str();
}

}  // namespace

CoverageGapError::CoverageGapError(std::vector<std::pair<std::string, Side>> gaps)
    : std::runtime_error(gap_message(gaps)), missing(std::move(gaps)) {}

std::string serialize_conversation(const std::vector<Message>& messages) {
  std::ostringstream os;
  bool first = true;
  for (const auto& m : messages) {
    if (!first) os << "\n\n";
    os << (m.role == Role::kUser ? "User: " : "Chatbot: ") << m.content;
    first = false;
  }
  return os.str();
}

namespace {

std::string render_side(const PreferenceExample& example, const std::string& completion,
                        const Critique* critique, const std::string& role_template) {
  std::string text = serialize_conversation(example.prompt);
  text += "\n\nChatbot: ";
  text += completion;
  if (critique != nullptr) {
    text += role_template;
    text += critique->text;
  }
  return text;
}

}  // namespace

AugmentedPair render_pair(const PreferenceExample& example, const Critique* chosen_critique,
                          const Critique* rejected_critique, const std::string& role_template,
                          const MarginMap& margins) {
  const bool has_chosen = chosen_critique != nullptr;
  const bool has_rejected = rejected_critique != nullptr;
  if (has_chosen != has_rejected) {
    throw MissingSideError(example.id, has_chosen ? Side::kRejected : Side::kChosen);
  }
  if (has_chosen) {
    if (chosen_critique->example_id != example.id) {
      throw IdMismatchError(example.id, chosen_critique->example_id);
    }
    if (rejected_critique->example_id != example.id) {
      throw IdMismatchError(example.id, rejected_critique->example_id);
    }
  }
  AugmentedPair pair;
  pair.example_id = example.id;
  pair.text_chosen = render_side(example, example.chosen, chosen_critique, role_template);
  pair.text_rejected = render_side(example, example.rejected, rejected_critique, role_template);
  pair.margin = margin_of(example.rating, margins);
  pair.critique_generator = has_chosen ? chosen_critique->generator : "none";
  return pair;
}

std::vector<AugmentedPair> render_dataset(const std::vector<PreferenceExample>& dataset,
                                          const CritiqueStore* store,
                                          const std::string& role_template,
                                          const MarginMap& margins) {
  if (store != nullptr) {
    std::vector<std::pair<std::string, Side>> gaps;
    for (const auto& ex : dataset) {
      if (store->find(ex.id, Side::kChosen) == nullptr) gaps.emplace_back(ex.id, Side::kChosen);
      if (store->find(ex.id, Side::kRejected) == nullptr) {
        gaps.emplace_back(ex.id, Side::kRejected);
      }
    }
    if (!gaps.empty()) throw CoverageGapError(std::move(gaps));
  }
  std::vector<AugmentedPair> out;
  out.reserve(dataset.size());
  for (const auto& ex : dataset) {
    const Critique* c = store ? store->find(ex.id, Side::kChosen) : nullptr;
    const Critique* r = store ? store->find(ex.id, Side::kRejected) : nullptr;
    out.push_back(render_pair(ex, c, r, role_template, margins));
  }
  return out;
}

nlohmann::json to_json(const AugmentedPair& pair) {
  return {{"example_id", pair.example_id},
          {"text_chosen", pair.text_chosen},
          {"text_rejected", pair.text_rejected},
          {"margin", pair.margin},
          {"critique_generator", pair.critique_generator}};
}

AugmentedPair augmented_pair_from_json(const nlohmann::json& j) {
  AugmentedPair p;
  p.example_id = j.at("example_id").get<std::string>();
  p.text_chosen = j.at("text_chosen").get<std::string>();
  p.text_rejected = j.at("text_rejected").get<std::string>();
  p.margin = j.at("margin").get<double>();
  p.critique_generator = j.at("critique_generator").get<std::string>();
  return p;
}

std::vector<AugmentedPair> load_augmented(const std::string& path) {
  std::vector<AugmentedPair> out;
  for_each_jsonl_line(path, [&](std::size_t, const nlohmann::json& obj) {
    out.push_back(augmented_pair_from_json(obj));
  });
  return out;
}

void save_augmented(const std::string& path, const std::vector<AugmentedPair>& pairs) {
  std::vector<nlohmann::json> rows;
  rows.reserve(pairs.size());
  for (const auto& p : pairs) rows.push_back(to_json(p));
  write_jsonl(path, rows);
}

}  // namespace crm
