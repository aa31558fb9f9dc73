// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "critique_rm/augment.hpp"
#include "critique_rm/prefdata.hpp"
#include "critique_rm/scorer.hpp"
#include "critique_rm/trainer.hpp"

namespace crm {

enum class TiePolicy { kTieIncorrect, kTieHalfCredit };

const char* to_string(TiePolicy policy);
TiePolicy tie_policy_from_string(const std::string& s);

struct CategoryStats {
  std::size_t n = 0;
  std::size_t correct = 0;
  std::size_t ties = 0;
  double accuracy = 0.0;
};

struct EvalReport {
  std::map<std::string, CategoryStats> categories;
  CategoryStats overall;
  double avg_score = 0.0;  // unweighted mean of category accuracies
  TiePolicy tie_policy = TiePolicy::kTieIncorrect;
  std::string model_digest;
  std::string critique_generator = "none";
  std::string dataset_digest;

  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  std::string to_csv() const;
};

double category_accuracy(const CategoryStats& stats, TiePolicy policy);

// Equal-weight mean over category accuracies (the Avg. Score contract).
double avg_score_of(const std::vector<double>& category_accuracies);

std::pair<double, double> score_pair(const ScorerParams& params, const Tokenizer& tokenizer,
                                     const AugmentedPair& pair);

using CategoryById = std::map<std::string, std::string>;

CategoryById categories_of(const std::vector<PreferenceExample>& dataset);

// Pairwise accuracy: correct iff r_chosen > r_rejected strictly; exact
// reward ties are counted per policy and reported separately.
EvalReport accuracy(const ScorerParams& params, const Tokenizer& tokenizer,
                    const std::vector<AugmentedPair>& pairs, const CategoryById& categories,
                    TiePolicy policy);

struct ScalingMode {
  std::string name;
  bool use_critiques = false;
};

struct ScorerSettings {
  int d = 64;
  int L = 2;
  std::size_t vocab_cap = 8192;
  std::size_t max_len = 512;
  Truncation truncation = Truncation::kKeepTail;
};

struct ScalingInputs {
  const std::vector<PreferenceExample>* train = nullptr;
  const CritiqueStore* train_critiques = nullptr;
  const std::vector<PreferenceExample>* test = nullptr;
  const CritiqueStore* test_critiques = nullptr;
  std::string role_template = kDefaultRoleTemplate;
  MarginMap margins;
  TrainConfig config;
  ScorerSettings scorer;
  std::vector<std::size_t> sizes;  // ascending, each <= |train|
  std::vector<std::uint64_t> seeds;
  std::vector<ScalingMode> modes;
  TiePolicy tie_policy = TiePolicy::kTieIncorrect;
};

struct ScalingCell {
  std::size_t size = 0;
  std::string mode;
  std::uint64_t seed = 0;
  EvalReport report;
  bool failed = false;
  std::string error;
};

struct ScalingTable {
  std::vector<ScalingCell> cells;

  std::string to_csv() const;
  // Mean avg_score per size for one mode, sizes ascending.
  std::vector<std::pair<std::size_t, double>> mean_curve(const std::string& mode) const;
};

// Trains and evaluates every (size, mode, seed) cell. Both modes of a
// (size, seed) cell share the same seeded prefix of the training set.
// Per-cell failures are recorded, not fatal.
ScalingTable scaling_study(const ScalingInputs& inputs,
                           const std::function<void(const ScalingCell&)>& on_cell = {});

}  // namespace crm
