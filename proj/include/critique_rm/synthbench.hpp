// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "critique_rm/prefdata.hpp"

namespace crm {

// Synthetic preference testbed with a known latent quality signal, a
// length distractor and an "appealing surface cue" distractor that
// anti-correlates with quality on the adversarial slice.
struct SynthSpec {
  std::size_t n_examples = 0;
  std::size_t vocab_size = 250;
  std::size_t quality_tokens = 40;
  double length_bias = 0.0;           // P(rejected completion is longer)
  double adversarial_fraction = 0.0;  // fraction where the surface cue flips
  std::uint64_t seed = 0;

  void validate() const;
};

inline constexpr int kNumAspects = 3;
inline constexpr const char* kAspectNames[kNumAspects] = {"instruction_following",
                                                          "correctness", "helpfulness"};
inline constexpr const char* kQualityTokenPrefix = "qual";
inline constexpr const char* kAppealTokenPrefix = "appeal";
inline constexpr const char* kFillerTokenPrefix = "w";
inline constexpr const char* kAspectBankVersion = "aspects-v1";
inline constexpr const char* kCategoryEasy = "synthetic_easy";
inline constexpr const char* kCategoryAdversarial = "synthetic_adversarial";

struct GroundTruth {
  std::string id;
  double quality_chosen = 0.0;
  double quality_rejected = 0.0;
  std::array<bool, kNumAspects> aspects_chosen{};
  std::array<bool, kNumAspects> aspects_rejected{};
};

struct SynthDataset {
  std::vector<PreferenceExample> examples;
  std::vector<GroundTruth> truth;

  const GroundTruth* truth_for(const std::string& id) const;

 private:
  mutable std::map<std::string, std::size_t> index_;
};

struct ForeignExampleError : std::runtime_error {
  explicit ForeignExampleError(const std::string& id)
      : std::runtime_error("example " + id + " has no synthbench ground truth") {}
};

// Deterministic in (spec, seed). The chosen side always has strictly
// higher latent quality; ratings come from tertiles of the quality gap;
// exactly floor(n * adversarial_fraction) examples are adversarial.
SynthDataset gen_dataset(const SynthSpec& spec);

struct OracleCritic {
  double fidelity = 1.0;  // P(an emitted aspect polarity matches truth)
  std::uint64_t seed = 0;

  std::string generator_name() const;
};

// K templated aspect sentences; each polarity matches ground truth with
// probability fidelity, independently, keyed by (seed, example_id, side).
Critique oracle_critique(const PreferenceExample& example, Side side, const OracleCritic& critic,
                         const SynthDataset& dataset);

// Oracle critiques for both sides of every example.
CritiqueStore oracle_critique_all(const SynthDataset& dataset, const OracleCritic& critic);

// The emitted polarity of each aspect sentence in `text`, in aspect order.
// Used by fidelity estimators and tests.
std::array<bool, kNumAspects> parse_aspect_polarities(const std::string& text);

void save_truth(const std::string& path, const SynthDataset& dataset);
std::vector<GroundTruth> load_truth(const std::string& path);

}  // namespace crm
