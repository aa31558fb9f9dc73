// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "critique_rm/critic_client.hpp"
#include "critique_rm/evalharness.hpp"
#include "critique_rm/prefdata.hpp"

namespace crm {

inline constexpr const char* kJudgeTemplateVersion = "judge-v1";

struct JudgeVerdict {
  std::string example_id;
  int score_chosen = 0;    // 0..10
  int score_rejected = 0;  // 0..10
  bool with_critique = false;
  std::string raw_chosen;
  std::string raw_rejected;
};

struct UnparseableScoreError : std::runtime_error {
  std::string raw;
  explicit UnparseableScoreError(std::string reply)
      : std::runtime_error("no integer score in [0, 10] found in reply: " +
                           reply.substr(0, 120)),
        raw(std::move(reply)) {}
};

struct BothEmptyError : std::runtime_error {
  BothEmptyError() : std::runtime_error("both candidate and reference unit lists are empty") {}
};

// First "<k>/10" pattern with k in [0, 10], else the first integer token
// in [0, 10]; anything else is unparseable.
int parse_likert_score(const std::string& reply);

// The one-line point-wise scoring instruction appended to the serialized
// conversation (template judge-v1).
std::string render_judge_prompt(const std::vector<Message>& prompt, const std::string& completion);

// One point-wise verdict per side. with_critique first asks for a
// critique, then for the score in the same conversation.
JudgeVerdict judge_pair(const PreferenceExample& example, CriticBackend& backend,
                        bool with_critique, const Decoding& decoding = {});

// Correct iff score_chosen > score_rejected; equal scores are ties.
EvalReport judge_accuracy(const std::vector<JudgeVerdict>& verdicts,
                          const CategoryById& categories, TiePolicy policy);

struct MetaCritiqueScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t n_candidate_units = 0;
  std::size_t n_reference_units = 0;
};

struct UnitJudgment {
  std::string unit;
  bool flag = false;  // supported (candidate) / covered (reference)
};

// precision = supported/|candidate| (0 when no candidates, flagged via
// n_candidate_units); recall = covered/|reference|; f1 = 0 when p+r = 0,
// else their harmonic mean.
MetaCritiqueScore metacritique(const std::vector<UnitJudgment>& candidate_units,
                               const std::vector<UnitJudgment>& reference_units);

struct MetaAggregate {
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  double mean_f1 = 0.0;  // mean of per-example F1, not HM of the means
  std::size_t n_examples = 0;
};

MetaAggregate aggregate_metacritique(const std::vector<MetaCritiqueScore>& scores);

// Per-critique unit judgments: candidate units of one generated critique
// scored for factual support, reference units scored for coverage.
struct ExampleUnits {
  std::string example_id;
  std::string generator;
  std::vector<UnitJudgment> candidate;  // flag = supported
  std::vector<UnitJudgment> reference;  // flag = covered
};

// Unit extraction is delegated: any producer of ExampleUnits plugs in
// here. The fixture-file implementation is the reference one.
class UnitExtractor {
 public:
  virtual ~UnitExtractor() = default;
  virtual std::vector<ExampleUnits> extract_all() = 0;
};

// Reads unit judgments from JSONL: {"example_id", "generator",
// "candidate": [{"unit", "supported"}], "reference": [{"unit", "covered"}]}.
class FixtureUnitExtractor : public UnitExtractor {
 public:
  static FixtureUnitExtractor load(const std::string& path);
  std::vector<ExampleUnits> extract_all() override { return units_; }

 private:
  std::vector<ExampleUnits> units_;
};

// Per-example metacritique scores aggregated per generator.
std::map<std::string, MetaAggregate> metacritique_by_generator(
    const std::vector<ExampleUnits>& units);

std::string metacritique_csv(const std::map<std::string, MetaAggregate>& by_generator);

nlohmann::json to_json(const JudgeVerdict& v);
JudgeVerdict verdict_from_json(const nlohmann::json& j);
std::vector<JudgeVerdict> load_verdicts(const std::string& path);
void save_verdicts(const std::string& path, const std::vector<JudgeVerdict>& verdicts);

}  // namespace crm
