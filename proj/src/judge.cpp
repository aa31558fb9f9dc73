// SPDX-License-Identifier: Apache-2.0
#include "critique_rm/judge.hpp"

#include <cctype>
#include <regex>
#include <sstream>

#include "critique_rm/augment.hpp"
#include "critique_rm/jsonl.hpp"

namespace crm {

namespace {

constexpr const char* kScoringInstruction =
    "Please rate the last response on a Likert scale from 0 to 10, where 10 is best. "
    "Reply with a single integer score.";

}  // namespace

int parse_likert_score(const std::string& reply) {
  static const std::regex out_of_ten(R"((\d+)\s*/\s*10)");
  std::smatch m;
  if (std::regex_search(reply, m, out_of_ten)) {
    const std::string digits = m[1].str();
    if (digits.size() <= 2) {
      const int value = std::stoi(digits);
      if (value >= 0 && value <= 10) return value;
    }
  }
  // First standalone integer token in range.
  for (std::size_t i = 0; i < reply.size();) {
    if (std::isdigit(static_cast<unsigned char>(reply[i]))) {
      std::size_t j = i;
      while (j < reply.size() && std::isdigit(static_cast<unsigned char>(reply[j]))) ++j;
      if (j - i <= 2) {
        const int value = std::stoi(reply.substr(i, j - i));
        if (value >= 0 && value <= 10) return value;
      }
      i = j;
    } else {
      ++i;
    }
  }
  throw UnparseableScoreError(reply);
}

std::string render_judge_prompt(const std::vector<Message>& prompt,
                                const std::string& completion) {
  if (completion.empty()) throw EmptyCompletionError();
  std::vector<Message> conversation = prompt;
  conversation.push_back({Role::kChatbot, completion});
  return serialize_conversation(conversation) + "\n\n" + kScoringInstruction;
}

namespace {

std::pair<int, std::string> judge_side(const PreferenceExample& example,
                                       const std::string& completion, CriticBackend& backend,
                                       bool with_critique, const Decoding& decoding) {
  std::string reply;
  if (with_critique) {
    const std::string critique_prompt = render_critique_prompt(example.prompt, completion);
    const std::string critique = backend.complete({{Role::kUser, critique_prompt}}, decoding);
    reply = backend.complete({{Role::kUser, critique_prompt},
                              {Role::kChatbot, critique},
                              {Role::kUser, kScoringInstruction}},
                             decoding);
  } else {
    reply = backend.complete({{Role::kUser, render_judge_prompt(example.prompt, completion)}},
                             decoding);
  }
  return {parse_likert_score(reply), reply};
}

}  // namespace

JudgeVerdict judge_pair(const PreferenceExample& example, CriticBackend& backend,
                        bool with_critique, const Decoding& decoding) {
  JudgeVerdict v;
  v.example_id = example.id;
  v.with_critique = with_critique;
  auto [sc, raw_c] = judge_side(example, example.chosen, backend, with_critique, decoding);
  auto [sr, raw_r] = judge_side(example, example.rejected, backend, with_critique, decoding);
  v.score_chosen = sc;
  v.score_rejected = sr;
  v.raw_chosen = std::move(raw_c);
  v.raw_rejected = std::move(raw_r);
  return v;
}

EvalReport judge_accuracy(const std::vector<JudgeVerdict>& verdicts,
                          const CategoryById& categories, TiePolicy policy) {
  if (verdicts.empty()) throw EmptyDatasetError();
  EvalReport report;
  report.tie_policy = policy;
  report.model_digest = "generative-judge";
  for (const auto& v : verdicts) {
    auto it = categories.find(v.example_id);
    const std::string cat = it == categories.end() ? "uncategorized" : it->second;
    CategoryStats& stats = report.categories[cat];
    stats.n++;
    report.overall.n++;
    if (v.score_chosen > v.score_rejected) {
      stats.correct++;
      report.overall.correct++;
    } else if (v.score_chosen == v.score_rejected) {
      stats.ties++;
      report.overall.ties++;
    }
  }
  std::vector<double> cat_accs;
  for (auto& [name, stats] : report.categories) {
    stats.accuracy = category_accuracy(stats, policy);
    cat_accs.push_back(stats.accuracy);
  }
  report.overall.accuracy = category_accuracy(report.overall, policy);
  report.avg_score = avg_score_of(cat_accs);
  return report;
}

MetaCritiqueScore metacritique(const std::vector<UnitJudgment>& candidate_units,
                               const std::vector<UnitJudgment>& reference_units) {
  if (candidate_units.empty() && reference_units.empty()) throw BothEmptyError();
  MetaCritiqueScore score;
  score.n_candidate_units = candidate_units.size();
  score.n_reference_units = reference_units.size();
  if (!candidate_units.empty()) {
    std::size_t supported = 0;
    for (const auto& u : candidate_units) supported += u.flag ? 1 : 0;
    score.precision =
        static_cast<double>(supported) / static_cast<double>(candidate_units.size());
  }
  if (!reference_units.empty()) {
    std::size_t covered = 0;
    for (const auto& u : reference_units) covered += u.flag ? 1 : 0;
    score.recall = static_cast<double>(covered) / static_cast<double>(reference_units.size());
  }
  const double pr = score.precision + score.recall;
  score.f1 = pr == 0.0 ? 0.0 : 2.0 * score.precision * score.recall / pr;
  return score;
}

MetaAggregate aggregate_metacritique(const std::vector<MetaCritiqueScore>& scores) {
  MetaAggregate agg;
  agg.n_examples = scores.size();
  if (scores.empty()) return agg;
  for (const auto& s : scores) {
    agg.mean_precision += s.precision;
    agg.mean_recall += s.recall;
    agg.mean_f1 += s.f1;
  }
  const double n = static_cast<double>(scores.size());
  agg.mean_precision /= n;
  agg.mean_recall /= n;
  agg.mean_f1 /= n;
  return agg;
}

FixtureUnitExtractor FixtureUnitExtractor::load(const std::string& path) {
  FixtureUnitExtractor extractor;
  for_each_jsonl_line(path, [&](std::size_t, const nlohmann::json& j) {
    ExampleUnits units;
    units.example_id = j.at("example_id").get<std::string>();
    units.generator = j.at("generator").get<std::string>();
    for (const auto& u : j.at("candidate")) {
      units.candidate.push_back({u.at("unit").get<std::string>(), u.at("supported").get<bool>()});
    }
    for (const auto& u : j.at("reference")) {
      units.reference.push_back({u.at("unit").get<std::string>(), u.at("covered").get<bool>()});
    }
    extractor.units_.push_back(std::move(units));
  });
  return extractor;
}

std::map<std::string, MetaAggregate> metacritique_by_generator(
    const std::vector<ExampleUnits>& units) {
  std::map<std::string, std::vector<MetaCritiqueScore>> scores;
  for (const auto& u : units) {
    scores[u.generator].push_back(metacritique(u.candidate, u.reference));
  }
  std::map<std::string, MetaAggregate> out;
  for (const auto& [generator, per_example] : scores) {
    out[generator] = aggregate_metacritique(per_example);
  }
  return out;
}

std::string metacritique_csv(const std::map<std::string, MetaAggregate>& by_generator) {
  std::ostringstream os;
  os.precision(17);
  os << "generator,n_examples,mean_precision,mean_recall,mean_f1\n";
  for (const auto& [generator, agg] : by_generator) {
    os << generator << ',' << agg.n_examples << ',' << agg.mean_precision << ','
       << agg.mean_recall << ',' << agg.mean_f1 << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const JudgeVerdict& v) {
  return {{"example_id", v.example_id},
          {"score_chosen", v.score_chosen},
          {"score_rejected", v.score_rejected},
          {"with_critique", v.with_critique},
          {"raw_chosen", v.raw_chosen},
          {"raw_rejected", v.raw_rejected}};
}

JudgeVerdict verdict_from_json(const nlohmann::json& j) {
  JudgeVerdict v;
  v.example_id = j.at("example_id").get<std::string>();
  v.score_chosen = j.at("score_chosen").get<int>();
  v.score_rejected = j.at("score_rejected").get<int>();
  v.with_critique = j.at("with_critique").get<bool>();
  v.raw_chosen = j.value("raw_chosen", "");
  v.raw_rejected = j.value("raw_rejected", "");
  if (v.score_chosen < 0 || v.score_chosen > 10 || v.score_rejected < 0 ||
      v.score_rejected > 10) {
    throw SchemaViolationError("score_chosen", "judge scores must be in [0, 10]");
  }
  return v;
}

std::vector<JudgeVerdict> load_verdicts(const std::string& path) {
  std::vector<JudgeVerdict> out;
  for_each_jsonl_line(path, [&](std::size_t, const nlohmann::json& j) {
    out.push_back(verdict_from_json(j));
  });
  return out;
}

void save_verdicts(const std::string& path, const std::vector<JudgeVerdict>& verdicts) {
  std::vector<nlohmann::json> rows;
  rows.reserve(verdicts.size());
  for (const auto& v : verdicts) rows.push_back(to_json(v));
  write_jsonl(path, rows);
}

}  // namespace crm
