// SPDX-License-Identifier: Apache-2.0
#include "critique_rm/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "critique_rm/jsonl.hpp"
#include "critique_rm/rng.hpp"

namespace crm {

namespace {

constexpr std::size_t kVariantsPerPhrase = 4;
constexpr std::size_t kAppealBudget = 8;
constexpr std::size_t kAppealCountHigh = 6;
constexpr std::size_t kAppealCountLow = 1;
constexpr std::size_t kBaseLen = 28;
constexpr std::size_t kLongLen = 44;
constexpr double kQualityJitter = 0.3;

// Scaffolds are shared between polarities so only the slot word carries
// the aspect judgment; four variants per polarity spread that signal.
struct AspectBank {
  const char* prefix;
  const char* suffix;
  std::array<const char*, kVariantsPerPhrase> positive;
  std::array<const char*, kVariantsPerPhrase> negative;
};

const std::array<AspectBank, kNumAspects>& aspect_bank() {
  static const std::array<AspectBank, kNumAspects> bank = {{
      {"The response handles the instructions ",
       ".",
       {"faithfully", "precisely", "carefully", "thoroughly"},
       {"poorly", "carelessly", "loosely", "wrongly"}},
      {"The factual claims are ",
       ".",
       {"accurate", "correct", "sound", "verified"},
       {"inaccurate", "wrong", "unsound", "fabricated"}},
      {"Overall the answer is ",
       " for the user.",
       {"helpful", "useful", "valuable", "effective"},
       {"unhelpful", "useless", "confusing", "misleading"}},
  }};
  return bank;
}

std::string synth_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "synth-%06zu", i);
  return buf;
}

struct SideDraw {
  int q = 0;  // positive aspect count
  std::array<bool, kNumAspects> aspects{};
  double latent = 0.0;
};

std::array<bool, kNumAspects> draw_aspect_set(DetRng& rng, int positives) {
  std::vector<int> idx(kNumAspects);
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  std::array<bool, kNumAspects> out{};
  for (int k = 0; k < positives; ++k) out[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = true;
  return out;
}

std::string render_completion(DetRng& rng, const SynthSpec& spec, std::size_t quality_count,
                              std::size_t appeal_count, std::size_t appeal_vocab,
                              std::size_t filler_vocab, bool longer) {
  const std::size_t target = longer ? kLongLen : kBaseLen;
  const std::size_t planted = quality_count + appeal_count;
  const std::size_t filler_count = target > planted ? target - planted : 0;

  std::vector<std::string> tokens;
  tokens.reserve(planted + filler_count);
  for (std::size_t k = 0; k < quality_count; ++k) {
    tokens.push_back(kQualityTokenPrefix +
                     std::to_string(rng.next_below(spec.quality_tokens)));
  }
  for (std::size_t k = 0; k < appeal_count; ++k) {
    tokens.push_back(kAppealTokenPrefix + std::to_string(rng.next_below(appeal_vocab)));
  }
  for (std::size_t k = 0; k < filler_count; ++k) {
    tokens.push_back(kFillerTokenPrefix + std::to_string(rng.next_below(filler_vocab)));
  }
  rng.shuffle(tokens);

  std::ostringstream os;
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (k > 0) os << ' ';
    os << tokens[k];
  }
  return os.str();
}

}  // namespace

void SynthSpec::validate() const {
  if (vocab_size <= quality_tokens) {
    throw SchemaViolationError("vocab_size", "must exceed quality_tokens");
  }
  if (quality_tokens == 0) throw SchemaViolationError("quality_tokens", "must be > 0");
  if (length_bias < 0.0 || length_bias > 1.0) {
    throw SchemaViolationError("length_bias", "must be in [0, 1]");
  }
  if (adversarial_fraction < 0.0 || adversarial_fraction > 1.0) {
    throw SchemaViolationError("adversarial_fraction", "must be in [0, 1]");
  }
}

const GroundTruth* SynthDataset::truth_for(const std::string& id) const {
  if (index_.empty() && !truth.empty()) {
    for (std::size_t i = 0; i < truth.size(); ++i) index_[truth[i].id] = i;
  }
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &truth[it->second];
}

SynthDataset gen_dataset(const SynthSpec& spec) {
  spec.validate();
  SynthDataset out;
  if (spec.n_examples == 0) return out;

  const std::size_t surplus = spec.vocab_size - spec.quality_tokens;
  const std::size_t appeal_vocab = surplus >= 3 ? std::min(kAppealBudget, surplus / 3) : 0;
  const std::size_t filler_vocab = surplus - appeal_vocab;

  std::vector<double> gaps(spec.n_examples);
  for (std::size_t i = 0; i < spec.n_examples; ++i) {
    const std::string id = synth_id(i);
    DetRng rng(derive_seed(spec.seed, "example-" + id));

    SideDraw rejected, chosen;
    rejected.q = static_cast<int>(rng.next_below(kNumAspects));
    chosen.q = rejected.q + 1 +
               static_cast<int>(rng.next_below(static_cast<std::uint64_t>(kNumAspects - rejected.q)));
    chosen.aspects = draw_aspect_set(rng, chosen.q);
    rejected.aspects = draw_aspect_set(rng, rejected.q);
    chosen.latent = chosen.q + kQualityJitter * rng.next_unit();
    rejected.latent = rejected.q + kQualityJitter * rng.next_unit();

    const bool rejected_longer = rng.next_bernoulli(spec.length_bias);
    // Exact adversarial count by construction: floor((i+1)f) - floor(if).
    const double f = spec.adversarial_fraction;
    const bool adversarial =
        std::floor(static_cast<double>(i + 1) * f) - std::floor(static_cast<double>(i) * f) >= 1.0;

    const std::size_t chosen_quality = 2 * static_cast<std::size_t>(chosen.q) + 1;
    const std::size_t rejected_quality = 2 * static_cast<std::size_t>(rejected.q) + 1;
    std::size_t chosen_appeal = adversarial ? kAppealCountLow : kAppealCountHigh;
    std::size_t rejected_appeal = adversarial ? kAppealCountHigh : kAppealCountLow;
    if (appeal_vocab == 0) chosen_appeal = rejected_appeal = 0;

    PreferenceExample ex;
    ex.id = id;
    const std::string topic = kFillerTokenPrefix + std::to_string(rng.next_below(filler_vocab));
    ex.prompt.push_back({Role::kUser, "Write a short note about " + topic + "."});
    ex.chosen = render_completion(rng, spec, chosen_quality, chosen_appeal, appeal_vocab,
                                  filler_vocab, !rejected_longer);
    ex.rejected = render_completion(rng, spec, rejected_quality, rejected_appeal, appeal_vocab,
                                    filler_vocab, rejected_longer);
    ex.category = adversarial ? kCategoryAdversarial : kCategoryEasy;

    GroundTruth gt;
    gt.id = id;
    gt.quality_chosen = chosen.latent;
    gt.quality_rejected = rejected.latent;
    gt.aspects_chosen = chosen.aspects;
    gt.aspects_rejected = rejected.aspects;

    gaps[i] = chosen.latent - rejected.latent;
    out.examples.push_back(std::move(ex));
    out.truth.push_back(std::move(gt));
  }

  // Ratings from tertiles of the latent quality gap (nearest rank).
  std::vector<double> sorted_gaps = gaps;
  std::sort(sorted_gaps.begin(), sorted_gaps.end());
  auto quantile = [&](double q) {
    const std::size_t n = sorted_gaps.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    if (rank > 0) --rank;
    return sorted_gaps[std::min(rank, n - 1)];
  };
  const double g33 = quantile(1.0 / 3.0);
  const double g67 = quantile(2.0 / 3.0);
  for (std::size_t i = 0; i < spec.n_examples; ++i) {
    if (gaps[i] <= g33) {
      out.examples[i].rating = Rating::kSlightlyBetter;
    } else if (gaps[i] <= g67) {
      out.examples[i].rating = Rating::kBetter;
    } else {
      out.examples[i].rating = Rating::kSignificantlyBetter;
    }
  }
  return out;
}

std::string OracleCritic::generator_name() const {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "oracle-f%.6g", fidelity);
  return buf;
}

Critique oracle_critique(const PreferenceExample& example, Side side, const OracleCritic& critic,
                         const SynthDataset& dataset) {
  const GroundTruth* gt = dataset.truth_for(example.id);
  if (gt == nullptr) throw ForeignExampleError(example.id);
  const auto& truth_aspects = side == Side::kChosen ? gt->aspects_chosen : gt->aspects_rejected;

  DetRng rng(derive_seed(critic.seed, example.id + "|" + to_string(side)));
  std::ostringstream text;
  const auto& bank = aspect_bank();
  for (int k = 0; k < kNumAspects; ++k) {
    const bool keep = rng.next_bernoulli(critic.fidelity);
    const bool emitted = keep == truth_aspects[static_cast<std::size_t>(k)];
    const std::size_t variant = rng.next_below(kVariantsPerPhrase);
    const auto& entry = bank[static_cast<std::size_t>(k)];
    const char* word = emitted ? entry.positive[variant] : entry.negative[variant];
    if (k > 0) text << ' ';
    text << entry.prefix << word << entry.suffix;
  }

  Critique c;
  c.example_id = example.id;
  c.side = side;
  c.text = text.str();
  c.generator = critic.generator_name();
  c.template_version = kAspectBankVersion;
  return c;
}

CritiqueStore oracle_critique_all(const SynthDataset& dataset, const OracleCritic& critic) {
  CritiqueStore store;
  for (const auto& ex : dataset.examples) {
    store.insert(oracle_critique(ex, Side::kChosen, critic, dataset));
    store.insert(oracle_critique(ex, Side::kRejected, critic, dataset));
  }
  return store;
}

std::array<bool, kNumAspects> parse_aspect_polarities(const std::string& text) {
  std::array<bool, kNumAspects> out{};
  const auto& bank = aspect_bank();
  for (std::size_t k = 0; k < kNumAspects; ++k) {
    bool found = false;
    for (std::size_t v = 0; v < kVariantsPerPhrase && !found; ++v) {
      if (text.find(std::string(" ") + bank[k].positive[v] + bank[k].suffix) !=
          std::string::npos) {
        out[k] = true;
        found = true;
      } else if (text.find(std::string(" ") + bank[k].negative[v] + bank[k].suffix) !=
                 std::string::npos) {
        out[k] = false;
        found = true;
      }
    }
    if (!found) {
      throw std::runtime_error("no aspect sentence found for " + std::string(kAspectNames[k]));
    }
  }
  return out;
}

void save_truth(const std::string& path, const SynthDataset& dataset) {
  std::vector<nlohmann::json> rows;
  rows.reserve(dataset.truth.size());
  for (const auto& gt : dataset.truth) {
    rows.push_back({{"id", gt.id},
                    {"quality_chosen", gt.quality_chosen},
                    {"quality_rejected", gt.quality_rejected},
                    {"aspects",
                     {{"chosen", std::vector<bool>(gt.aspects_chosen.begin(), gt.aspects_chosen.end())},
                      {"rejected",
                       std::vector<bool>(gt.aspects_rejected.begin(), gt.aspects_rejected.end())}}}});
  }
  write_jsonl(path, rows);
}

std::vector<GroundTruth> load_truth(const std::string& path) {
  std::vector<GroundTruth> out;
  for_each_jsonl_line(path, [&](std::size_t, const nlohmann::json& j) {
    GroundTruth gt;
    gt.id = j.at("id").get<std::string>();
    gt.quality_chosen = j.at("quality_chosen").get<double>();
    gt.quality_rejected = j.at("quality_rejected").get<double>();
    auto chosen = j.at("aspects").at("chosen").get<std::vector<bool>>();
    auto rejected = j.at("aspects").at("rejected").get<std::vector<bool>>();
    if (chosen.size() != kNumAspects || rejected.size() != kNumAspects) {
      throw SchemaViolationError("aspects", "expected " + std::to_string(kNumAspects) +
                                                " aspect flags per side");
    }
    std::copy(chosen.begin(), chosen.end(), gt.aspects_chosen.begin());
    std::copy(rejected.begin(), rejected.end(), gt.aspects_rejected.begin());
    out.push_back(std::move(gt));
  });
  return out;
}

}  // namespace crm
