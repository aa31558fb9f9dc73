// SPDX-License-Identifier: Apache-2.0
#include "critique_rm/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "critique_rm/rng.hpp"

namespace crm {

const char* to_string(TiePolicy policy) {
  return policy == TiePolicy::kTieIncorrect ? "tie_incorrect" : "tie_half_credit";
}

TiePolicy tie_policy_from_string(const std::string& s) {
  if (s == "tie_incorrect") return TiePolicy::kTieIncorrect;
  if (s == "tie_half_credit") return TiePolicy::kTieHalfCredit;
  throw SchemaViolationError("tie_policy", "unknown tie policy '" + s + "'");
}

double category_accuracy(const CategoryStats& stats, TiePolicy policy) {
  if (stats.n == 0) return 0.0;
  double credit = static_cast<double>(stats.correct);
  if (policy == TiePolicy::kTieHalfCredit) credit += 0.5 * static_cast<double>(stats.ties);
  return credit / static_cast<double>(stats.n);
}

double avg_score_of(const std::vector<double>& category_accuracies) {
  if (category_accuracies.empty()) return 0.0;
  const double sum =
      std::accumulate(category_accuracies.begin(), category_accuracies.end(), 0.0);
  return sum / static_cast<double>(category_accuracies.size());
}

std::pair<double, double> score_pair(const ScorerParams& params, const Tokenizer& tokenizer,
                                     const AugmentedPair& pair) {
  const double rc = forward(params, tokenizer.encode(pair.text_chosen));
  const double rr = forward(params, tokenizer.encode(pair.text_rejected));
  if (!std::isfinite(rc) || !std::isfinite(rr)) throw NonFiniteError("score_pair");
  return {rc, rr};
}

CategoryById categories_of(const std::vector<PreferenceExample>& dataset) {
  CategoryById out;
  for (const auto& ex : dataset) {
    if (ex.category) out[ex.id] = *ex.category;
  }
  return out;
}

EvalReport accuracy(const ScorerParams& params, const Tokenizer& tokenizer,
                    const std::vector<AugmentedPair>& pairs, const CategoryById& categories,
                    TiePolicy policy) {
  if (pairs.empty()) throw EmptyDatasetError();
  EvalReport report;
  report.tie_policy = policy;
  report.model_digest = params.digest();
  for (const auto& pair : pairs) {
    auto [rc, rr] = score_pair(params, tokenizer, pair);
    auto cat_it = categories.find(pair.example_id);
    const std::string cat = cat_it == categories.end() ? "uncategorized" : cat_it->second;
    CategoryStats& stats = report.categories[cat];
    stats.n++;
    report.overall.n++;
    if (rc > rr) {
      stats.correct++;
      report.overall.correct++;
    } else if (rc == rr) {
      stats.ties++;
      report.overall.ties++;
    }
    if (pair.critique_generator != "none") report.critique_generator = pair.critique_generator;
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

nlohmann::json EvalReport::to_json() const {
  auto stats_json = [](const CategoryStats& s) {
    return nlohmann::json{
        {"n", s.n}, {"correct", s.correct}, {"ties", s.ties}, {"accuracy", s.accuracy}};
  };
  nlohmann::json cats = nlohmann::json::object();
  for (const auto& [name, stats] : categories) cats[name] = stats_json(stats);
  return {{"categories", std::move(cats)},
          {"overall", stats_json(overall)},
          {"avg_score", avg_score},
          {"tie_policy", crm::to_string(tie_policy)},
          {"model_digest", model_digest},
          {"critique_generator", critique_generator},
          {"dataset_digest", dataset_digest}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  auto stats_from = [](const nlohmann::json& s) {
    CategoryStats out;
    out.n = s.at("n").get<std::size_t>();
    out.correct = s.at("correct").get<std::size_t>();
    out.ties = s.at("ties").get<std::size_t>();
    out.accuracy = s.at("accuracy").get<double>();
    return out;
  };
  EvalReport report;
  for (const auto& [name, stats] : j.at("categories").items()) {
    report.categories[name] = stats_from(stats);
  }
  report.overall = stats_from(j.at("overall"));
  report.avg_score = j.at("avg_score").get<double>();
  report.tie_policy = tie_policy_from_string(j.at("tie_policy").get<std::string>());
  report.model_digest = j.at("model_digest").get<std::string>();
  report.critique_generator = j.at("critique_generator").get<std::string>();
  report.dataset_digest = j.value("dataset_digest", "");
  return report;
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "category,n,correct,ties,accuracy\n";
  for (const auto& [name, stats] : categories) {
    os << name << ',' << stats.n << ',' << stats.correct << ',' << stats.ties << ','
       << stats.accuracy << '\n';
  }
  os << "overall," << overall.n << ',' << overall.correct << ',' << overall.ties << ','
     << overall.accuracy << '\n';
  os << "avg_score,,,," << avg_score << '\n';
  return os.str();
}

namespace {

std::vector<std::size_t> seeded_prefix_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  DetRng rng(derive_seed(seed, "scaling-prefix"));
  rng.shuffle(order);
  return order;
}

}  // namespace

std::string ScalingTable::to_csv() const {
  // Union of category names across cells, for stable wide columns.
  std::vector<std::string> cats;
  for (const auto& cell : cells) {
    for (const auto& [name, stats] : cell.report.categories) {
      if (std::find(cats.begin(), cats.end(), name) == cats.end()) cats.push_back(name);
    }
  }
  std::sort(cats.begin(), cats.end());

  std::ostringstream os;
  os.precision(17);
  os << "size,mode,seed";
  for (const auto& c : cats) os << ",acc_" << c;
  os << ",avg_score,error\n";
  for (const auto& cell : cells) {
    os << cell.size << ',' << cell.mode << ',' << cell.seed;
    for (const auto& c : cats) {
      auto it = cell.report.categories.find(c);
      os << ',';
      if (it != cell.report.categories.end()) os << it->second.accuracy;
    }
    os << ',' << cell.report.avg_score << ',' << (cell.failed ? cell.error : "") << '\n';
  }
  return os.str();
}

std::vector<std::pair<std::size_t, double>> ScalingTable::mean_curve(
    const std::string& mode) const {
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  for (const auto& cell : cells) {
    if (cell.mode != mode || cell.failed) continue;
    acc[cell.size].first += cell.report.avg_score;
    acc[cell.size].second++;
  }
  std::vector<std::pair<std::size_t, double>> curve;
  for (const auto& [size, sum_count] : acc) {
    curve.emplace_back(size, sum_count.first / static_cast<double>(sum_count.second));
  }
  return curve;
}

ScalingTable scaling_study(const ScalingInputs& inputs,
                           const std::function<void(const ScalingCell&)>& on_cell) {
  if (inputs.train == nullptr || inputs.test == nullptr) {
    throw TrainConfigError("scaling_study requires train and test sets");
  }
  if (!std::is_sorted(inputs.sizes.begin(), inputs.sizes.end())) {
    throw TrainConfigError("scaling sizes must be ascending");
  }
  if (!inputs.sizes.empty() && inputs.sizes.back() > inputs.train->size()) {
    throw TrainConfigError("scaling size exceeds training set size");
  }
  for (const auto& mode : inputs.modes) {
    if (mode.use_critiques &&
        (inputs.train_critiques == nullptr || inputs.test_critiques == nullptr)) {
      throw TrainConfigError("mode '" + mode.name + "' needs critique stores");
    }
  }

  const CategoryById test_categories = categories_of(*inputs.test);
  ScalingTable table;
  for (std::uint64_t seed : inputs.seeds) {
    const auto order = seeded_prefix_order(inputs.train->size(), seed);
    for (std::size_t size : inputs.sizes) {
      std::vector<PreferenceExample> subset;
      subset.reserve(size);
      for (std::size_t k = 0; k < size; ++k) subset.push_back((*inputs.train)[order[k]]);

      for (const auto& mode : inputs.modes) {
        ScalingCell cell;
        cell.size = size;
        cell.mode = mode.name;
        cell.seed = seed;
        try {
          const CritiqueStore* train_store = mode.use_critiques ? inputs.train_critiques : nullptr;
          const CritiqueStore* test_store = mode.use_critiques ? inputs.test_critiques : nullptr;
          auto train_pairs =
              render_dataset(subset, train_store, inputs.role_template, inputs.margins);
          auto test_pairs =
              render_dataset(*inputs.test, test_store, inputs.role_template, inputs.margins);

          std::vector<std::string> corpus;
          corpus.reserve(train_pairs.size() * 2);
          for (const auto& p : train_pairs) {
            corpus.push_back(p.text_chosen);
            corpus.push_back(p.text_rejected);
          }
          Tokenizer tokenizer = Tokenizer::build(corpus, inputs.scorer.vocab_cap,
                                                 inputs.scorer.max_len, inputs.scorer.truncation);

          TrainConfig config = inputs.config;
          config.seed = seed;
          config.margins = inputs.margins;
          ScorerHyper hyper{inputs.scorer.d, inputs.scorer.L, seed};
          TrainResult trained = train(train_pairs, config, tokenizer, hyper);
          cell.report =
              accuracy(trained.params, tokenizer, test_pairs, test_categories, inputs.tie_policy);
        } catch (const std::exception& e) {
          cell.failed = true;
          cell.error = e.what();
        }
        if (on_cell) on_cell(cell);
        table.cells.push_back(std::move(cell));
      }
    }
  }
  return table;
}

}  // namespace crm
