// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one check per shipped guarantee, one PASS/FAIL line
// each. Run all criteria or a subset:
//
//   acceptance_suite [--cli <path-to-critique_rm>] [--criteria 1,2,5]
//
// Criterion 10 drives the CLI binary end to end and needs --cli.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "critique_rm/augment.hpp"
#include "critique_rm/critic_client.hpp"
#include "critique_rm/evalharness.hpp"
#include "critique_rm/judge.hpp"
#include "critique_rm/jsonl.hpp"
#include "critique_rm/manifest.hpp"
#include "critique_rm/metrics_report.hpp"
#include "critique_rm/prefdata.hpp"
#include "critique_rm/rng.hpp"
#include "critique_rm/scorer.hpp"
#include "critique_rm/synthbench.hpp"
#include "critique_rm/trainer.hpp"

namespace fs = std::filesystem;
using namespace crm;

namespace {

struct CheckFailure : std::runtime_error {
  explicit CheckFailure(const std::string& why) : std::runtime_error(why) {}
};

void require(bool ok, const std::string& why) {
  if (!ok) throw CheckFailure(why);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// High-precision oracle value of softplus(-5/3) (mpmath, 40 digits).
constexpr double kSoftplusMinusFiveThirds = 0.1730079888858390784380473333341588217472;

// ---------------------------------------------------------------------- 1
void criterion_1_loss_units() {
  const auto start = std::chrono::steady_clock::now();
  require(std::abs(ranking_loss(0.0, 0.0, 0.0) - std::log(2.0)) < 1e-12,
          "ranking_loss(0,0,0) != ln 2 within 1e-12");
  require(std::abs(ranking_loss(2.0, 0.0, 1.0 / 3.0) - kSoftplusMinusFiveThirds) < 1e-9,
          "ranking_loss(2,0,1/3) != softplus(-5/3) within 1e-9");

  DetRng rng(11);
  std::size_t violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const double rc = rng.next_normal(0.0, 4.0);
    const double rr = rng.next_normal(0.0, 4.0);
    const double m = rng.next_unit() * 2.0;
    const double bump = 1e-3 + rng.next_unit();
    if (!(ranking_loss(rc + bump, rr, m) < ranking_loss(rc, rr, m))) ++violations;
    if (!(ranking_loss(rc, rr, m + bump) > ranking_loss(rc, rr, m))) ++violations;
    if (!(ranking_loss(rc, rr, m) > 0.0)) ++violations;
  }
  require(violations == 0, std::to_string(violations) + " monotonicity violations in 10^4 triples");
  require(seconds_since(start) < 1.0, "loss unit suite exceeded 1s");
}

// ---------------------------------------------------------------------- 2
double batch_loss_via_forward(const ScorerParams& params, std::span<const PairItem> batch) {
  double sum = 0.0;
  for (const auto& item : batch) {
    sum += ranking_loss(forward(params, item.ids_chosen), forward(params, item.ids_rejected),
                        item.margin);
  }
  return sum / static_cast<double>(batch.size());
}

void criterion_2_gradients() {
  const auto start = std::chrono::steady_clock::now();
  DetRng meta(998877);
  double worst = 0.0;
  for (int config = 0; config < 20; ++config) {
    const int d = 2 + static_cast<int>(meta.next_below(15));
    const int L = static_cast<int>(meta.next_below(3));
    const std::size_t vocab = 5 + meta.next_below(195);
    ScorerParams params = init_params(vocab, {d, L, meta.next_u64()});
    DetRng rng(meta.next_u64());
    params.t.for_each_span([&](std::span<double> s) {
      for (double& v : s) v = rng.next_normal(0.0, 0.5);
    });

    std::vector<std::vector<int>> seqs;
    for (int s = 0; s < 6; ++s) {
      std::vector<int> ids(1 + rng.next_below(10));
      for (auto& id : ids) id = static_cast<int>(rng.next_below(vocab));
      seqs.push_back(std::move(ids));
    }
    std::vector<PairItem> batch;
    for (int i = 0; i < 3; ++i) {
      batch.push_back({seqs[static_cast<std::size_t>(2 * i)],
                       seqs[static_cast<std::size_t>(2 * i + 1)], rng.next_unit()});
    }

    auto analytic = backward(params, batch);
    const double eps = 1e-4;
    for (int probe = 0; probe < 25; ++probe) {
      const std::size_t coord = rng.next_below(params.t.size());
      const double saved = params.t.get_coord(coord);
      params.t.set_coord(coord, saved + eps);
      const double up = batch_loss_via_forward(params, batch);
      params.t.set_coord(coord, saved - eps);
      const double down = batch_loss_via_forward(params, batch);
      params.t.set_coord(coord, saved);
      const double fd = (up - down) / (2.0 * eps);
      const double a = analytic.t.get_coord(coord);
      const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-7});
      worst = std::max(worst, rel);
    }
  }
  require(worst < 1e-4, "max finite-difference relative error " + std::to_string(worst));
  require(seconds_since(start) < 30.0, "gradient check exceeded 30s");
}

// ---------------------------------------------------------------------- 3
void criterion_3_schedule() {
  const double max_lr = 8e-5;
  const std::size_t warmup = 32;
  const std::size_t total = 155;
  require(lr_at(warmup, total, warmup, max_lr, 0.1) == max_lr, "lr_at(warmup) != max_lr exactly");
  require(std::abs(lr_at(total, total, warmup, max_lr, 0.1) - 0.1 * max_lr) < 1e-12,
          "lr_at(total) != 0.1 max_lr within 1e-12");
  // Continuity: warmup-branch and cosine-branch values at the boundary.
  const double warmup_branch = max_lr * static_cast<double>(warmup) / static_cast<double>(warmup);
  const double cosine_branch =
      0.1 * max_lr + (max_lr - 0.1 * max_lr) * 0.5 * (1.0 + std::cos(0.0));
  require(std::abs(warmup_branch - cosine_branch) < 1e-12, "warmup boundary discontinuity");
}

// ---------------------------------------------------------------------- 4
struct TrainRunOutput {
  std::string digest;
  std::vector<double> losses;
};

TrainRunOutput end_to_end_train_run() {
  SynthSpec spec;
  spec.n_examples = 1000;
  spec.length_bias = 0.5;
  spec.adversarial_fraction = 0.2;
  spec.seed = 321;
  auto dataset = gen_dataset(spec);
  OracleCritic critic{0.9, 321};
  auto store = oracle_critique_all(dataset, critic);
  auto pairs = render_dataset(dataset.examples, &store, kDefaultRoleTemplate, MarginMap{});

  std::vector<std::string> corpus;
  for (const auto& p : pairs) {
    corpus.push_back(p.text_chosen);
    corpus.push_back(p.text_rejected);
  }
  auto tokenizer = Tokenizer::build(corpus, 8192, 512, Truncation::kKeepTail);
  TrainConfig config;
  config.epochs = 2;  // 64 steps at n=1000, so the default warmup-32 fits
  config.seed = 7;
  auto result = train(pairs, config, tokenizer, ScorerHyper{64, 2, 7});
  TrainRunOutput out;
  out.digest = result.log.final_params_digest;
  for (const auto& rec : result.log.records) out.losses.push_back(rec.loss);
  return out;
}

void criterion_4_determinism() {
  auto a = end_to_end_train_run();
  auto b = end_to_end_train_run();
  require(a.digest == b.digest, "final parameter digests differ between identical runs");
  require(a.losses == b.losses, "loss logs differ between identical runs");
}

// ---------------------------------------------------------------------- 5
void criterion_5_avg_score() {
  const double avg = avg_score_of({0.3827, 0.7961, 0.6878, 0.8527});
  require(std::abs(avg - 0.679825) < 1e-9,
          "avg_score of the published category accuracies != 0.679825");
}

// ------------------------------------------------------------------- 6, 7
struct ScalingSetup {
  SynthDataset train;
  SynthDataset test;
};

ScalingSetup make_scaling_setup() {
  SynthSpec spec;
  spec.n_examples = 8000;
  spec.length_bias = 0.6;
  spec.adversarial_fraction = 0.2;
  spec.seed = 20250501;
  ScalingSetup setup;
  setup.train = gen_dataset(spec);
  spec.n_examples = 1500;
  spec.seed = 20250502;
  setup.test = gen_dataset(spec);
  return setup;
}

ScalingTable run_scaling(const ScalingSetup& setup, double fidelity,
                         const std::vector<std::size_t>& sizes) {
  OracleCritic critic{fidelity, 777};
  auto train_store = oracle_critique_all(setup.train, critic);
  auto test_store = oracle_critique_all(setup.test, critic);

  ScalingInputs inputs;
  inputs.train = &setup.train.examples;
  inputs.test = &setup.test.examples;
  inputs.train_critiques = &train_store;
  inputs.test_critiques = &test_store;
  inputs.config.batch_size = 32;
  inputs.config.epochs = 3;
  inputs.config.warmup_steps = 16;
  inputs.config.max_lr = 0.02;
  inputs.scorer.d = 64;
  inputs.scorer.L = 2;
  inputs.scorer.max_len = 512;
  inputs.sizes = sizes;
  inputs.seeds = {1, 2, 3, 4, 5};
  inputs.modes = {{"no_critique", false}, {"with_critique", true}};
  return scaling_study(inputs);
}

std::map<std::size_t, double> gap_by_size(const ScalingTable& table) {
  auto no_curve = table.mean_curve("no_critique");
  auto with_curve = table.mean_curve("with_critique");
  std::map<std::size_t, double> gaps;
  for (std::size_t i = 0; i < no_curve.size(); ++i) {
    std::fprintf(stdout,
                 "        n=%-5zu mean avg_score: no_critique %.4f, with_critique %.4f\n",
                 no_curve[i].first, no_curve[i].second, with_curve[i].second);
    gaps[no_curve[i].first] = with_curve[i].second - no_curve[i].second;
  }
  return gaps;
}

void criterion_6_critiques_help_low_data() {
  auto setup = make_scaling_setup();
  auto table = run_scaling(setup, 0.95, {500, 2000, 8000});
  for (const auto& cell : table.cells) {
    require(!cell.failed, "scaling cell failed: " + cell.error);
  }
  auto gaps = gap_by_size(table);
  std::fprintf(stdout,
               "        gap(with - no): n=500 %+0.4f, n=2000 %+0.4f, n=8000 %+0.4f\n",
               gaps.at(500), gaps.at(2000), gaps.at(8000));
  require(gaps.at(500) >= 0.05,
          "mean avg_score gap at n=500 is " + std::to_string(gaps.at(500)) + " (< +0.05)");
  require(gaps.at(8000) < gaps.at(500), "gap at n=8000 not smaller than at n=500");
}

void criterion_7_weak_critiques_hurt() {
  auto setup = make_scaling_setup();
  auto table = run_scaling(setup, 0.3, {500});
  for (const auto& cell : table.cells) {
    require(!cell.failed, "scaling cell failed: " + cell.error);
  }
  auto gaps = gap_by_size(table);
  std::fprintf(stdout, "        gap(with - no) at fidelity 0.3, n=500: %+0.4f\n", gaps.at(500));
  require(gaps.at(500) <= 0.01,
          "weak critiques gap " + std::to_string(gaps.at(500)) + " exceeds +0.01");
}

// ---------------------------------------------------------------------- 8
void criterion_8_tie_accounting() {
  std::vector<PreferenceExample> dataset;
  for (int i = 0; i < 12; ++i) {
    PreferenceExample ex;
    ex.id = "j" + std::to_string(i);
    ex.prompt.push_back({Role::kUser, "Ask " + std::to_string(i)});
    ex.chosen = "good answer " + std::to_string(i);
    ex.rejected = "bad answer " + std::to_string(i);
    dataset.push_back(std::move(ex));
  }

  MockCriticBackend constant;
  constant.set_default_reply("7");
  std::vector<JudgeVerdict> verdicts;
  for (const auto& ex : dataset) verdicts.push_back(judge_pair(ex, constant, false));
  auto tied = judge_accuracy(verdicts, {}, TiePolicy::kTieIncorrect);
  require(tied.overall.accuracy == 0.0, "constant judge accuracy != 0.0 under tie_incorrect");
  require(tied.overall.ties == dataset.size(), "tie count != n");

  MockCriticBackend split;
  split.add_rule("good answer", "8");
  split.add_rule("bad answer", "3");
  verdicts.clear();
  for (const auto& ex : dataset) verdicts.push_back(judge_pair(ex, split, false));
  auto correct = judge_accuracy(verdicts, {}, TiePolicy::kTieIncorrect);
  require(correct.overall.accuracy == 1.0, "distinct-score judge accuracy != 1.0");
  require(correct.overall.ties == 0, "distinct-score judge reported ties");
}

// ---------------------------------------------------------------------- 9
void criterion_9_metacritique() {
  auto equal = metacritique({{"u", true}, {"u", false}}, {{"r", true}, {"r", false}});
  require(equal.precision == 0.5 && equal.recall == 0.5 && equal.f1 == 0.5,
          "HM of equals identity failed");
  auto zero = metacritique({{"u", true}}, {{"r", false}});
  require(zero.f1 == 0.0, "P=1, R=0 must give F1 = 0");
  auto flagged = metacritique({}, {{"r", true}});
  require(flagged.precision == 0.0 && flagged.n_candidate_units == 0,
          "empty candidate list must flag precision 0");

  // Mean-of-per-example-F1 sits below HM(mean P, mean R) on a lopsided
  // fixture, matching the published table's relationship.
  auto a = metacritique({{"u", true}}, {{"r", true}, {"r", false}, {"r", false}, {"r", false},
                                        {"r", false}});
  auto b = metacritique({{"u", true}, {"u", false}, {"u", false}, {"u", false}, {"u", false}},
                        {{"r", true}});
  auto agg = aggregate_metacritique({a, b});
  const double hm = 2.0 * agg.mean_precision * agg.mean_recall /
                    (agg.mean_precision + agg.mean_recall);
  require(agg.mean_f1 < hm, "aggregation is not mean-of-per-example F1");
}

// --------------------------------------------------------------------- 10
struct PipelineContext {
  std::string cli;
};

int run_cmd(const std::string& cmd) {
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

void verify_manifest_link(const std::string& downstream_manifest,
                          const std::set<std::string>& upstream_manifests) {
  // Every input of the downstream manifest that was produced by some
  // upstream manifest must carry that upstream's recorded output digest.
  auto down = RunManifest::load(downstream_manifest);
  std::map<std::string, std::string> produced;
  for (const auto& path : upstream_manifests) {
    auto up = RunManifest::load(path);
    for (const auto& out : up.outputs) produced[out.path] = out.digest;
  }
  for (const auto& input : down.inputs) {
    auto it = produced.find(input.path);
    if (it != produced.end()) {
      require(it->second == input.digest,
              "manifest chain broken at " + input.path + " (digest mismatch)");
    }
  }
}

void criterion_10_pipeline(const PipelineContext& ctx) {
  require(!ctx.cli.empty(), "criterion 10 needs --cli <path>");
  const auto start = std::chrono::steady_clock::now();
  fs::path dir = fs::temp_directory_path() / "critique_rm_acceptance_pipeline";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto at = [&](const std::string& name) { return (dir / name).string(); };
  auto cli = [&](const std::string& args) {
    return run_cmd(ctx.cli + " " + args + " >> " + at("log.txt") + " 2>&1");
  };

  require(cli("synth --n 200 --seed 42 --out " + at("train.jsonl")) == 0, "synth failed");
  require(cli("generate --data " + at("train.jsonl") + " --backend mock --cache-dir " +
              at("cache") + " --out " + at("critiques.jsonl")) == 0,
          "generate failed");
  require(cli("augment --data " + at("train.jsonl") + " --critiques " + at("critiques.jsonl") +
              " --out " + at("augmented.jsonl")) == 0,
          "augment failed");
  require(cli("train --train " + at("augmented.jsonl") + " --out " + at("model.json") +
              " --log " + at("train_log.csv") +
              " --epochs 2 --warmup-steps 4 --batch-size 16 --seed 42") == 0,
          "train failed");
  require(cli("eval --model " + at("model.json") + " --data " + at("augmented.jsonl") +
              " --dataset " + at("train.jsonl") + " --out " + at("report.json")) == 0,
          "eval failed");
  require(cli("report --reports " + at("report.json") + " --out " + at("grid.csv") +
              " --markdown " + at("grid.md")) == 0,
          "report failed");

  for (const char* artifact : {"train.jsonl", "critiques.jsonl", "augmented.jsonl", "model.json",
                               "report.json", "grid.csv"}) {
    require(fs::exists(dir / artifact), std::string("missing artifact ") + artifact);
    require(fs::exists(dir / (std::string(artifact) + ".manifest.json")),
            std::string("missing manifest for ") + artifact);
  }

  const std::set<std::string> all_manifests{
      at("train.jsonl.manifest.json"), at("critiques.jsonl.manifest.json"),
      at("augmented.jsonl.manifest.json"), at("model.json.manifest.json"),
      at("report.json.manifest.json")};
  for (const char* down : {"critiques.jsonl.manifest.json", "augmented.jsonl.manifest.json",
                           "model.json.manifest.json", "report.json.manifest.json",
                           "grid.csv.manifest.json"}) {
    verify_manifest_link(at(down), all_manifests);
  }

  const double elapsed = seconds_since(start);
  require(elapsed < 60.0, "pipeline took " + std::to_string(elapsed) + "s (>= 60s)");
  fs::remove_all(dir);
}

struct Criterion {
  int number;
  const char* label;
  std::function<void()> run;
};

}  // namespace

int main(int argc, char** argv) {
  PipelineContext ctx;
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--cli" && i + 1 < argc) {
      ctx.cli = argv[++i];
    } else if (arg == "--criteria" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) selected.insert(std::stoi(item));
    } else {
      std::fprintf(stderr, "usage: %s [--cli <path>] [--criteria 1,2,...]\n", argv[0]);
      return 2;
    }
  }

  const std::vector<Criterion> criteria{
      {1, "ranking loss values and monotonicity", criterion_1_loss_units},
      {2, "gradient correctness vs finite differences", criterion_2_gradients},
      {3, "warmup-cosine schedule conformance", criterion_3_schedule},
      {4, "end-to-end training determinism", criterion_4_determinism},
      {5, "avg-score aggregation contract", criterion_5_avg_score},
      {6, "critiques help in the low-data regime", criterion_6_critiques_help_low_data},
      {7, "weak critiques do not help", criterion_7_weak_critiques_hurt},
      {8, "generative-judge tie accounting", criterion_8_tie_accounting},
      {9, "metacritique aggregation identities", criterion_9_metacritique},
      {10, "pipeline smoke with cross-linked manifests",
       [&ctx] { criterion_10_pipeline(ctx); }},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    if (!selected.empty() && !selected.count(criterion.number)) continue;
    const auto start = std::chrono::steady_clock::now();
    try {
      criterion.run();
      std::fprintf(stdout, "[PASS] criterion %2d: %s (%.2fs)\n", criterion.number,
                   criterion.label, seconds_since(start));
    } catch (const std::exception& e) {
      ++failures;
      std::fprintf(stdout, "[FAIL] criterion %2d: %s: %s\n", criterion.number, criterion.label,
                   e.what());
    }
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
