// SPDX-License-Identifier: Apache-2.0
//
// critique_rm: preference-data pipeline driver.
//
// Subcommands: synth, generate, augment, train, eval, scale, judge, report.
// Every command writes its primary outputs plus a <output>.manifest.json
// provenance record with input/output digests.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "critique_rm/augment.hpp"
#include "critique_rm/critic_client.hpp"
#include "critique_rm/digest.hpp"
#include "critique_rm/evalharness.hpp"
#include "critique_rm/jsonl.hpp"
#include "critique_rm/judge.hpp"
#include "critique_rm/manifest.hpp"
#include "critique_rm/metrics_report.hpp"
#include "critique_rm/prefdata.hpp"
#include "critique_rm/scorer.hpp"
#include "critique_rm/synthbench.hpp"
#include "critique_rm/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliValidationError : std::runtime_error {
  explicit CliValidationError(const std::string& why) : std::runtime_error(why) {}
};

void ensure_output(const std::string& path, bool force) {
  if (path.empty()) return;
  if (fs::exists(path) && !force) {
    throw CliValidationError("output already exists (use --force to overwrite): " + path);
  }
}

struct SharedArgs {
  std::uint64_t seed = 0;
  bool force = false;
  std::string cache_dir;
};

void add_shared(CLI::App* cmd, SharedArgs& shared) {
  cmd->add_option("--seed", shared.seed, "master seed");
  cmd->add_flag("--force", shared.force, "overwrite existing outputs");
  cmd->add_option("--cache-dir", shared.cache_dir, "critique cache directory");
}

crm::RunManifest start_manifest(const std::string& command, const SharedArgs& shared) {
  crm::RunManifest man;
  man.command = command;
  man.seed = shared.seed;
  man.started_at = crm::iso8601_utc_now();
  return man;
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoull(item));
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoull(item));
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  SharedArgs shared;
  crm::SynthSpec spec;
  std::string out;
  std::string truth_out;
  std::string critiques_out;
  double fidelity = 1.0;
  std::uint64_t oracle_seed = 0;
};

int run_synth(const SynthArgs& args) {
  ensure_output(args.out, args.shared.force);
  ensure_output(args.truth_out, args.shared.force);
  ensure_output(args.critiques_out, args.shared.force);

  crm::SynthSpec spec = args.spec;
  spec.seed = args.shared.seed;
  crm::SynthDataset dataset = crm::gen_dataset(spec);
  crm::save_dataset(args.out, dataset.examples);

  crm::RunManifest man = start_manifest("synth", args.shared);
  man.config = {{"n_examples", spec.n_examples},
                {"vocab_size", spec.vocab_size},
                {"quality_tokens", spec.quality_tokens},
                {"length_bias", spec.length_bias},
                {"adversarial_fraction", spec.adversarial_fraction},
                {"seed", spec.seed}};
  man.add_output(args.out);

  if (!args.truth_out.empty()) {
    crm::save_truth(args.truth_out, dataset);
    man.add_output(args.truth_out);
  }
  if (!args.critiques_out.empty()) {
    crm::OracleCritic critic{args.fidelity, args.oracle_seed};
    crm::CritiqueStore store = crm::oracle_critique_all(dataset, critic);
    store.save(args.critiques_out);
    man.critique_generator = critic.generator_name();
    man.template_versions["critique"] = crm::kAspectBankVersion;
    man.config["fidelity"] = args.fidelity;
    man.config["oracle_seed"] = args.oracle_seed;
    man.add_output(args.critiques_out);
  }
  man.finalize();
  man.save(crm::manifest_path_for(args.out));
  std::fprintf(stdout, "synth: wrote %zu examples to %s\n", dataset.examples.size(),
               args.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateArgs {
  SharedArgs shared;
  std::string data;
  std::string out;
  std::string backend = "mock";
  std::string fixture;
  std::string base_url;
  std::string model = "default";
  std::string api_key;
  double temperature = 0.0;
  int max_tokens = 512;
  int max_in_flight = 4;
};

int run_generate(const GenerateArgs& args) {
  ensure_output(args.out, args.shared.force);

  std::unique_ptr<crm::CriticBackend> backend;
  if (args.backend == "mock") {
    if (!args.fixture.empty()) {
      backend = std::make_unique<crm::MockCriticBackend>(
          crm::MockCriticBackend::from_fixture_file(args.fixture));
    } else {
      backend = std::make_unique<crm::MockCriticBackend>();
    }
  } else if (args.backend == "http") {
    crm::HttpBackendConfig cfg;
    cfg.base_url = args.base_url;
    cfg.model = args.model;
    cfg.api_key = args.api_key;
    if (cfg.base_url.empty()) throw CliValidationError("http backend requires --base-url");
    if (cfg.api_key.empty() && std::getenv(crm::kApiKeyEnvVar) == nullptr) {
      throw CliValidationError(std::string("http backend requires an API key (set ") +
                               crm::kApiKeyEnvVar + " or --api-key)");
    }
    backend = std::make_unique<crm::HttpCriticBackend>(cfg);
  } else {
    throw CliValidationError("unknown backend: " + args.backend);
  }

  auto dataset = crm::load_dataset(args.data);
  crm::Decoding decoding{args.temperature, args.max_tokens};

  std::unique_ptr<crm::CritiqueCache> cache;
  if (!args.shared.cache_dir.empty()) {
    cache = std::make_unique<crm::CritiqueCache>(args.shared.cache_dir);
  }

  auto result = crm::generate_all(dataset, *backend, decoding, cache.get(), args.max_in_flight);
  result.store.save(args.out);

  crm::RunManifest man = start_manifest("generate", args.shared);
  man.config = {{"backend", args.backend},
                {"model", args.model},
                {"temperature", decoding.temperature},
                {"max_tokens", decoding.max_tokens},
                {"max_in_flight", args.max_in_flight}};
  man.critique_generator = backend->name();
  man.template_versions["critique"] = crm::kCritiqueTemplateV1;
  man.add_input(args.data);
  man.add_output(args.out);
  man.finalize();
  man.save(crm::manifest_path_for(args.out));

  std::fprintf(stdout, "generate: %zu critiques (%zu cache hits, %zu new calls, %zu failures)\n",
               result.store.size(), result.report.cache_hits, result.report.backend_calls,
               result.report.failures.size());
  for (const auto& [item, error] : result.report.failures) {
    std::fprintf(stderr, "generate: FAILED %s: %s\n", item.c_str(), error.c_str());
  }
  return result.report.ok() ? 0 : 2;
}

// ---------------------------------------------------------------------------
// augment

struct AugmentArgs {
  SharedArgs shared;
  std::string data;
  std::string critiques;
  std::string out;
  std::string role_template = crm::kDefaultRoleTemplate;
  crm::MarginMap margins;
};

int run_augment(const AugmentArgs& args) {
  ensure_output(args.out, args.shared.force);
  auto dataset = crm::load_dataset(args.data);
  std::optional<crm::CritiqueStore> store;
  if (!args.critiques.empty()) store = crm::CritiqueStore::load(args.critiques);

  auto pairs = crm::render_dataset(dataset, store ? &*store : nullptr, args.role_template,
                                   args.margins);
  crm::save_augmented(args.out, pairs);

  crm::RunManifest man = start_manifest("augment", args.shared);
  man.config = {{"role_template", args.role_template},
                {"margins",
                 {{"slightly_better", args.margins.slightly_better},
                  {"better", args.margins.better},
                  {"significantly_better", args.margins.significantly_better}}}};
  if (store && !store->items().empty()) {
    man.critique_generator = store->items().front().generator;
    man.template_versions["critique"] = store->items().front().template_version;
  }
  man.add_input(args.data);
  if (!args.critiques.empty()) man.add_input(args.critiques);
  man.add_output(args.out);
  man.finalize();
  man.save(crm::manifest_path_for(args.out));
  std::fprintf(stdout, "augment: wrote %zu pairs to %s\n", pairs.size(), args.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  SharedArgs shared;
  std::string train_path;
  std::string val_path;
  std::string out;
  std::string log_out;
  std::string sweep;  // comma-separated candidate lrs
  crm::TrainConfig config;
  crm::ScorerSettings scorer;
  bool no_shuffle = false;
};

int run_train(const TrainArgs& args) {
  ensure_output(args.out, args.shared.force);
  ensure_output(args.log_out, args.shared.force);

  auto pairs = crm::load_augmented(args.train_path);
  if (pairs.empty()) throw CliValidationError("training set is empty: " + args.train_path);

  std::vector<std::string> corpus;
  corpus.reserve(pairs.size() * 2);
  for (const auto& p : pairs) {
    corpus.push_back(p.text_chosen);
    corpus.push_back(p.text_rejected);
  }
  crm::Tokenizer tokenizer = crm::Tokenizer::build(corpus, args.scorer.vocab_cap,
                                                   args.scorer.max_len, args.scorer.truncation);

  crm::TrainConfig config = args.config;
  config.seed = args.shared.seed;
  config.shuffle = !args.no_shuffle;
  crm::ScorerHyper hyper{args.scorer.d, args.scorer.L, args.shared.seed};

  crm::RunManifest man = start_manifest("train", args.shared);
  man.add_input(args.train_path);

  if (!args.sweep.empty()) {
    if (args.val_path.empty()) throw CliValidationError("--sweep requires --val");
    auto val_pairs = crm::load_augmented(args.val_path);
    auto sweep = crm::sweep_lr(pairs, val_pairs, parse_double_list(args.sweep), config,
                               tokenizer, hyper);
    config.max_lr = sweep.best_lr;
    man.add_input(args.val_path);
    man.config["sweep_best_lr"] = sweep.best_lr;
    for (const auto& cell : sweep.candidates) {
      std::fprintf(stdout, "sweep: lr=%g %s\n", cell.lr,
                   cell.val_accuracy ? ("val_acc=" + std::to_string(*cell.val_accuracy)).c_str()
                                     : ("failed: " + cell.error).c_str());
    }
  }

  auto result = crm::train(pairs, config, tokenizer, hyper);

  std::string generator = "none";
  for (const auto& p : pairs) {
    if (p.critique_generator != "none") generator = p.critique_generator;
  }
  std::map<std::string, std::string> metadata{
      {"critique_generator", generator},
      {"train_data_digest", crm::digest_file(args.train_path)}};
  crm::save_checkpoint(args.out, result.params, tokenizer, metadata);
  if (!args.log_out.empty()) crm::write_file_atomic(args.log_out, result.log.to_csv());

  man.config["train"] = {{"batch_size", config.batch_size},
                         {"epochs", config.epochs},
                         {"max_lr", config.max_lr},
                         {"final_lr_fraction", config.final_lr_fraction},
                         {"warmup_steps", config.warmup_steps},
                         {"clip_norm", config.clip_norm},
                         {"shuffle", config.shuffle},
                         {"seed", config.seed}};
  man.config["scorer"] = {{"d", args.scorer.d},
                          {"L", args.scorer.L},
                          {"vocab_cap", args.scorer.vocab_cap},
                          {"max_len", args.scorer.max_len}};
  man.critique_generator = generator;
  man.add_output(args.out);
  if (!args.log_out.empty()) man.add_output(args.log_out);
  man.finalize();
  man.save(crm::manifest_path_for(args.out));

  std::fprintf(stdout, "train: %zu steps, final loss %.6f, params digest %s\n",
               result.log.records.size(),
               result.log.records.empty() ? 0.0 : result.log.records.back().loss,
               result.log.final_params_digest.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  SharedArgs shared;
  std::string model;
  std::string data;
  std::string dataset;  // original preference JSONL, for category tags
  std::string out;
  std::string csv_out;
  std::string tie_policy = "tie_incorrect";
};

int run_eval(const EvalArgs& args) {
  ensure_output(args.out, args.shared.force);
  ensure_output(args.csv_out, args.shared.force);

  crm::Checkpoint ck = crm::load_checkpoint(args.model);
  auto pairs = crm::load_augmented(args.data);
  if (pairs.empty()) throw CliValidationError("eval set is empty: " + args.data);

  std::string eval_generator = "none";
  for (const auto& p : pairs) {
    if (p.critique_generator != "none") eval_generator = p.critique_generator;
  }
  auto meta_it = ck.metadata.find("critique_generator");
  const std::string train_generator =
      meta_it == ck.metadata.end() ? "none" : meta_it->second;
  if (train_generator != eval_generator) {
    std::fprintf(stderr,
                 "warning: train/test critique generators differ (train=%s, eval=%s)\n",
                 train_generator.c_str(), eval_generator.c_str());
  }

  crm::CategoryById categories;
  if (!args.dataset.empty()) categories = crm::categories_of(crm::load_dataset(args.dataset));

  auto report = crm::accuracy(ck.params, ck.tokenizer, pairs, categories,
                              crm::tie_policy_from_string(args.tie_policy));
  report.dataset_digest = crm::digest_file(args.data);
  crm::write_file_atomic(args.out, report.to_json().dump(2) + "\n");
  if (!args.csv_out.empty()) crm::write_file_atomic(args.csv_out, report.to_csv());

  crm::RunManifest man = start_manifest("eval", args.shared);
  man.config = {{"tie_policy", args.tie_policy}};
  man.critique_generator = eval_generator;
  man.add_input(args.model);
  man.add_input(args.data);
  if (!args.dataset.empty()) man.add_input(args.dataset);
  man.add_output(args.out);
  if (!args.csv_out.empty()) man.add_output(args.csv_out);
  man.finalize();
  man.save(crm::manifest_path_for(args.out));

  std::fprintf(stdout, "eval: overall accuracy %.4f, avg_score %.4f (%zu pairs, %zu ties)\n",
               report.overall.accuracy, report.avg_score, report.overall.n,
               report.overall.ties);
  return 0;
}

// ---------------------------------------------------------------------------
// scale

struct ScaleArgs {
  SharedArgs shared;
  std::string data;
  std::string critiques;
  std::string test;
  std::string test_critiques;
  std::string sizes = "500,2000,8000";
  std::string seeds = "1,2,3,4,5";
  std::string modes = "no_critique,with_critique";
  std::string out_dir = "scaling";
  crm::TrainConfig config;
  crm::ScorerSettings scorer;
  std::string role_template = crm::kDefaultRoleTemplate;
};

int run_scale(const ScaleArgs& args) {
  const std::string scaling_csv = (fs::path(args.out_dir) / "scaling.csv").string();
  const std::string crossover_out = (fs::path(args.out_dir) / "crossover.csv").string();
  ensure_output(scaling_csv, args.shared.force);
  ensure_output(crossover_out, args.shared.force);

  auto train_set = crm::load_dataset(args.data);
  auto test_set = crm::load_dataset(args.test);
  std::optional<crm::CritiqueStore> train_store, test_store;
  if (!args.critiques.empty()) train_store = crm::CritiqueStore::load(args.critiques);
  if (!args.test_critiques.empty()) test_store = crm::CritiqueStore::load(args.test_critiques);

  crm::ScalingInputs inputs;
  inputs.train = &train_set;
  inputs.test = &test_set;
  inputs.train_critiques = train_store ? &*train_store : nullptr;
  inputs.test_critiques = test_store ? &*test_store : nullptr;
  inputs.role_template = args.role_template;
  inputs.config = args.config;
  inputs.scorer = args.scorer;
  inputs.sizes = parse_size_list(args.sizes);
  inputs.seeds = parse_seed_list(args.seeds);
  {
    std::stringstream ss(args.modes);
    std::string mode;
    while (std::getline(ss, mode, ',')) {
      if (mode.empty()) continue;
      inputs.modes.push_back({mode, mode.find("with") != std::string::npos});
    }
  }

  // Per-cell rows are appended to a .partial file as they finish, so an
  // interrupted study still leaves its completed cells on disk.
  fs::create_directories(args.out_dir);
  const std::string partial_csv = scaling_csv + ".partial";
  std::ofstream partial(partial_csv, std::ios::trunc);
  partial << "size,mode,seed,avg_score,error\n" << std::flush;
  auto table = crm::scaling_study(inputs, [&](const crm::ScalingCell& cell) {
    std::fprintf(stdout, "scale: size=%zu mode=%s seed=%llu %s%.4f\n", cell.size,
                 cell.mode.c_str(), static_cast<unsigned long long>(cell.seed),
                 cell.failed ? "FAILED " : "avg_score=",
                 cell.failed ? 0.0 : cell.report.avg_score);
    partial << cell.size << ',' << cell.mode << ',' << cell.seed << ','
            << cell.report.avg_score << ',' << (cell.failed ? cell.error : "") << '\n'
            << std::flush;
  });
  crm::write_file_atomic(scaling_csv, table.to_csv());
  partial.close();
  fs::remove(partial_csv);

  crm::RunManifest man = start_manifest("scale", args.shared);
  man.config = {{"sizes", args.sizes}, {"seeds", args.seeds}, {"modes", args.modes}};
  man.add_input(args.data);
  man.add_input(args.test);
  if (!args.critiques.empty()) man.add_input(args.critiques);
  if (!args.test_critiques.empty()) man.add_input(args.test_critiques);
  man.add_output(scaling_csv);

  // Crossover summary when both a no- and a with- mode are present.
  std::string no_mode, with_mode;
  for (const auto& m : inputs.modes) (m.use_critiques ? with_mode : no_mode) = m.name;
  if (!no_mode.empty() && !with_mode.empty()) {
    auto no_curve = table.mean_curve(no_mode);
    auto with_curve = table.mean_curve(with_mode);
    if (no_curve.size() >= 2 && with_curve.size() >= 2) {
      crm::write_file_atomic(crossover_out, crm::crossover_csv(crm::crossover(no_curve, with_curve)));
      man.add_output(crossover_out);
    }
  }
  man.finalize();
  man.save(crm::manifest_path_for(scaling_csv));

  std::size_t failed = 0;
  for (const auto& c : table.cells) failed += c.failed ? 1 : 0;
  std::fprintf(stdout, "scale: %zu cells (%zu failed) -> %s\n", table.cells.size(), failed,
               scaling_csv.c_str());
  return failed == 0 ? 0 : 2;
}

// ---------------------------------------------------------------------------
// judge

struct JudgeArgs {
  SharedArgs shared;
  std::string data;
  std::string out;
  std::string report_out;
  std::string backend = "mock";
  std::string fixture;
  std::string base_url;
  std::string model = "default";
  std::string api_key;
  bool with_critique = false;
  std::string tie_policy = "tie_incorrect";
  double temperature = 0.0;
  int max_tokens = 64;
  int max_in_flight = 4;
};

int run_judge(const JudgeArgs& args) {
  ensure_output(args.out, args.shared.force);
  ensure_output(args.report_out, args.shared.force);

  std::unique_ptr<crm::CriticBackend> backend;
  if (args.backend == "mock") {
    if (!args.fixture.empty()) {
      backend = std::make_unique<crm::MockCriticBackend>(
          crm::MockCriticBackend::from_fixture_file(args.fixture));
    } else {
      auto mock = std::make_unique<crm::MockCriticBackend>();
      mock->set_default_reply("7");
      backend = std::move(mock);
    }
  } else if (args.backend == "http") {
    crm::HttpBackendConfig cfg;
    cfg.base_url = args.base_url;
    cfg.model = args.model;
    cfg.api_key = args.api_key;
    if (cfg.base_url.empty()) throw CliValidationError("http backend requires --base-url");
    backend = std::make_unique<crm::HttpCriticBackend>(cfg);
  } else {
    throw CliValidationError("unknown backend: " + args.backend);
  }

  auto dataset = crm::load_dataset(args.data);
  crm::Decoding decoding{args.temperature, args.max_tokens};
  std::vector<crm::JudgeVerdict> verdicts(dataset.size());
  {
    // Bounded concurrency over examples; slot order keeps output
    // deterministic regardless of completion order.
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= dataset.size()) return;
        verdicts[i] = crm::judge_pair(dataset[i], *backend, args.with_critique, decoding);
      }
    };
    const int workers =
        std::max(1, std::min<int>(args.max_in_flight, static_cast<int>(dataset.size())));
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
  }
  crm::save_verdicts(args.out, verdicts);

  crm::RunManifest man = start_manifest("judge", args.shared);
  man.config = {{"backend", args.backend},
                {"with_critique", args.with_critique},
                {"tie_policy", args.tie_policy}};
  man.critique_generator = backend->name();
  man.template_versions["judge"] = crm::kJudgeTemplateVersion;
  man.add_input(args.data);
  man.add_output(args.out);

  if (!args.report_out.empty()) {
    auto report = crm::judge_accuracy(verdicts, crm::categories_of(dataset),
                                      crm::tie_policy_from_string(args.tie_policy));
    report.critique_generator = backend->name();
    report.dataset_digest = crm::digest_file(args.data);
    crm::write_file_atomic(args.report_out, report.to_json().dump(2) + "\n");
    man.add_output(args.report_out);
    std::fprintf(stdout, "judge: accuracy %.4f with %zu ties of %zu\n",
                 report.overall.accuracy, report.overall.ties, report.overall.n);
  }
  man.finalize();
  man.save(crm::manifest_path_for(args.out));
  return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  SharedArgs shared;
  std::vector<std::string> reports;
  std::string metacritique_units;
  std::string out;
  std::string markdown_out;
};

int run_report(const ReportArgs& args) {
  ensure_output(args.out, args.shared.force);
  ensure_output(args.markdown_out, args.shared.force);
  if (args.reports.empty() == args.metacritique_units.empty()) {
    throw CliValidationError("report requires exactly one of --reports or --metacritique-units");
  }

  crm::RunManifest man = start_manifest("report", args.shared);

  if (!args.metacritique_units.empty()) {
    auto extractor = crm::FixtureUnitExtractor::load(args.metacritique_units);
    auto by_generator = crm::metacritique_by_generator(extractor.extract_all());
    crm::write_file_atomic(args.out, crm::metacritique_csv(by_generator));
    man.add_input(args.metacritique_units);
    man.add_output(args.out);
    man.finalize();
    man.save(crm::manifest_path_for(args.out));
    std::fprintf(stdout, "report: metacritique for %zu generator(s) -> %s\n",
                 by_generator.size(), args.out.c_str());
    return 0;
  }

  std::vector<crm::EvalReport> reports;
  for (const auto& path : args.reports) {
    reports.push_back(crm::EvalReport::from_json(json::parse(crm::read_file(path))));
  }
  auto grid = crm::build_grid(reports);
  crm::write_file_atomic(args.out, grid.to_csv());
  if (!args.markdown_out.empty()) crm::write_file_atomic(args.markdown_out, grid.to_markdown());

  for (const auto& path : args.reports) man.add_input(path);
  man.add_output(args.out);
  if (!args.markdown_out.empty()) man.add_output(args.markdown_out);
  man.finalize();
  man.save(crm::manifest_path_for(args.out));
  std::fprintf(stdout, "report: %zu rows -> %s\n", grid.rows.size(), args.out.c_str());
  return 0;
}

void add_train_options(CLI::App* cmd, crm::TrainConfig& config, crm::ScorerSettings& scorer) {
  cmd->add_option("--batch-size", config.batch_size, "training batch size");
  cmd->add_option("--epochs", config.epochs, "training epochs");
  cmd->add_option("--max-lr", config.max_lr, "maximum learning rate");
  cmd->add_option("--final-lr-fraction", config.final_lr_fraction,
                  "cosine floor as a fraction of max lr");
  cmd->add_option("--warmup-steps", config.warmup_steps, "linear warmup steps");
  cmd->add_option("--clip-norm", config.clip_norm, "global gradient norm clip (0 disables)");
  cmd->add_option("--dim", scorer.d, "embedding/hidden width");
  cmd->add_option("--layers", scorer.L, "mixing layer count");
  cmd->add_option("--vocab-cap", scorer.vocab_cap, "tokenizer vocabulary cap");
  cmd->add_option("--max-len", scorer.max_len, "token sequence cap");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"critique-augmented reward modeling pipeline"};
  // One [section] per subcommand, keys are long option names, explicit
  // flags win: critique_rm --config run.cfg train ...
  app.set_config("--config", "", "config file (flags override)");
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic preference testbed");
  add_shared(synth, synth_args.shared);
  synth->add_option("--n", synth_args.spec.n_examples, "number of examples")->required();
  synth->add_option("--vocab-size", synth_args.spec.vocab_size, "synthetic vocabulary size");
  synth->add_option("--quality-tokens", synth_args.spec.quality_tokens,
                    "tokens carrying the latent quality signal");
  synth->add_option("--length-bias", synth_args.spec.length_bias,
                    "probability the rejected completion is longer");
  synth->add_option("--adversarial-fraction", synth_args.spec.adversarial_fraction,
                    "fraction with flipped surface cues");
  synth->add_option("--out", synth_args.out, "dataset JSONL path")->required();
  synth->add_option("--truth", synth_args.truth_out, "ground-truth sidecar JSONL path");
  synth->add_option("--oracle-critiques", synth_args.critiques_out,
                    "also write oracle critiques to this path");
  synth->add_option("--fidelity", synth_args.fidelity, "oracle critic fidelity");
  synth->add_option("--oracle-seed", synth_args.oracle_seed, "oracle critic seed");

  GenerateArgs gen_args;
  auto* generate = app.add_subcommand("generate", "generate critiques for both sides");
  add_shared(generate, gen_args.shared);
  generate->add_option("--data", gen_args.data, "preference JSONL")->required();
  generate->add_option("--out", gen_args.out, "critique JSONL path")->required();
  generate->add_option("--backend", gen_args.backend, "mock | http");
  generate->add_option("--fixture", gen_args.fixture, "mock fixture JSON file");
  generate->add_option("--base-url", gen_args.base_url, "http backend base URL");
  generate->add_option("--model", gen_args.model, "http backend model name");
  generate->add_option("--api-key", gen_args.api_key, "http backend API key");
  generate->add_option("--temperature", gen_args.temperature, "decoding temperature");
  generate->add_option("--max-tokens", gen_args.max_tokens, "decoding max tokens");
  generate->add_option("--max-in-flight", gen_args.max_in_flight, "concurrent requests");

  AugmentArgs aug_args;
  auto* augment = app.add_subcommand("augment", "render (prompt, completion[, critique]) pairs");
  add_shared(augment, aug_args.shared);
  augment->add_option("--data", aug_args.data, "preference JSONL")->required();
  augment->add_option("--critiques", aug_args.critiques, "critique JSONL (omit for baseline)");
  augment->add_option("--out", aug_args.out, "augmented JSONL path")->required();
  augment->add_option("--role-template", aug_args.role_template,
                      "text inserted between completion and critique");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train the scalar reward model");
  add_shared(train, train_args.shared);
  train->add_option("--train", train_args.train_path, "augmented training JSONL")->required();
  train->add_option("--val", train_args.val_path, "augmented validation JSONL (for --sweep)");
  train->add_option("--out", train_args.out, "checkpoint path")->required();
  train->add_option("--log", train_args.log_out, "training log CSV path");
  train->add_option("--sweep", train_args.sweep, "comma-separated candidate max lrs");
  train->add_flag("--no-shuffle", train_args.no_shuffle, "disable per-epoch shuffling");
  add_train_options(train, train_args.config, train_args.scorer);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "score pairs and report accuracy");
  add_shared(eval, eval_args.shared);
  eval->add_option("--model", eval_args.model, "checkpoint path")->required();
  eval->add_option("--data", eval_args.data, "augmented eval JSONL")->required();
  eval->add_option("--dataset", eval_args.dataset, "original preference JSONL (categories)");
  eval->add_option("--out", eval_args.out, "report JSON path")->required();
  eval->add_option("--csv", eval_args.csv_out, "report CSV path");
  eval->add_option("--tie-policy", eval_args.tie_policy, "tie_incorrect | tie_half_credit");

  ScaleArgs scale_args;
  auto* scale = app.add_subcommand("scale", "data-efficiency scaling study");
  add_shared(scale, scale_args.shared);
  scale->add_option("--data", scale_args.data, "train preference JSONL")->required();
  scale->add_option("--critiques", scale_args.critiques, "train critique JSONL");
  scale->add_option("--test", scale_args.test, "test preference JSONL")->required();
  scale->add_option("--test-critiques", scale_args.test_critiques, "test critique JSONL");
  scale->add_option("--sizes", scale_args.sizes, "comma-separated training sizes");
  scale->add_option("--seeds", scale_args.seeds, "comma-separated seeds");
  scale->add_option("--modes", scale_args.modes, "comma-separated mode names");
  scale->add_option("--out-dir", scale_args.out_dir, "output directory");
  scale->add_option("--role-template", scale_args.role_template, "critique role template");
  add_train_options(scale, scale_args.config, scale_args.scorer);

  JudgeArgs judge_args;
  auto* judge = app.add_subcommand("judge", "generative Likert-judge baseline");
  add_shared(judge, judge_args.shared);
  judge->add_option("--data", judge_args.data, "preference JSONL")->required();
  judge->add_option("--out", judge_args.out, "verdict JSONL path")->required();
  judge->add_option("--report", judge_args.report_out, "accuracy report JSON path");
  judge->add_option("--backend", judge_args.backend, "mock | http");
  judge->add_option("--fixture", judge_args.fixture, "mock fixture JSON file");
  judge->add_option("--base-url", judge_args.base_url, "http backend base URL");
  judge->add_option("--model", judge_args.model, "http backend model name");
  judge->add_option("--api-key", judge_args.api_key, "http backend API key");
  judge->add_flag("--with-critique", judge_args.with_critique,
                  "ask for a critique before the score");
  judge->add_option("--tie-policy", judge_args.tie_policy, "tie_incorrect | tie_half_credit");
  judge->add_option("--max-in-flight", judge_args.max_in_flight, "concurrent judged examples");

  ReportArgs report_args;
  auto* report = app.add_subcommand("report", "comparison grid from eval reports");
  add_shared(report, report_args.shared);
  report->add_option("--reports", report_args.reports, "eval report JSON files");
  report->add_option("--metacritique-units", report_args.metacritique_units,
                     "unit-judgment JSONL for per-generator critique quality");
  report->add_option("--out", report_args.out, "output CSV path")->required();
  report->add_option("--markdown", report_args.markdown_out, "grid markdown path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (generate->parsed()) return run_generate(gen_args);
    if (augment->parsed()) return run_augment(aug_args);
    if (train->parsed()) return run_train(train_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (scale->parsed()) return run_scale(scale_args);
    if (judge->parsed()) return run_judge(judge_args);
    if (report->parsed()) return run_report(report_args);
    return 1;
  } catch (const CliValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const crm::SchemaViolationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const crm::CheckpointError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  }
}
