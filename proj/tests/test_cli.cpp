// SPDX-License-Identifier: Apache-2.0
//
// Behavior tests for the CLI binary itself (exit codes, overwrite
// protection, the generator-mismatch warning). The binary path comes from
// the CRITIQUE_RM_BIN environment variable set by CTest.
#include <doctest.h>

#include <cstdlib>

#include <json.hpp>

#include "test_helpers.hpp"

using crm::test::TempDir;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string cli_path() {
  const char* env = std::getenv("CRITIQUE_RM_BIN");
  REQUIRE_MESSAGE(env != nullptr, "CRITIQUE_RM_BIN must point at the critique_rm binary");
  return env;
}

RunResult run_raw(const TempDir& dir, const std::string& full_cmd) {
  const std::string out_file = dir.file("stdout.txt");
  const std::string err_file = dir.file("stderr.txt");
  const int raw = std::system((full_cmd + " >" + out_file + " 2>" + err_file).c_str());
  RunResult result;
  result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  result.out = crm::test::slurp(out_file);
  result.err = crm::test::slurp(err_file);
  return result;
}

RunResult run_cli(const TempDir& dir, const std::string& args) {
  return run_raw(dir, cli_path() + " " + args);
}

std::size_t count_occurrences(const std::string& haystack, const std::string& needle) {
  std::size_t count = 0;
  for (std::size_t at = haystack.find(needle); at != std::string::npos;
       at = haystack.find(needle, at + needle.size())) {
    ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("cli: synth --n 0 writes an empty dataset and exits 0") {
  TempDir dir("cli_synth0");
  auto result = run_cli(dir, "synth --n 0 --seed 1 --out " + dir.file("ds.jsonl"));
  CHECK(result.exit_code == 0);
  CHECK(crm::test::slurp(dir.file("ds.jsonl")).empty());
}

TEST_CASE("cli: existing outputs are not overwritten without --force") {
  TempDir dir("cli_force");
  const std::string out = dir.file("ds.jsonl");
  CHECK(run_cli(dir, "synth --n 3 --seed 1 --out " + out).exit_code == 0);
  auto before = crm::test::slurp(out);

  auto refused = run_cli(dir, "synth --n 5 --seed 2 --out " + out);
  CHECK(refused.exit_code == 1);
  CHECK(refused.err.find("--force") != std::string::npos);
  CHECK(crm::test::slurp(out) == before);

  auto forced = run_cli(dir, "synth --n 5 --seed 2 --out " + out + " --force");
  CHECK(forced.exit_code == 0);
  CHECK(crm::test::slurp(out) != before);
}

TEST_CASE("cli: rerunning a command reproduces byte-identical primary outputs") {
  TempDir dir("cli_repro");
  const std::string a = dir.file("a.jsonl");
  const std::string b = dir.file("b.jsonl");
  CHECK(run_cli(dir, "synth --n 25 --seed 9 --out " + a).exit_code == 0);
  CHECK(run_cli(dir, "synth --n 25 --seed 9 --out " + b).exit_code == 0);
  CHECK(crm::test::read_file_eq(a, b));
}

TEST_CASE("cli: http backend without an API key fails before any request") {
  TempDir dir("cli_nokey");
  CHECK(run_cli(dir, "synth --n 2 --seed 1 --out " + dir.file("ds.jsonl")).exit_code == 0);
  auto result = run_raw(dir, "env -u CRITIQUE_RM_API_KEY " + cli_path() + " generate --data " +
                                 dir.file("ds.jsonl") +
                                 " --backend http --base-url http://127.0.0.1:1 --out " +
                                 dir.file("c.jsonl"));
  // Must be a validation error (exit 1), not a connection failure (exit 2).
  CHECK(result.exit_code == 1);
  CHECK(result.err.find("API key") != std::string::npos);
}

TEST_CASE("cli: eval warns exactly once on a train/test generator mismatch") {
  TempDir dir("cli_warn");
  const std::string ds = dir.file("ds.jsonl");
  const std::string crit = dir.file("crit.jsonl");
  const std::string aug_plain = dir.file("aug_plain.jsonl");
  const std::string aug_crit = dir.file("aug_crit.jsonl");
  const std::string model = dir.file("model.json");

  CHECK(run_cli(dir, "synth --n 24 --seed 4 --out " + ds).exit_code == 0);
  CHECK(run_cli(dir, "generate --data " + ds + " --backend mock --out " + crit).exit_code == 0);
  CHECK(run_cli(dir, "augment --data " + ds + " --out " + aug_plain).exit_code == 0);
  CHECK(run_cli(dir, "augment --data " + ds + " --critiques " + crit + " --out " + aug_crit)
            .exit_code == 0);
  // Train without critiques, eval on the critique-augmented set.
  CHECK(run_cli(dir, "train --train " + aug_plain + " --out " + model +
                         " --epochs 2 --warmup-steps 1 --batch-size 8 --seed 4")
            .exit_code == 0);

  auto mismatched = run_cli(dir, "eval --model " + model + " --data " + aug_crit +
                                     " --dataset " + ds + " --out " + dir.file("r1.json"));
  CHECK(mismatched.exit_code == 0);
  CHECK(count_occurrences(mismatched.err, "critique generators differ") == 1);

  auto matched = run_cli(dir, "eval --model " + model + " --data " + aug_plain + " --dataset " +
                                  ds + " --out " + dir.file("r2.json"));
  CHECK(matched.exit_code == 0);
  CHECK(count_occurrences(matched.err, "critique generators differ") == 0);
}

TEST_CASE("cli: scale writes the study CSV and a crossover summary") {
  TempDir dir("cli_scale");
  const std::string train = dir.file("train.jsonl");
  const std::string test = dir.file("test.jsonl");
  const std::string train_crit = dir.file("train_crit.jsonl");
  const std::string test_crit = dir.file("test_crit.jsonl");

  CHECK(run_cli(dir, "synth --n 64 --seed 11 --out " + train + " --oracle-critiques " +
                         train_crit + " --fidelity 1.0")
            .exit_code == 0);
  CHECK(run_cli(dir, "synth --n 32 --seed 12 --out " + test + " --oracle-critiques " +
                         test_crit + " --fidelity 1.0")
            .exit_code == 0);
  auto result = run_cli(
      dir, "scale --data " + train + " --critiques " + train_crit + " --test " + test +
               " --test-critiques " + test_crit +
               " --sizes 16,32 --seeds 1,2 --epochs 1 --warmup-steps 0 --batch-size 8" +
               " --dim 16 --layers 1 --out-dir " + dir.file("study"));
  CHECK(result.exit_code == 0);
  auto csv = crm::test::slurp(dir.file("study/scaling.csv"));
  CHECK(csv.find("size,mode,seed") == 0);
  CHECK(count_occurrences(csv, "\n") == 9);  // header + 2 sizes x 2 modes x 2 seeds
  auto crossover = crm::test::slurp(dir.file("study/crossover.csv"));
  CHECK(crossover.find("with_size,with_score") == 0);
}

TEST_CASE("cli: judge emits verdicts and a tie-aware report") {
  TempDir dir("cli_judge");
  const std::string ds = dir.file("ds.jsonl");
  CHECK(run_cli(dir, "synth --n 6 --seed 2 --out " + ds).exit_code == 0);
  // Default mock judge replies a constant 7: every pair ties.
  auto result = run_cli(dir, "judge --data " + ds + " --backend mock --out " +
                                 dir.file("verdicts.jsonl") + " --report " +
                                 dir.file("jreport.json"));
  CHECK(result.exit_code == 0);
  auto report = nlohmann::json::parse(crm::test::slurp(dir.file("jreport.json")));
  CHECK(report["overall"]["ties"] == 6);
  CHECK(report["overall"]["accuracy"] == 0.0);
  auto lines = crm::test::slurp(dir.file("verdicts.jsonl"));
  CHECK(count_occurrences(lines, "\n") == 6);
}

TEST_CASE("cli: report --metacritique-units writes the per-generator CSV") {
  TempDir dir("cli_meta");
  crm::test::write_text(
      dir.file("units.jsonl"),
      R"({"example_id":"e1","generator":"gen-a","candidate":[{"unit":"u","supported":true}],"reference":[{"unit":"r","covered":true}]}
)");
  auto result = run_cli(dir, "report --metacritique-units " + dir.file("units.jsonl") +
                                 " --out " + dir.file("meta.csv"));
  CHECK(result.exit_code == 0);
  auto csv = crm::test::slurp(dir.file("meta.csv"));
  CHECK(csv.find("generator,n_examples") == 0);
  CHECK(csv.find("gen-a,1,1,1,1") != std::string::npos);

  // --reports and --metacritique-units are mutually exclusive modes.
  auto both = run_cli(dir, "report --out " + dir.file("x.csv"));
  CHECK(both.exit_code == 1);
}

TEST_CASE("cli: train --sweep picks a candidate and records it in the manifest") {
  TempDir dir("cli_sweep");
  const std::string ds = dir.file("ds.jsonl");
  const std::string aug = dir.file("aug.jsonl");
  CHECK(run_cli(dir, "synth --n 40 --seed 6 --out " + ds).exit_code == 0);
  CHECK(run_cli(dir, "augment --data " + ds + " --out " + aug).exit_code == 0);
  auto result = run_cli(dir, "train --train " + aug + " --val " + aug + " --out " +
                                 dir.file("model.json") +
                                 " --sweep 0.001,0.01 --epochs 1 --warmup-steps 0"
                                 " --batch-size 8 --dim 8 --layers 1 --seed 6");
  CHECK(result.exit_code == 0);
  CHECK(result.out.find("sweep: lr=") != std::string::npos);
  auto manifest =
      nlohmann::json::parse(crm::test::slurp(dir.file("model.json.manifest.json")));
  const double best = manifest["config"]["sweep_best_lr"].get<double>();
  CHECK((best == 0.001 || best == 0.01));
  CHECK(manifest["config"]["train"]["max_lr"].get<double>() == best);
}

TEST_CASE("cli: config file supplies defaults, flags win") {
  TempDir dir("cli_config");
  const std::string ds = dir.file("ds.jsonl");
  const std::string aug = dir.file("aug.jsonl");
  CHECK(run_cli(dir, "synth --n 16 --seed 3 --out " + ds).exit_code == 0);
  CHECK(run_cli(dir, "augment --data " + ds + " --out " + aug).exit_code == 0);
  crm::test::write_text(dir.file("run.cfg"),
                        "# critique-rm config v1\n"
                        "[train]\n"
                        "epochs=3\n"
                        "batch-size=4\n"
                        "warmup-steps=1\n"
                        "dim=8\n"
                        "layers=1\n");
  auto result = run_cli(dir, "--config " + dir.file("run.cfg") + " train --train " + aug +
                                 " --out " + dir.file("m1.json") + " --seed 3");
  CHECK(result.exit_code == 0);
  auto manifest = nlohmann::json::parse(crm::test::slurp(dir.file("m1.json.manifest.json")));
  CHECK(manifest["config"]["train"]["epochs"] == 3);
  CHECK(manifest["config"]["train"]["batch_size"] == 4);

  // An explicit flag overrides the config file value.
  auto overridden = run_cli(dir, "--config " + dir.file("run.cfg") + " train --train " + aug +
                                     " --out " + dir.file("m2.json") + " --epochs 2 --seed 3");
  CHECK(overridden.exit_code == 0);
  auto manifest2 = nlohmann::json::parse(crm::test::slurp(dir.file("m2.json.manifest.json")));
  CHECK(manifest2["config"]["train"]["epochs"] == 2);
}

TEST_CASE("cli: validation errors exit 1, missing subcommand exits 1") {
  TempDir dir("cli_exit");
  auto bad = run_cli(dir, "eval --model missing.json --data also_missing.jsonl --out " +
                              dir.file("r.json"));
  CHECK(bad.exit_code != 0);
  auto none = run_cli(dir, "");
  CHECK(none.exit_code == 1);
}
