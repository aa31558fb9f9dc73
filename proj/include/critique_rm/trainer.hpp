// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "critique_rm/augment.hpp"
#include "critique_rm/prefdata.hpp"
#include "critique_rm/scorer.hpp"

namespace crm {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 1;
  // The desk-scale analogue of the paper-scale 8e-5 maximum; tiny
  // mean-pool models want a few orders of magnitude more.
  double max_lr = 0.02;
  double final_lr_fraction = 0.1;
  std::size_t warmup_steps = 32;
  AdamConfig adam;
  double clip_norm = 1.0;
  std::uint64_t seed = 0;
  MarginMap margins;
  bool shuffle = true;
};

struct TrainLogRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct TrainLog {
  std::vector<TrainLogRecord> records;
  std::string final_params_digest;
  double wall_seconds = 0.0;

  std::string to_csv() const;
};

struct EmptyDatasetError : std::runtime_error {
  EmptyDatasetError() : std::runtime_error("dataset is empty") {}
};

struct StepOutOfRangeError : std::runtime_error {
  StepOutOfRangeError(std::size_t step, std::size_t total)
      : std::runtime_error("step " + std::to_string(step) + " outside [0, " +
                           std::to_string(total) + "]") {}
};

struct TrainConfigError : std::runtime_error {
  explicit TrainConfigError(const std::string& why) : std::runtime_error(why) {}
};

// Training aborted on a non-finite loss/gradient; carries the step index.
struct TrainDivergedError : std::runtime_error {
  std::size_t step;
  explicit TrainDivergedError(std::size_t at)
      : std::runtime_error("training diverged (non-finite) at step " + std::to_string(at)),
        step(at) {}
};

struct SweepError : std::runtime_error {
  explicit SweepError(const std::string& why) : std::runtime_error(why) {}
};

// -log(sigmoid(r_chosen - r_rejected - m)), computed as
// softplus(-(delta - m)). Finite for any finite inputs.
double ranking_loss(double r_chosen, double r_rejected, double margin);

// Linear warmup 0 -> max_lr over warmup_steps, then cosine decay from
// max_lr down to final_lr_fraction * max_lr at total_steps.
double lr_at(std::size_t step, std::size_t total_steps, std::size_t warmup_steps,
             double max_lr, double final_lr_fraction);

std::size_t total_train_steps(std::size_t n_pairs, const TrainConfig& config);

struct TrainResult {
  ScorerParams params;
  TrainLog log;
};

TrainResult train(const std::vector<AugmentedPair>& pairs, const TrainConfig& config,
                  const Tokenizer& tokenizer, const ScorerHyper& hyper);

struct SweepCandidate {
  double lr = 0.0;
  std::optional<double> val_accuracy;  // empty when the run diverged
  std::string error;
};

struct SweepResult {
  double best_lr = 0.0;
  std::vector<SweepCandidate> candidates;
};

// Trains one model per candidate max_lr (shared seed) and returns the
// argmax of validation accuracy; ties break toward the smaller lr.
SweepResult sweep_lr(const std::vector<AugmentedPair>& pairs,
                     const std::vector<AugmentedPair>& validation,
                     const std::vector<double>& candidate_lrs, const TrainConfig& base_config,
                     const Tokenizer& tokenizer, const ScorerHyper& hyper);

}  // namespace crm
