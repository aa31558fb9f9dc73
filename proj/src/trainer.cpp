// SPDX-License-Identifier: Apache-2.0
#include "critique_rm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "critique_rm/rng.hpp"

namespace crm {

double ranking_loss(double r_chosen, double r_rejected, double margin) {
  if (!std::isfinite(r_chosen) || !std::isfinite(r_rejected) || !std::isfinite(margin)) {
    throw NonFiniteError("ranking_loss inputs");
  }
  const double z = r_chosen - r_rejected - margin;
  // softplus(-z) = max(-z, 0) + log1p(exp(-|z|))
  return std::max(-z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double lr_at(std::size_t step, std::size_t total_steps, std::size_t warmup_steps,
             double max_lr, double final_lr_fraction) {
  if (step > total_steps) throw StepOutOfRangeError(step, total_steps);
  if (step <= warmup_steps && warmup_steps > 0) {
    return max_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  const double final_lr = final_lr_fraction * max_lr;
  const double span = static_cast<double>(total_steps - warmup_steps);
  const double t = span == 0.0 ? 1.0 : static_cast<double>(step - warmup_steps) / span;
  return final_lr + (max_lr - final_lr) * 0.5 * (1.0 + std::cos(M_PI * t));
}

std::size_t total_train_steps(std::size_t n_pairs, const TrainConfig& config) {
  const std::size_t per_epoch = (n_pairs + config.batch_size - 1) / config.batch_size;
  return per_epoch * config.epochs;
}

std::string TrainLog::to_csv() const {
  std::ostringstream os;
  os << "step,lr,loss,grad_norm\n";
  os.precision(17);
  for (const auto& r : records) {
    os << r.step << ',' << r.lr << ',' << r.loss << ',' << r.grad_norm << '\n';
  }
  return os.str();
}

namespace {

void validate_config(std::size_t n_pairs, const TrainConfig& config) {
  if (n_pairs == 0) throw EmptyDatasetError();
  if (config.batch_size == 0) throw TrainConfigError("batch_size must be >= 1");
  if (config.epochs == 0) throw TrainConfigError("epochs must be >= 1");
  if (!(config.final_lr_fraction > 0.0) || config.final_lr_fraction > 1.0) {
    throw TrainConfigError("final_lr_fraction must be in (0, 1]");
  }
  const std::size_t total = total_train_steps(n_pairs, config);
  if (config.warmup_steps >= total) {
    throw TrainConfigError("warmup_steps (" + std::to_string(config.warmup_steps) +
                           ") must be < total steps (" + std::to_string(total) + ")");
  }
  config.margins.validate();
}

struct TokenizedPair {
  std::vector<int> chosen;
  std::vector<int> rejected;
  double margin = 0.0;
};

struct AdamState {
  ParamTensors m;
  ParamTensors v;
  std::size_t step = 0;
};

double global_norm(const ParamTensors& t) {
  double sq = 0.0;
  t.for_each_span([&](std::span<const double> s) {
    for (double v : s) sq += v * v;
  });
  return std::sqrt(sq);
}

void adam_update(ScorerParams& params, const ParamTensors& grads, AdamState& state,
                 const AdamConfig& adam, double lr) {
  state.step++;
  const double b1 = adam.beta1;
  const double b2 = adam.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

  // Walk the three tensor sets in lockstep; shapes are identical.
  std::vector<std::span<double>> psp, msp, vsp;
  std::vector<std::span<const double>> gsp;
  params.t.for_each_span([&](std::span<double> s) { psp.push_back(s); });
  state.m.for_each_span([&](std::span<double> s) { msp.push_back(s); });
  state.v.for_each_span([&](std::span<double> s) { vsp.push_back(s); });
  grads.for_each_span([&](std::span<const double> s) { gsp.push_back(s); });
  for (std::size_t i = 0; i < psp.size(); ++i) {
    auto p = psp[i];
    auto m = msp[i];
    auto v = vsp[i];
    auto g = gsp[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= lr * mhat / (std::sqrt(vhat) + adam.eps);
    }
  }
}

}  // namespace

TrainResult train(const std::vector<AugmentedPair>& pairs, const TrainConfig& config,
                  const Tokenizer& tokenizer, const ScorerHyper& hyper) {
  validate_config(pairs.size(), config);
  const auto start = std::chrono::steady_clock::now();

  std::vector<TokenizedPair> tokenized(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    tokenized[i].chosen = tokenizer.encode(pairs[i].text_chosen);
    tokenized[i].rejected = tokenizer.encode(pairs[i].text_rejected);
    tokenized[i].margin = pairs[i].margin;
  }

  ScorerParams params = init_params(tokenizer.vocab_size(), hyper);
  AdamState adam_state{ParamTensors::zeros_like(params.t), ParamTensors::zeros_like(params.t), 0};

  const std::size_t total_steps = total_train_steps(pairs.size(), config);
  TrainResult result;
  result.log.records.reserve(total_steps);

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.shuffle) {
      DetRng rng(derive_seed(config.seed, "shuffle-epoch-" + std::to_string(epoch)));
      rng.shuffle(order);
    }
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      ++step;
      const std::size_t end = std::min(begin + config.batch_size, order.size());
      std::vector<PairItem> batch;
      batch.reserve(end - begin);
      for (std::size_t k = begin; k < end; ++k) {
        const auto& tp = tokenized[order[k]];
        batch.push_back({tp.chosen, tp.rejected, tp.margin});
      }
      GradientBundle grads;
      try {
        grads = backward(params, batch);
      } catch (const NonFiniteError&) {
        throw TrainDivergedError(step);
      }
      const double norm = global_norm(grads.t);
      if (config.clip_norm > 0.0 && norm > config.clip_norm) {
        const double scale = config.clip_norm / norm;
        grads.t.for_each_span([scale](std::span<double> s) {
          for (double& v : s) v *= scale;
        });
      }
      const double lr = lr_at(step, total_steps, config.warmup_steps, config.max_lr,
                              config.final_lr_fraction);
      adam_update(params, grads.t, adam_state, config.adam, lr);
      if (!params.t.all_finite()) throw TrainDivergedError(step);
      result.log.records.push_back({step, lr, grads.loss, norm});
    }
  }

  result.log.final_params_digest = params.digest();
  result.log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.params = std::move(params);
  return result;
}

namespace {

double pairwise_accuracy(const ScorerParams& params, const Tokenizer& tokenizer,
                         const std::vector<AugmentedPair>& pairs) {
  if (pairs.empty()) throw EmptyDatasetError();
  std::size_t correct = 0;
  for (const auto& p : pairs) {
    const double rc = forward(params, tokenizer.encode(p.text_chosen));
    const double rr = forward(params, tokenizer.encode(p.text_rejected));
    if (rc > rr) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

}  // namespace

SweepResult sweep_lr(const std::vector<AugmentedPair>& pairs,
                     const std::vector<AugmentedPair>& validation,
                     const std::vector<double>& candidate_lrs, const TrainConfig& base_config,
                     const Tokenizer& tokenizer, const ScorerHyper& hyper) {
  if (candidate_lrs.empty()) throw SweepError("no candidate learning rates");
  std::vector<double> sorted_lrs = candidate_lrs;
  std::sort(sorted_lrs.begin(), sorted_lrs.end());

  SweepResult result;
  bool any_ok = false;
  double best_acc = -1.0;
  for (double lr : sorted_lrs) {
    SweepCandidate cell;
    cell.lr = lr;
    TrainConfig config = base_config;
    config.max_lr = lr;
    try {
      TrainResult run = train(pairs, config, tokenizer, hyper);
      cell.val_accuracy = pairwise_accuracy(run.params, tokenizer, validation);
      // Strict > keeps the smaller lr on ties (ascending iteration order).
      if (!any_ok || *cell.val_accuracy > best_acc) {
        best_acc = *cell.val_accuracy;
        result.best_lr = lr;
        any_ok = true;
      }
    } catch (const TrainDivergedError& e) {
      cell.error = e.what();
    }
    result.candidates.push_back(std::move(cell));
  }
  if (!any_ok) throw SweepError("all sweep candidates diverged");
  return result;
}

}  // namespace crm
