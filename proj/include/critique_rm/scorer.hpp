// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace crm {

enum class Truncation { kKeepTail, kKeepHead };

const char* to_string(Truncation t);
Truncation truncation_from_string(const std::string& s);

// Word-level tokenizer: maximal runs of non-space, non-punctuation bytes
// are words, punctuation bytes are single-char tokens. Vocabulary is built
// from a corpus pass, capped by frequency; id 0 is reserved for <unk>.
class Tokenizer {
 public:
  Tokenizer() = default;

  static std::vector<std::string> split_words(const std::string& text);

  static Tokenizer build(const std::vector<std::string>& corpus, std::size_t vocab_cap,
                         std::size_t max_len, Truncation truncation);

  std::vector<int> encode(const std::string& text) const;
  std::string decode_token(int id) const;

  int unk_id() const { return 0; }
  std::size_t vocab_size() const { return vocab_.size(); }
  std::size_t max_len() const { return max_len_; }
  Truncation truncation() const { return truncation_; }

  nlohmann::json to_json() const;
  static Tokenizer from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> vocab_;  // vocab_[id] = token; vocab_[0] = "<unk>"
  std::map<std::string, int> ids_;
  std::size_t max_len_ = 512;
  Truncation truncation_ = Truncation::kKeepTail;
};

struct ScorerHyper {
  int d = 64;
  int L = 2;
  std::uint64_t seed = 0;
};

struct MixLayer {
  std::vector<double> weight;  // d x d, row-major
  std::vector<double> bias;    // d
};

// The trainable tensors, shared shape-wise between parameters, gradients
// and Adam moments.
struct ParamTensors {
  std::vector<double> embedding;  // vocab x d, row-major
  std::vector<MixLayer> layers;
  std::vector<double> head_w;  // d
  double head_b = 0.0;

  std::size_t size() const;
  void fill(double v);
  void for_each_span(const std::function<void(std::span<double>)>& fn);
  void for_each_span(const std::function<void(std::span<const double>)>& fn) const;
  double get_coord(std::size_t flat) const;
  void set_coord(std::size_t flat, double v);
  bool all_finite() const;

  static ParamTensors zeros_like(const ParamTensors& other);
};

struct ScorerParams {
  ScorerHyper hyper;
  std::size_t vocab = 0;
  ParamTensors t;

  std::string digest() const;
};

struct GradientBundle {
  ParamTensors t;
  double loss = 0.0;
};

struct NonFiniteError : std::runtime_error {
  explicit NonFiniteError(const std::string& where)
      : std::runtime_error("non-finite value in " + where) {}
};

struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& why) : std::runtime_error(why) {}
};

// Embeddings and mixing weights from seeded normal(0, 0.02); biases and the
// head are zero so every initial reward is exactly 0 and the initial
// margin-free ranking loss is exactly ln 2.
ScorerParams init_params(std::size_t vocab, const ScorerHyper& hyper);

// Scalar reward for one token sequence: mean-pooled embeddings through L
// tanh mixing layers into the linear head. Empty input pools to the zero
// vector.
double forward(const ScorerParams& params, std::span<const int> ids);

struct PairItem {
  std::span<const int> ids_chosen;
  std::span<const int> ids_rejected;
  double margin = 0.0;
};

// Gradients of the mean margin ranking loss over the batch w.r.t. every
// parameter, plus the loss value itself.
GradientBundle backward(const ScorerParams& params, std::span<const PairItem> batch);

// Versioned JSON checkpoint with tokenizer, shapes and a content digest;
// loading rejects any digest mismatch.
void save_checkpoint(const std::string& path, const ScorerParams& params,
                     const Tokenizer& tokenizer,
                     const std::map<std::string, std::string>& metadata = {});

struct Checkpoint {
  ScorerParams params;
  Tokenizer tokenizer;
  std::map<std::string, std::string> metadata;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace crm
