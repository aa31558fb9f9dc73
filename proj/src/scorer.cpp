// SPDX-License-Identifier: Apache-2.0
#include "critique_rm/scorer.hpp"

#include <algorithm>
#include <cassert>
#include <cctype>
#include <cmath>

#include "critique_rm/digest.hpp"
#include "critique_rm/jsonl.hpp"
#include "critique_rm/rng.hpp"

namespace crm {

const char* to_string(Truncation t) {
  return t == Truncation::kKeepTail ? "keep_tail" : "keep_head";
}

Truncation truncation_from_string(const std::string& s) {
  if (s == "keep_tail") return Truncation::kKeepTail;
  if (s == "keep_head") return Truncation::kKeepHead;
  throw CheckpointError("unknown truncation policy: " + s);
}

std::vector<std::string> Tokenizer::split_words(const std::string& text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      out.push_back(word);
      word.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      word.push_back(static_cast<char>(c));
    }
  }
  flush();
  return out;
}

Tokenizer Tokenizer::build(const std::vector<std::string>& corpus, std::size_t vocab_cap,
                           std::size_t max_len, Truncation truncation) {
  std::map<std::string, std::size_t> freq;
  for (const auto& text : corpus) {
    for (auto& w : split_words(text)) freq[w]++;
  }
  // Frequency-descending, then lexicographic, for a deterministic id map.
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Tokenizer tok;
  tok.max_len_ = max_len;
  tok.truncation_ = truncation;
  tok.vocab_.push_back("<unk>");
  for (const auto& [word, count] : ranked) {
    if (tok.vocab_.size() >= vocab_cap) break;
    tok.ids_[word] = static_cast<int>(tok.vocab_.size());
    tok.vocab_.push_back(word);
  }
  return tok;
}

std::vector<int> Tokenizer::encode(const std::string& text) const {
  std::vector<int> ids;
  for (auto& w : split_words(text)) {
    auto it = ids_.find(w);
    ids.push_back(it == ids_.end() ? unk_id() : it->second);
  }
  if (ids.size() > max_len_) {
    if (truncation_ == Truncation::kKeepTail) {
      ids.erase(ids.begin(), ids.end() - static_cast<std::ptrdiff_t>(max_len_));
    } else {
      ids.resize(max_len_);
    }
  }
  return ids;
}

std::string Tokenizer::decode_token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) {
    throw CheckpointError("token id out of range: " + std::to_string(id));
  }
  return vocab_[static_cast<std::size_t>(id)];
}

nlohmann::json Tokenizer::to_json() const {
  return {{"vocab", vocab_},
          {"max_len", max_len_},
          {"truncation", to_string(truncation_)}};
}

Tokenizer Tokenizer::from_json(const nlohmann::json& j) {
  Tokenizer tok;
  tok.vocab_ = j.at("vocab").get<std::vector<std::string>>();
  tok.max_len_ = j.at("max_len").get<std::size_t>();
  tok.truncation_ = truncation_from_string(j.at("truncation").get<std::string>());
  if (tok.vocab_.empty() || tok.vocab_[0] != "<unk>") {
    throw CheckpointError("tokenizer vocab must start with <unk>");
  }
  for (std::size_t i = 1; i < tok.vocab_.size(); ++i) {
    tok.ids_[tok.vocab_[i]] = static_cast<int>(i);
  }
  return tok;
}

std::size_t ParamTensors::size() const {
  std::size_t n = embedding.size() + head_w.size() + 1;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void ParamTensors::fill(double v) {
  for_each_span([v](std::span<double> s) { std::fill(s.begin(), s.end(), v); });
}

void ParamTensors::for_each_span(const std::function<void(std::span<double>)>& fn) {
  fn({embedding.data(), embedding.size()});
  for (auto& l : layers) {
    fn({l.weight.data(), l.weight.size()});
    fn({l.bias.data(), l.bias.size()});
  }
  fn({head_w.data(), head_w.size()});
  fn({&head_b, 1});
}

void ParamTensors::for_each_span(const std::function<void(std::span<const double>)>& fn) const {
  fn({embedding.data(), embedding.size()});
  for (const auto& l : layers) {
    fn({l.weight.data(), l.weight.size()});
    fn({l.bias.data(), l.bias.size()});
  }
  fn({head_w.data(), head_w.size()});
  fn({&head_b, 1});
}

double ParamTensors::get_coord(std::size_t flat) const {
  double out = 0.0;
  std::size_t offset = 0;
  for_each_span([&](std::span<const double> s) {
    if (flat >= offset && flat < offset + s.size()) out = s[flat - offset];
    offset += s.size();
  });
  return out;
}

void ParamTensors::set_coord(std::size_t flat, double v) {
  std::size_t offset = 0;
  for_each_span([&](std::span<double> s) {
    if (flat >= offset && flat < offset + s.size()) s[flat - offset] = v;
    offset += s.size();
  });
}

bool ParamTensors::all_finite() const {
  bool ok = true;
  for_each_span([&](std::span<const double> s) {
    for (double v : s) {
      if (!std::isfinite(v)) ok = false;
    }
  });
  return ok;
}

ParamTensors ParamTensors::zeros_like(const ParamTensors& other) {
  ParamTensors z;
  z.embedding.assign(other.embedding.size(), 0.0);
  z.layers.resize(other.layers.size());
  for (std::size_t l = 0; l < other.layers.size(); ++l) {
    z.layers[l].weight.assign(other.layers[l].weight.size(), 0.0);
    z.layers[l].bias.assign(other.layers[l].bias.size(), 0.0);
  }
  z.head_w.assign(other.head_w.size(), 0.0);
  z.head_b = 0.0;
  return z;
}

std::string ScorerParams::digest() const {
  Fnv1a64 h;
  h.update_u64(static_cast<std::uint64_t>(hyper.d));
  h.update_u64(static_cast<std::uint64_t>(hyper.L));
  h.update_u64(hyper.seed);
  h.update_u64(vocab);
  t.for_each_span([&](std::span<const double> s) {
    for (double v : s) h.update_double(v);
  });
  return h.hex();
}

ScorerParams init_params(std::size_t vocab, const ScorerHyper& hyper) {
  if (hyper.d <= 0 || hyper.L < 0) throw CheckpointError("invalid scorer hyperparameters");
  ScorerParams p;
  p.hyper = hyper;
  p.vocab = vocab;
  const auto d = static_cast<std::size_t>(hyper.d);
  DetRng rng(derive_seed(hyper.seed, "scorer-init"));
  p.t.embedding.resize(vocab * d);
  for (auto& v : p.t.embedding) v = rng.next_normal(0.0, 0.02);
  p.t.layers.resize(static_cast<std::size_t>(hyper.L));
  for (auto& layer : p.t.layers) {
    layer.weight.resize(d * d);
    for (auto& v : layer.weight) v = rng.next_normal(0.0, 0.02);
    layer.bias.assign(d, 0.0);
  }
  p.t.head_w.assign(d, 0.0);
  p.t.head_b = 0.0;
  return p;
}

namespace {

struct Activations {
  std::vector<double> pooled;               // d
  std::vector<std::vector<double>> hidden;  // L x d, tanh outputs
  double reward = 0.0;
};

void mean_pool(const ScorerParams& p, std::span<const int> ids, std::vector<double>& out) {
  const auto d = static_cast<std::size_t>(p.hyper.d);
  out.assign(d, 0.0);
  if (ids.empty()) return;
  for (int id : ids) {
    assert(id >= 0 && static_cast<std::size_t>(id) < p.vocab);
    const double* row = &p.t.embedding[static_cast<std::size_t>(id) * d];
    for (std::size_t k = 0; k < d; ++k) out[k] += row[k];
  }
  const double inv = 1.0 / static_cast<double>(ids.size());
  for (auto& v : out) v *= inv;
}

Activations run_forward(const ScorerParams& p, std::span<const int> ids) {
  const auto d = static_cast<std::size_t>(p.hyper.d);
  Activations act;
  mean_pool(p, ids, act.pooled);
  const std::vector<double>* h = &act.pooled;
  act.hidden.resize(p.t.layers.size());
  for (std::size_t l = 0; l < p.t.layers.size(); ++l) {
    auto& out = act.hidden[l];
    out.assign(d, 0.0);
    const auto& layer = p.t.layers[l];
    for (std::size_t i = 0; i < d; ++i) {
      double acc = layer.bias[i];
      const double* wrow = &layer.weight[i * d];
      for (std::size_t k = 0; k < d; ++k) acc += wrow[k] * (*h)[k];
      out[i] = std::tanh(acc);
    }
    h = &out;
  }
  double r = p.t.head_b;
  for (std::size_t k = 0; k < d; ++k) r += p.t.head_w[k] * (*h)[k];
  act.reward = r;
  return act;
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  // softplus(x) = max(x, 0) + log1p(exp(-|x|))
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// Accumulates d(reward)/d(params) scaled by `scale` for one sequence.
void backprop_side(const ScorerParams& p, std::span<const int> ids, const Activations& act,
                   double scale, ParamTensors& grads) {
  const auto d = static_cast<std::size_t>(p.hyper.d);
  const std::vector<double>& top =
      act.hidden.empty() ? act.pooled : act.hidden.back();

  // Head.
  std::vector<double> dh(d);
  for (std::size_t k = 0; k < d; ++k) {
    grads.head_w[k] += scale * top[k];
    dh[k] = scale * p.t.head_w[k];
  }
  grads.head_b += scale;

  // Mixing layers, top down.
  std::vector<double> da(d), dh_prev(d);
  for (std::size_t l = p.t.layers.size(); l-- > 0;) {
    const auto& hid = act.hidden[l];
    const std::vector<double>& below = (l == 0) ? act.pooled : act.hidden[l - 1];
    const auto& layer = p.t.layers[l];
    auto& glayer = grads.layers[l];
    for (std::size_t i = 0; i < d; ++i) da[i] = dh[i] * (1.0 - hid[i] * hid[i]);
    std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      const double dai = da[i];
      double* gw = &glayer.weight[i * d];
      const double* w = &layer.weight[i * d];
      for (std::size_t k = 0; k < d; ++k) {
        gw[k] += dai * below[k];
        dh_prev[k] += dai * w[k];
      }
      glayer.bias[i] += dai;
    }
    dh = dh_prev;
  }

  // Embeddings through the mean pool.
  if (!ids.empty()) {
    const double inv = 1.0 / static_cast<double>(ids.size());
    for (int id : ids) {
      double* grow = &grads.embedding[static_cast<std::size_t>(id) * d];
      for (std::size_t k = 0; k < d; ++k) grow[k] += dh[k] * inv;
    }
  }
}

}  // namespace

double forward(const ScorerParams& params, std::span<const int> ids) {
  return run_forward(params, ids).reward;
}

GradientBundle backward(const ScorerParams& params, std::span<const PairItem> batch) {
  if (batch.empty()) throw CheckpointError("backward: empty batch");
  GradientBundle g;
  g.t = ParamTensors::zeros_like(params.t);
  double loss_sum = 0.0;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  for (const PairItem& item : batch) {
    Activations act_c = run_forward(params, item.ids_chosen);
    Activations act_r = run_forward(params, item.ids_rejected);
    const double z = act_c.reward - act_r.reward - item.margin;
    loss_sum += stable_softplus(-z);
    // dL/dz = sigma(z) - 1; chosen gets +dL/dz, rejected gets -dL/dz.
    const double dz = (sigmoid(z) - 1.0) * inv_batch;
    backprop_side(params, item.ids_chosen, act_c, dz, g.t);
    backprop_side(params, item.ids_rejected, act_r, -dz, g.t);
  }
  g.loss = loss_sum * inv_batch;
  if (!std::isfinite(g.loss) || !g.t.all_finite()) throw NonFiniteError("backward");
  return g;
}

void save_checkpoint(const std::string& path, const ScorerParams& params,
                     const Tokenizer& tokenizer,
                     const std::map<std::string, std::string>& metadata) {
  nlohmann::json j;
  j["format"] = "critique-rm-checkpoint-v1";
  j["hyper"] = {{"d", params.hyper.d}, {"L", params.hyper.L}, {"seed", params.hyper.seed}};
  j["vocab_size"] = params.vocab;
  j["tokenizer"] = tokenizer.to_json();
  j["embedding"] = params.t.embedding;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : params.t.layers) {
    layers.push_back({{"weight", l.weight}, {"bias", l.bias}});
  }
  j["layers"] = std::move(layers);
  j["head_w"] = params.t.head_w;
  j["head_b"] = params.t.head_b;
  j["metadata"] = metadata;
  j["digest"] = params.digest();
  write_file_atomic(path, j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::string& path) {
  nlohmann::json j = nlohmann::json::parse(read_file(path));
  if (j.value("format", "") != "critique-rm-checkpoint-v1") {
    throw CheckpointError("unknown checkpoint format in " + path);
  }
  Checkpoint ck;
  ck.params.hyper.d = j.at("hyper").at("d").get<int>();
  ck.params.hyper.L = j.at("hyper").at("L").get<int>();
  ck.params.hyper.seed = j.at("hyper").at("seed").get<std::uint64_t>();
  ck.params.vocab = j.at("vocab_size").get<std::size_t>();
  ck.tokenizer = Tokenizer::from_json(j.at("tokenizer"));
  ck.params.t.embedding = j.at("embedding").get<std::vector<double>>();
  for (const auto& l : j.at("layers")) {
    MixLayer layer;
    layer.weight = l.at("weight").get<std::vector<double>>();
    layer.bias = l.at("bias").get<std::vector<double>>();
    ck.params.t.layers.push_back(std::move(layer));
  }
  ck.params.t.head_w = j.at("head_w").get<std::vector<double>>();
  ck.params.t.head_b = j.at("head_b").get<double>();
  if (j.contains("metadata")) {
    ck.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
  }
  const auto d = static_cast<std::size_t>(ck.params.hyper.d);
  if (ck.params.t.embedding.size() != ck.params.vocab * d ||
      ck.params.t.head_w.size() != d ||
      ck.params.t.layers.size() != static_cast<std::size_t>(ck.params.hyper.L) ||
      ck.tokenizer.vocab_size() != ck.params.vocab) {
    throw CheckpointError("checkpoint shape mismatch in " + path);
  }
  std::string expected = j.at("digest").get<std::string>();
  if (ck.params.digest() != expected) {
    throw CheckpointError("checkpoint digest mismatch in " + path + " (expected " + expected +
                          ", got " + ck.params.digest() + ")");
  }
  return ck;
}

}  // namespace crm
