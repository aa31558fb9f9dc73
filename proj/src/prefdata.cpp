// SPDX-License-Identifier: Apache-2.0
#include "critique_rm/prefdata.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "critique_rm/jsonl.hpp"
#include "critique_rm/rng.hpp"

namespace crm {

const char* to_string(Role role) { return role == Role::kUser ? "user" : "chatbot"; }
const char* to_string(Side side) { return side == Side::kChosen ? "chosen" : "rejected"; }

const char* to_string(Rating rating) {
  switch (rating) {
    case Rating::kSlightlyBetter: return "slightly_better";
    case Rating::kBetter: return "better";
    case Rating::kSignificantlyBetter: return "significantly_better";
  }
  return "slightly_better";
}

Role role_from_string(const std::string& s) {
  if (s == "user") return Role::kUser;
  if (s == "chatbot") return Role::kChatbot;
  throw SchemaViolationError("role", "unknown role '" + s + "'");
}

Side side_from_string(const std::string& s) {
  if (s == "chosen") return Side::kChosen;
  if (s == "rejected") return Side::kRejected;
  throw SchemaViolationError("side", "unknown side '" + s + "'");
}

Rating rating_from_string(const std::string& s) {
  if (s == "slightly_better") return Rating::kSlightlyBetter;
  if (s == "better") return Rating::kBetter;
  if (s == "significantly_better") return Rating::kSignificantlyBetter;
  throw SchemaViolationError("rating", "unknown rating '" + s + "'");
}

void MarginMap::validate() const {
  if (slightly_better < 0.0 || better < slightly_better || significantly_better < better) {
    throw InvalidMarginMapError();
  }
}

nlohmann::json to_json(const Message& m) {
  return {{"role", to_string(m.role)}, {"content", m.content}};
}

nlohmann::json to_json(const PreferenceExample& ex) {
  nlohmann::json prompt = nlohmann::json::array();
  for (const auto& m : ex.prompt) prompt.push_back(to_json(m));
  nlohmann::json j{{"id", ex.id},
                   {"prompt", std::move(prompt)},
                   {"chosen", ex.chosen},
                   {"rejected", ex.rejected}};
  j["rating"] = ex.rating ? nlohmann::json(to_string(*ex.rating)) : nlohmann::json(nullptr);
  j["category"] = ex.category ? nlohmann::json(*ex.category) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const Critique& c) {
  return {{"example_id", c.example_id},
          {"side", to_string(c.side)},
          {"text", c.text},
          {"generator", c.generator},
          {"template_version", c.template_version}};
}

namespace {

const nlohmann::json& require_field(const nlohmann::json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end()) throw SchemaViolationError(field, "missing");
  return *it;
}

std::string require_string(const nlohmann::json& j, const char* field) {
  const auto& v = require_field(j, field);
  if (!v.is_string()) throw SchemaViolationError(field, "expected string");
  return v.get<std::string>();
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

}  // namespace

Message message_from_json(const nlohmann::json& j) {
  Message m;
  m.role = role_from_string(require_string(j, "role"));
  m.content = require_string(j, "content");
  return m;
}

PreferenceExample example_from_json(const nlohmann::json& j) {
  PreferenceExample ex;
  ex.id = require_string(j, "id");
  const auto& prompt = require_field(j, "prompt");
  if (!prompt.is_array()) throw SchemaViolationError("prompt", "expected array");
  for (const auto& m : prompt) ex.prompt.push_back(message_from_json(m));
  ex.chosen = require_string(j, "chosen");
  ex.rejected = require_string(j, "rejected");
  if (j.contains("rating") && !j["rating"].is_null()) {
    if (!j["rating"].is_string()) throw SchemaViolationError("rating", "expected string or null");
    ex.rating = rating_from_string(j["rating"].get<std::string>());
  }
  if (j.contains("category") && !j["category"].is_null()) {
    if (!j["category"].is_string()) throw SchemaViolationError("category", "expected string or null");
    ex.category = j["category"].get<std::string>();
  }
  return ex;
}

Critique critique_from_json(const nlohmann::json& j) {
  Critique c;
  c.example_id = require_string(j, "example_id");
  c.side = side_from_string(require_string(j, "side"));
  c.text = require_string(j, "text");
  if (c.text.empty()) throw SchemaViolationError("text", "empty critique text");
  c.generator = require_string(j, "generator");
  c.template_version = require_string(j, "template_version");
  return c;
}

void validate_example(const PreferenceExample& ex) {
  if (ex.id.empty()) throw SchemaViolationError("id", "empty id");
  if (ex.prompt.empty()) throw SchemaViolationError("prompt", "prompt must have >= 1 message");
  for (std::size_t i = 0; i < ex.prompt.size(); ++i) {
    const auto& m = ex.prompt[i];
    if (is_blank(m.content)) throw SchemaViolationError("content", "blank message content");
    Role expected = (i % 2 == 0) ? Role::kUser : Role::kChatbot;
    if (m.role != expected) {
      throw SchemaViolationError("role", "roles must alternate starting with user");
    }
  }
  if (ex.prompt.back().role != Role::kUser) {
    throw SchemaViolationError("prompt", "last prompt message must have role user");
  }
  if (ex.chosen == ex.rejected) {
    throw SchemaViolationError("rejected", "chosen and rejected are byte-identical");
  }
}

std::vector<PreferenceExample> load_dataset(const std::string& path) {
  std::vector<PreferenceExample> out;
  std::set<std::string> seen;
  for_each_jsonl_line(path, [&](std::size_t line_no, const nlohmann::json& obj) {
    if (!obj.is_object()) throw MalformedLineError(line_no);
    PreferenceExample ex = example_from_json(obj);
    validate_example(ex);
    if (!seen.insert(ex.id).second) throw DuplicateIdError(ex.id);
    out.push_back(std::move(ex));
  });
  return out;
}

void save_dataset(const std::string& path, const std::vector<PreferenceExample>& examples) {
  std::vector<nlohmann::json> rows;
  rows.reserve(examples.size());
  for (const auto& ex : examples) rows.push_back(to_json(ex));
  write_jsonl(path, rows);
}

DatasetManifest manifest_of(const std::string& path,
                            const std::vector<PreferenceExample>& examples,
                            std::optional<std::int64_t> seed) {
  DatasetManifest man;
  man.path = path;
  man.n_examples = examples.size();
  man.seed = seed;
  for (const auto& ex : examples) {
    man.categories[ex.category.value_or("uncategorized")]++;
    if (ex.rating) man.has_ratings = true;
  }
  return man;
}

double margin_of(const std::optional<Rating>& rating, const MarginMap& margins) {
  margins.validate();
  if (!rating) return 0.0;
  switch (*rating) {
    case Rating::kSlightlyBetter: return margins.slightly_better;
    case Rating::kBetter: return margins.better;
    case Rating::kSignificantlyBetter: return margins.significantly_better;
  }
  return 0.0;
}

std::vector<std::vector<PreferenceExample>> split_dataset(
    const std::vector<PreferenceExample>& examples, const std::vector<double>& fractions,
    std::uint64_t seed) {
  if (fractions.empty()) throw BadFractionsError("empty fraction list");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw BadFractionsError("fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw BadFractionsError("fractions must sum to 1");

  std::vector<PreferenceExample> shuffled = examples;
  DetRng rng(seed);
  rng.shuffle(shuffled);

  // Largest-remainder apportionment of |examples| over the fractions.
  const std::size_t n = shuffled.size();
  std::vector<std::size_t> sizes(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    double exact = fractions[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += sizes[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) {
    sizes[remainders[k % remainders.size()].second]++;
  }

  std::vector<std::vector<PreferenceExample>> parts;
  std::size_t pos = 0;
  for (std::size_t s : sizes) {
    parts.emplace_back(shuffled.begin() + static_cast<std::ptrdiff_t>(pos),
                       shuffled.begin() + static_cast<std::ptrdiff_t>(pos + s));
    pos += s;
  }
  return parts;
}

namespace {

std::string full_key(const Critique& c) {
  std::ostringstream os;
  os << c.example_id << '\x1f' << to_string(c.side) << '\x1f' << c.generator << '\x1f'
     << c.template_version;
  return os.str();
}

std::string side_key(const std::string& example_id, Side side) {
  return example_id + '\x1f' + to_string(side);
}

}  // namespace

void CritiqueStore::insert(Critique c) {
  if (c.text.empty()) throw SchemaViolationError("text", "empty critique text");
  std::string key = full_key(c);
  if (by_full_key_.count(key)) {
    throw SchemaViolationError("example_id", "duplicate critique key " + key);
  }
  by_full_key_[key] = items_.size();
  by_side_key_.emplace(side_key(c.example_id, c.side), items_.size());
  items_.push_back(std::move(c));
}

const Critique* CritiqueStore::find(const std::string& example_id, Side side) const {
  auto it = by_side_key_.find(side_key(example_id, side));
  return it == by_side_key_.end() ? nullptr : &items_[it->second];
}

std::vector<std::string> CritiqueStore::generators() const {
  std::set<std::string> uniq;
  for (const auto& c : items_) uniq.insert(c.generator);
  return {uniq.begin(), uniq.end()};
}

std::vector<Critique> CritiqueStore::sorted_items() const {
  std::vector<Critique> out = items_;
  std::sort(out.begin(), out.end(), [](const Critique& a, const Critique& b) {
    if (a.example_id != b.example_id) return a.example_id < b.example_id;
    return static_cast<int>(a.side) < static_cast<int>(b.side);
  });
  return out;
}

CritiqueStore CritiqueStore::load(const std::string& path) {
  CritiqueStore store;
  for_each_jsonl_line(path, [&](std::size_t line_no, const nlohmann::json& obj) {
    if (!obj.is_object()) throw MalformedLineError(line_no);
    store.insert(critique_from_json(obj));
  });
  return store;
}

void CritiqueStore::save(const std::string& path) const {
  std::vector<nlohmann::json> rows;
  rows.reserve(items_.size());
  for (const auto& c : sorted_items()) rows.push_back(to_json(c));
  write_jsonl(path, rows);
}

}  // namespace crm
