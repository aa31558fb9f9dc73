// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace crm {

enum class Role { kUser, kChatbot };
enum class Side { kChosen, kRejected };
enum class Rating { kSlightlyBetter, kBetter, kSignificantlyBetter };

const char* to_string(Role role);
const char* to_string(Side side);
const char* to_string(Rating rating);
Role role_from_string(const std::string& s);
Side side_from_string(const std::string& s);
Rating rating_from_string(const std::string& s);

struct Message {
  Role role = Role::kUser;
  std::string content;

  bool operator==(const Message&) const = default;
};

// One preference pair: multi-turn prompt, chosen/rejected completions,
// optional annotator confidence rating and category tag.
struct PreferenceExample {
  std::string id;
  std::vector<Message> prompt;
  std::string chosen;
  std::string rejected;
  std::optional<Rating> rating;
  std::optional<std::string> category;

  bool operator==(const PreferenceExample&) const = default;
};

// Point-wise critique attached to one side of one example.
struct Critique {
  std::string example_id;
  Side side = Side::kChosen;
  std::string text;
  std::string generator;
  std::string template_version;

  bool operator==(const Critique&) const = default;
};

struct DatasetManifest {
  std::string path;
  std::size_t n_examples = 0;
  std::map<std::string, std::size_t> categories;
  bool has_ratings = false;
  std::optional<std::int64_t> seed;
};

struct MalformedLineError : std::runtime_error {
  std::size_t line_no;
  explicit MalformedLineError(std::size_t line)
      : std::runtime_error("malformed line " + std::to_string(line)), line_no(line) {}
};

struct DuplicateIdError : std::runtime_error {
  std::string id;
  explicit DuplicateIdError(std::string dup)
      : std::runtime_error("duplicate example id: " + dup), id(std::move(dup)) {}
};

struct SchemaViolationError : std::runtime_error {
  std::string field;
  SchemaViolationError(std::string fld, const std::string& detail)
      : std::runtime_error("schema violation in field '" + fld + "': " + detail),
        field(std::move(fld)) {}
};

struct InvalidMarginMapError : std::runtime_error {
  InvalidMarginMapError() : std::runtime_error("margin map must be non-negative and non-decreasing") {}
};

struct BadFractionsError : std::runtime_error {
  explicit BadFractionsError(const std::string& why)
      : std::runtime_error("bad split fractions: " + why) {}
};

// Rating -> margin table. Total over the enum by construction; validated
// for non-negativity and monotonicity on use.
struct MarginMap {
  double slightly_better = 1.0 / 3.0;
  double better = 2.0 / 3.0;
  double significantly_better = 1.0;

  void validate() const;
};

// JSONL codecs (exact wire field names, see module docs/README).
nlohmann::json to_json(const Message& m);
nlohmann::json to_json(const PreferenceExample& ex);
nlohmann::json to_json(const Critique& c);
Message message_from_json(const nlohmann::json& j);
PreferenceExample example_from_json(const nlohmann::json& j);
Critique critique_from_json(const nlohmann::json& j);

// Validates one example against the schema invariants (non-empty content,
// alternating roles starting with user, last prompt role user,
// chosen != rejected).
void validate_example(const PreferenceExample& ex);

std::vector<PreferenceExample> load_dataset(const std::string& path);
void save_dataset(const std::string& path, const std::vector<PreferenceExample>& examples);

DatasetManifest manifest_of(const std::string& path,
                            const std::vector<PreferenceExample>& examples,
                            std::optional<std::int64_t> seed = std::nullopt);

// m(r): margin_map[rating], 0.0 when the rating is absent.
double margin_of(const std::optional<Rating>& rating, const MarginMap& margins);

// Deterministic seeded shuffle, then contiguous partition with
// largest-remainder rounding of the fraction sizes.
std::vector<std::vector<PreferenceExample>> split_dataset(
    const std::vector<PreferenceExample>& examples, const std::vector<double>& fractions,
    std::uint64_t seed);

// Critique collection with (example_id, side, generator, template_version)
// uniqueness. Read-side lookups are by (example_id, side).
class CritiqueStore {
 public:
  void insert(Critique c);
  const Critique* find(const std::string& example_id, Side side) const;
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const std::vector<Critique>& items() const { return items_; }
  std::vector<std::string> generators() const;

  // Sorted by (example_id, side) for deterministic output order.
  std::vector<Critique> sorted_items() const;

  static CritiqueStore load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::vector<Critique> items_;
  std::map<std::string, std::size_t> by_full_key_;
  std::map<std::string, std::size_t> by_side_key_;
};

}  // namespace crm
