// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "critique_rm/critic_client.hpp"
#include "critique_rm/prefdata.hpp"

namespace crm::test {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("critique_rm_" + tag + "_" + std::to_string(counter_++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return content;
}

inline bool read_file_eq(const std::string& a, const std::string& b) {
  return slurp(a) == slurp(b);
}

inline PreferenceExample make_example(const std::string& id, const std::string& prompt,
                                      const std::string& chosen, const std::string& rejected) {
  PreferenceExample ex;
  ex.id = id;
  ex.prompt.push_back({Role::kUser, prompt});
  ex.chosen = chosen;
  ex.rejected = rejected;
  return ex;
}

// Backend driven by a lambda, with a call counter.
class LambdaBackend : public CriticBackend {
 public:
  using Fn = std::function<std::string(const std::vector<Message>&, const Decoding&)>;
  LambdaBackend(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

  std::string name() const override { return name_; }
  std::string complete(const std::vector<Message>& conversation,
                       const Decoding& decoding) override {
    ++calls_;
    return fn_(conversation, decoding);
  }
  int calls() const { return calls_; }

 private:
  std::string name_;
  Fn fn_;
  int calls_ = 0;
};

}  // namespace crm::test
