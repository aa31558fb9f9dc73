// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace crm {

// Reads a JSONL file, invoking fn(line_no, parsed) per non-empty line.
// line_no is 1-based. Parse failures are reported through on_bad_line;
// if on_bad_line is empty a std::runtime_error is thrown.
void for_each_jsonl_line(const std::string& path,
                         const std::function<void(std::size_t, const nlohmann::json&)>& fn);

// Writes one compact JSON object per line. Atomic: writes to a temp file
// in the same directory and renames over the target.
void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& rows);

// Atomic whole-file write (temp + rename).
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace crm
