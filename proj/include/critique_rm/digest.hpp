// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace crm {

// FNV-1a, 64 bit. Used for cache keys, checkpoint digests and manifest
// input/output digests. Not a security boundary.
class Fnv1a64 {
 public:
  Fnv1a64& update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ull;
    }
    return *this;
  }

  Fnv1a64& update(const void* data, std::size_t n) {
    return update(std::string_view(static_cast<const char*>(data), n));
  }

  Fnv1a64& update_u64(std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    return update(buf, 8);
  }

  Fnv1a64& update_double(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    return update_u64(bits);
  }

  std::uint64_t value() const { return state_; }

  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    std::uint64_t v = state_;
    for (int i = 15; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = digits[v & 0xf];
      v >>= 4;
    }
    return out;
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

inline std::string digest_hex(std::string_view bytes) {
  return Fnv1a64().update(bytes).hex();
}

// Digest of a whole file's bytes; throws std::runtime_error if unreadable.
std::string digest_file(const std::string& path);

}  // namespace crm
