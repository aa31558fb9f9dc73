// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "critique_rm/digest.hpp"

namespace crm {

// Deterministic RNG helpers. std::mt19937_64 output is pinned by the
// standard, but std::shuffle and the <random> distributions are not, so
// everything downstream of a seed goes through these.
class DetRng {
 public:
  explicit DetRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, n). Modulo bias is negligible for desk-scale n.
  std::uint64_t next_below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

  // Uniform in [0, 1) with 53 random bits.
  double next_unit() {
    return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
  }

  bool next_bernoulli(double p) { return next_unit() < p; }

  // Box-Muller; one normal per call, the pair's second half is discarded
  // to keep the stream position independent of call parity tricks.
  double next_normal(double mean, double stddev) {
    double u1 = next_unit();
    double u2 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    return mean + stddev * z;
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(next_below(i + 1));
      std::swap(items[i], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Derives a child seed from a parent seed plus string context, so that
// per-example / per-side streams are independent and order-free.
inline std::uint64_t derive_seed(std::uint64_t parent, std::string_view context) {
  Fnv1a64 h;
  h.update_u64(parent);
  h.update(context);
  return h.value();
}

}  // namespace crm
