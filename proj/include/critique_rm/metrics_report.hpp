// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "critique_rm/evalharness.hpp"

namespace crm {

struct MixedTestSetsError : std::runtime_error {
  MixedTestSetsError(const std::string& a, const std::string& b)
      : std::runtime_error("reports built on different test sets: " + a + " vs " + b) {}
};

struct UnsortedCurveError : std::runtime_error {
  explicit UnsortedCurveError(const std::string& why) : std::runtime_error(why) {}
};

struct GridRow {
  std::string label;  // "No-Critiques" or the critique generator
  std::map<std::string, double> values;  // category accuracies + "avg_score"
  std::map<std::string, int> ranks;      // 1 = best per column; ties share rank
};

struct ComparisonGrid {
  std::vector<std::string> columns;  // sorted categories, then avg_score
  std::vector<GridRow> rows;

  std::string to_csv() const;
  std::string to_markdown() const;
};

// One row per report: No-Critiques first, then generators lexicographic.
// All reports must share the same dataset digest.
ComparisonGrid build_grid(const std::vector<EvalReport>& reports);

using ScalingCurve = std::vector<std::pair<std::size_t, double>>;  // (size, score)

struct CrossoverPoint {
  std::size_t with_size = 0;
  double with_score = 0.0;
  double equivalent_size = 0.0;
  enum class Marker { kInterpolated, kBeyondRange, kBelowRange } marker = Marker::kInterpolated;
};

const char* to_string(CrossoverPoint::Marker marker);

// For each with-critique point, the smallest no-critique size whose
// linearly interpolated score reaches that point's score. Scores above
// the entire no-critique curve get the beyond-range marker.
std::vector<CrossoverPoint> crossover(const ScalingCurve& no_critique_curve,
                                      const ScalingCurve& with_critique_curve);

std::string crossover_csv(const std::vector<CrossoverPoint>& points);

}  // namespace crm
