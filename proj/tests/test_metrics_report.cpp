// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>

#include "critique_rm/metrics_report.hpp"

using namespace crm;

namespace {

EvalReport report_for(const std::string& generator, double avg,
                      std::map<std::string, double> cats = {},
                      const std::string& digest = "d0") {
  EvalReport r;
  r.critique_generator = generator;
  r.avg_score = avg;
  r.dataset_digest = digest;
  for (const auto& [name, acc] : cats) {
    CategoryStats stats;
    stats.n = 100;
    stats.correct = static_cast<std::size_t>(acc * 100.0);
    stats.accuracy = acc;
    r.categories[name] = stats;
  }
  return r;
}

}  // namespace

TEST_CASE("build_grid: single report becomes a single row") {
  auto grid = build_grid({report_for("gen-a", 0.7, {{"chat", 0.7}})});
  REQUIRE(grid.rows.size() == 1);
  CHECK(grid.rows[0].label == "gen-a");
  CHECK(grid.rows[0].values.at("avg_score") == 0.7);
  CHECK(grid.rows[0].ranks.at("avg_score") == 1);
}

TEST_CASE("build_grid: No-Critiques row first, generators lexicographic") {
  auto grid = build_grid({report_for("zeta", 0.5), report_for("none", 0.4),
                          report_for("alpha", 0.6)});
  REQUIRE(grid.rows.size() == 3);
  CHECK(grid.rows[0].label == "No-Critiques");
  CHECK(grid.rows[1].label == "alpha");
  CHECK(grid.rows[2].label == "zeta");
}

TEST_CASE("build_grid: equal scores share rank 1") {
  auto grid = build_grid({report_for("a", 0.6), report_for("b", 0.6)});
  CHECK(grid.rows[0].ranks.at("avg_score") == 1);
  CHECK(grid.rows[1].ranks.at("avg_score") == 1);
}

TEST_CASE("build_grid: ranks match a brute-force sort") {
  std::vector<EvalReport> reports{
      report_for("a", 0.55, {{"chat", 0.9}, {"safety", 0.2}}),
      report_for("b", 0.60, {{"chat", 0.5}, {"safety", 0.7}}),
      report_for("c", 0.45, {{"chat", 0.6}, {"safety", 0.3}}),
  };
  auto grid = build_grid(reports);
  for (const auto& col : grid.columns) {
    std::vector<double> values;
    for (const auto& row : grid.rows) values.push_back(row.values.at(col));
    for (const auto& row : grid.rows) {
      const double v = row.values.at(col);
      const int expected_rank =
          1 + static_cast<int>(std::count_if(values.begin(), values.end(),
                                             [&](double other) { return other > v; }));
      CHECK(row.ranks.at(col) == expected_rank);
    }
  }
}

TEST_CASE("build_grid: mixed test sets are rejected") {
  CHECK_THROWS_AS(build_grid({report_for("a", 0.5, {}, "d0"), report_for("b", 0.5, {}, "d1")}),
                  MixedTestSetsError);
}

TEST_CASE("build_grid: pure function of its inputs") {
  std::vector<EvalReport> reports{report_for("a", 0.5, {{"chat", 0.5}}),
                                  report_for("none", 0.4, {{"chat", 0.4}})};
  CHECK(build_grid(reports).to_csv() == build_grid(reports).to_csv());
  CHECK(build_grid(reports).to_markdown() == build_grid(reports).to_markdown());
}

TEST_CASE("crossover: identical curves map every point to its own size") {
  ScalingCurve curve{{100, 0.5}, {200, 0.7}, {400, 0.9}};
  auto points = crossover(curve, curve);
  REQUIRE(points.size() == 3);
  for (std::size_t i = 0; i < points.size(); ++i) {
    CHECK(points[i].equivalent_size == doctest::Approx(static_cast<double>(curve[i].first)));
    CHECK(points[i].marker == CrossoverPoint::Marker::kInterpolated);
  }
}

TEST_CASE("crossover: linear interpolation midpoint") {
  ScalingCurve no_curve{{100, 0.6}, {200, 0.8}};
  ScalingCurve with_curve{{50, 0.7}, {60, 0.75}};
  auto points = crossover(no_curve, with_curve);
  REQUIRE(points.size() == 2);
  CHECK(points[0].equivalent_size == doctest::Approx(150.0));
  CHECK(points[1].equivalent_size == doctest::Approx(175.0));
}

TEST_CASE("crossover: score above the whole curve gets the beyond-range marker") {
  ScalingCurve no_curve{{100, 0.6}, {200, 0.8}};
  auto points = crossover(no_curve, {{50, 0.95}, {60, 0.7}});
  REQUIRE(points.size() == 2);
  CHECK(points[0].marker == CrossoverPoint::Marker::kBeyondRange);
  CHECK(points[1].marker == CrossoverPoint::Marker::kInterpolated);
}

TEST_CASE("crossover: score below the whole curve clamps to the smallest size") {
  ScalingCurve no_curve{{100, 0.6}, {200, 0.8}};
  auto points = crossover(no_curve, {{50, 0.2}, {60, 0.6}});
  CHECK(points[0].marker == CrossoverPoint::Marker::kBelowRange);
  CHECK(points[0].equivalent_size == 100.0);
  CHECK(points[1].marker == CrossoverPoint::Marker::kInterpolated);
  CHECK(points[1].equivalent_size == 100.0);  // exact hit at the first point
}

TEST_CASE("crossover: monotone on a monotone no-critique curve") {
  ScalingCurve no_curve{{100, 0.50}, {200, 0.62}, {400, 0.71}, {800, 0.83}};
  ScalingCurve with_curve{{50, 0.55}, {100, 0.63}, {200, 0.70}, {400, 0.80}};
  auto points = crossover(no_curve, with_curve);
  for (std::size_t i = 1; i < points.size(); ++i) {
    CHECK(points[i].equivalent_size >= points[i - 1].equivalent_size);
  }
}

TEST_CASE("crossover: unsorted or short curves are rejected") {
  CHECK_THROWS_AS(crossover({{200, 0.5}, {100, 0.6}}, {{10, 0.5}, {20, 0.6}}),
                  UnsortedCurveError);
  CHECK_THROWS_AS(crossover({{100, 0.5}, {200, 0.6}}, {{10, 0.5}}), UnsortedCurveError);
  CHECK_THROWS_AS(crossover({{100, 0.5}}, {{10, 0.5}, {20, 0.6}}), UnsortedCurveError);
}

TEST_CASE("grid CSV and markdown carry rank annotations") {
  auto grid = build_grid({report_for("a", 0.7, {{"chat", 0.7}}),
                          report_for("none", 0.5, {{"chat", 0.5}})});
  auto csv = grid.to_csv();
  CHECK(csv.find("critiques,chat,rank_chat,avg_score,rank_avg_score") == 0);
  auto md = grid.to_markdown();
  CHECK(md.find("| No-Critiques |") != std::string::npos);
  CHECK(md.find("(1)") != std::string::npos);
  CHECK(md.find("(2)") != std::string::npos);
}

TEST_CASE("crossover CSV shape") {
  ScalingCurve no_curve{{100, 0.6}, {200, 0.8}};
  auto csv = crossover_csv(crossover(no_curve, {{50, 0.7}, {60, 0.9}}));
  CHECK(csv.find("with_size,with_score,equivalent_no_critique_size,marker") == 0);
  CHECK(csv.find("beyond_range") != std::string::npos);
}
