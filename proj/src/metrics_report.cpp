// SPDX-License-Identifier: Apache-2.0
#include "critique_rm/metrics_report.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace crm {

ComparisonGrid build_grid(const std::vector<EvalReport>& reports) {
  ComparisonGrid grid;
  if (reports.empty()) return grid;

  const std::string digest = reports.front().dataset_digest;
  std::set<std::string> categories;
  for (const auto& r : reports) {
    if (r.dataset_digest != digest) throw MixedTestSetsError(digest, r.dataset_digest);
    for (const auto& [name, stats] : r.categories) categories.insert(name);
  }
  grid.columns.assign(categories.begin(), categories.end());
  grid.columns.push_back("avg_score");

  for (const auto& r : reports) {
    GridRow row;
    row.label = r.critique_generator == "none" ? "No-Critiques" : r.critique_generator;
    for (const auto& [name, stats] : r.categories) row.values[name] = stats.accuracy;
    row.values["avg_score"] = r.avg_score;
    grid.rows.push_back(std::move(row));
  }
  std::stable_sort(grid.rows.begin(), grid.rows.end(), [](const GridRow& a, const GridRow& b) {
    const bool a_base = a.label == "No-Critiques";
    const bool b_base = b.label == "No-Critiques";
    if (a_base != b_base) return a_base;
    return a.label < b.label;
  });

  // Competition ranking per column: rank = 1 + #strictly better values.
  for (const auto& col : grid.columns) {
    for (auto& row : grid.rows) {
      auto it = row.values.find(col);
      if (it == row.values.end()) continue;
      int better = 0;
      for (const auto& other : grid.rows) {
        auto jt = other.values.find(col);
        if (jt != other.values.end() && jt->second > it->second) ++better;
      }
      row.ranks[col] = better + 1;
    }
  }
  return grid;
}

std::string ComparisonGrid::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "critiques";
  for (const auto& col : columns) os << ',' << col << ",rank_" << col;
  os << '\n';
  for (const auto& row : rows) {
    os << row.label;
    for (const auto& col : columns) {
      os << ',';
      auto it = row.values.find(col);
      if (it != row.values.end()) os << it->second;
      os << ',';
      auto rt = row.ranks.find(col);
      if (rt != row.ranks.end()) os << rt->second;
    }
    os << '\n';
  }
  return os.str();
}

std::string ComparisonGrid::to_markdown() const {
  std::ostringstream os;
  os << "| Critiques |";
  for (const auto& col : columns) os << ' ' << col << " |";
  os << "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) os << "---|";
  os << '\n';
  for (const auto& row : rows) {
    os << "| " << row.label << " |";
    for (const auto& col : columns) {
      os << ' ';
      auto it = row.values.find(col);
      if (it != row.values.end()) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.4f", it->second);
        os << buf;
        auto rt = row.ranks.find(col);
        if (rt != row.ranks.end() && rt->second <= 2) {
          os << " (" << rt->second << ')';
        }
      } else {
        os << '-';
      }
      os << " |";
    }
    os << '\n';
  }
  return os.str();
}

const char* to_string(CrossoverPoint::Marker marker) {
  switch (marker) {
    case CrossoverPoint::Marker::kInterpolated: return "interpolated";
    case CrossoverPoint::Marker::kBeyondRange: return "beyond_range";
    case CrossoverPoint::Marker::kBelowRange: return "below_range";
  }
  return "interpolated";
}

namespace {

void check_curve(const ScalingCurve& curve, const char* which) {
  if (curve.size() < 2) {
    throw UnsortedCurveError(std::string(which) + " curve needs at least 2 points");
  }
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i].first <= curve[i - 1].first) {
      throw UnsortedCurveError(std::string(which) + " curve sizes must be strictly ascending");
    }
  }
}

}  // namespace

std::vector<CrossoverPoint> crossover(const ScalingCurve& no_critique_curve,
                                      const ScalingCurve& with_critique_curve) {
  check_curve(no_critique_curve, "no-critique");
  check_curve(with_critique_curve, "with-critique");

  std::vector<CrossoverPoint> out;
  out.reserve(with_critique_curve.size());
  for (const auto& [size, score] : with_critique_curve) {
    CrossoverPoint point;
    point.with_size = size;
    point.with_score = score;
    if (score < no_critique_curve.front().second) {
      point.equivalent_size = static_cast<double>(no_critique_curve.front().first);
      point.marker = CrossoverPoint::Marker::kBelowRange;
    } else {
      bool found = false;
      // First point or segment reaching the score, scanning left to right.
      for (std::size_t i = 0; i < no_critique_curve.size() && !found; ++i) {
        if (no_critique_curve[i].second >= score) {
          if (i == 0) {
            point.equivalent_size = static_cast<double>(no_critique_curve[i].first);
          } else {
            const auto& [x0, y0] = no_critique_curve[i - 1];
            const auto& [x1, y1] = no_critique_curve[i];
            const double t = (score - y0) / (y1 - y0);
            point.equivalent_size =
                static_cast<double>(x0) + t * static_cast<double>(x1 - x0);
          }
          point.marker = CrossoverPoint::Marker::kInterpolated;
          found = true;
        }
      }
      if (!found) {
        point.equivalent_size = static_cast<double>(no_critique_curve.back().first);
        point.marker = CrossoverPoint::Marker::kBeyondRange;
      }
    }
    out.push_back(point);
  }
  return out;
}

std::string crossover_csv(const std::vector<CrossoverPoint>& points) {
  std::ostringstream os;
  os.precision(17);
  os << "with_size,with_score,equivalent_no_critique_size,marker\n";
  for (const auto& p : points) {
    os << p.with_size << ',' << p.with_score << ',' << p.equivalent_size << ','
       << to_string(p.marker) << '\n';
  }
  return os.str();
}

}  // namespace crm
