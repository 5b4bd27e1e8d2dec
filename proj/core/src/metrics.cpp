#include "bobnet/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace bobnet {

double f1_score(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (tp == 0 && fp == 0 && fn == 0) return 1.0;
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

namespace {

void require_same_spacing(const BBox3D& a, const BBox3D& b) {
  if (a.spacing_mm != b.spacing_mm)
    throw std::invalid_argument("boxes must share voxel spacing to be compared in mm");
}

}  // namespace

WallDistances wall_distances(const BBox3D& auto_box, const BBox3D& ref_box) {
  require_same_spacing(auto_box, ref_box);
  WallDistances wd;
  for (int axis = 0; axis < 3; ++axis) {
    const double s = auto_box.spacing_mm[axis];
    wd.d[2 * axis] = static_cast<double>(ref_box.lo[axis] - auto_box.lo[axis]) * s;
    wd.d[2 * axis + 1] = static_cast<double>(auto_box.hi[axis] - ref_box.hi[axis]) * s;
  }
  return wd;
}

double centroid_distance(const BBox3D& auto_box, const BBox3D& ref_box) {
  require_same_spacing(auto_box, ref_box);
  const auto ca = auto_box.center();
  const auto cr = ref_box.center();
  double sum = 0.0;
  for (int axis = 0; axis < 3; ++axis) {
    const double d = (ca[axis] - cr[axis]) * auto_box.spacing_mm[axis];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double chi_square1_sf(double x) {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

McNemarResult mcnemar(const std::vector<std::uint8_t>& correct_a, const std::vector<std::uint8_t>& correct_b) {
  if (correct_a.size() != correct_b.size())
    throw std::invalid_argument("mcnemar: correctness sequences must have equal length");
  McNemarResult r;
  for (std::size_t i = 0; i < correct_a.size(); ++i) {
    if (correct_a[i] && !correct_b[i]) ++r.b;
    if (!correct_a[i] && correct_b[i]) ++r.c;
  }
  if (r.b + r.c == 0) {
    r.statistic = 0.0;
    r.p_value = 1.0;
    return r;
  }
  const double diff = std::abs(static_cast<double>(r.b) - static_cast<double>(r.c));
  const double corrected = std::max(diff - 1.0, 0.0);
  r.statistic = corrected * corrected / static_cast<double>(r.b + r.c);
  r.p_value = chi_square1_sf(r.statistic);
  return r;
}

LocalizationReport make_report(const BBox3D& auto_box, const BBox3D& ref_box) {
  LocalizationReport rep;
  rep.structure = ref_box.structure_name;
  rep.walls = wall_distances(auto_box, ref_box);
  double sum = 0.0;
  for (double d : rep.walls.d) sum += std::abs(d);
  rep.mean_abs_wall_mm = sum / 6.0;
  rep.centroid_mm = centroid_distance(auto_box, ref_box);
  return rep;
}

AggregateStats aggregate_reports(const std::vector<LocalizationReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate_reports: at least one report required");
  AggregateStats st;
  st.report_count = reports.size();

  // two-pass mean / population std over |wall| pooled across reports
  double wall_sum = 0.0;
  const std::size_t n_walls = reports.size() * 6;
  for (const auto& r : reports)
    for (double d : r.walls.d) wall_sum += std::abs(d);
  st.wall_mean_mm = wall_sum / static_cast<double>(n_walls);
  double wall_var = 0.0;
  for (const auto& r : reports) {
    for (double d : r.walls.d) {
      const double dev = std::abs(d) - st.wall_mean_mm;
      wall_var += dev * dev;
    }
  }
  st.wall_std_mm = std::sqrt(wall_var / static_cast<double>(n_walls));

  double c_sum = 0.0;
  for (const auto& r : reports) c_sum += r.centroid_mm;
  st.centroid_mean_mm = c_sum / static_cast<double>(reports.size());
  double c_var = 0.0;
  for (const auto& r : reports) {
    const double dev = r.centroid_mm - st.centroid_mean_mm;
    c_var += dev * dev;
  }
  st.centroid_std_mm = std::sqrt(c_var / static_cast<double>(reports.size()));
  return st;
}

}  // namespace bobnet
