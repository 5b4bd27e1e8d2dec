#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bobnet/volume.hpp"

namespace bobnet {

struct DetectionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// Harmonic mean of precision and recall. tp=fp=fn=0 counts as vacuously
// perfect (1) so per-slice micro-averaging stays total.
double f1_score(std::size_t tp, std::size_t fp, std::size_t fn);

// Signed per-wall distances in mm, order x_lo, x_hi, y_lo, y_hi, z_lo, z_hi.
// Positive values mean the automatic box extends beyond the reference
// (oversegmentation), negative mean it falls short (undersegmentation).
struct WallDistances {
  std::array<double, 6> d{};
};

WallDistances wall_distances(const BBox3D& auto_box, const BBox3D& ref_box);

// Euclidean distance between box centers, per-axis scaled to mm.
double centroid_distance(const BBox3D& auto_box, const BBox3D& ref_box);

// Upper tail of the chi-square distribution with one degree of freedom.
double chi_square1_sf(double x);

struct McNemarResult {
  std::size_t b = 0;  // a correct, b wrong
  std::size_t c = 0;  // a wrong, b correct
  double statistic = 0.0;
  double p_value = 1.0;
};

// Continuity-corrected McNemar test on paired per-slice correctness:
// statistic = (max(|b-c|-1, 0))^2 / (b+c), p from chi-square(1).
// No discordant pairs gives statistic 0 and p = 1.
McNemarResult mcnemar(const std::vector<std::uint8_t>& correct_a, const std::vector<std::uint8_t>& correct_b);

// One evaluated structure of one scan.
struct LocalizationReport {
  std::string structure;
  WallDistances walls;           // signed, mm
  double mean_abs_wall_mm = 0.0;
  double centroid_mm = 0.0;
};

LocalizationReport make_report(const BBox3D& auto_box, const BBox3D& ref_box);

struct AggregateStats {
  double wall_mean_mm = 0.0;  // over |wall| pooled across all six walls of all reports
  double wall_std_mm = 0.0;   // population standard deviation
  double centroid_mean_mm = 0.0;
  double centroid_std_mm = 0.0;
  std::size_t report_count = 0;
};

AggregateStats aggregate_reports(const std::vector<LocalizationReport>& reports);

}  // namespace bobnet
