#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "bobnet/rng.hpp"
#include "bobnet/slicing.hpp"
#include "bobnet/volume.hpp"

namespace bobnet {

enum class ShapeKind { Ellipsoid, Tube };

// radii gives half-extents per axis. For a tube the component along
// tube_axis is the half-length and the cross-section is the ellipse over the
// other two axes.
struct ShapeSpec {
  std::string name;
  ShapeKind kind = ShapeKind::Ellipsoid;
  std::array<double, 3> center{0, 0, 0};
  std::array<double, 3> radii{1, 1, 1};
  double intensity = 1.0;
  int tube_axis = 2;
};

struct PhantomSpec {
  std::array<std::size_t, 3> dims{64, 64, 64};
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
  double background = 0.0;
  double noise_sigma = 0.0;                // additive Gaussian, applied after rasterization
  std::vector<ShapeSpec> structures;       // labeled targets, each yields a ground-truth box
  std::vector<ShapeSpec> distractors;      // rendered but never labeled
};

// Rasterizes the phantom and derives tight ground-truth boxes
// (lo = ceil(center - radii), hi = floor(center + radii), clipped to dims).
// Deterministic for a given seed.
std::pair<Volume3D, std::vector<BBox3D>> gen_phantom(const PhantomSpec& spec, std::uint64_t seed);

// Randomization ranges for dataset generation. The scene always contains
// both prototype structures (ellipsoid "heart", z-aligned tube "aorta") plus
// distractors; label_heart/label_aorta only choose which of them are
// annotated, so a seed reproduces identical volumes for any label choice.
struct PhantomRandomizer {
  std::array<std::size_t, 3> dims{64, 64, 64};
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};
  bool label_heart = true;
  bool label_aorta = true;
  double background = 0.0;
  double noise_frac = 0.2;  // sigma = noise_frac * min labeled-able contrast

  std::array<long, 2> heart_radius{8, 16};
  std::array<long, 2> heart_intensity{350, 450};
  std::array<long, 2> aorta_cross_radius{5, 9};
  std::array<long, 2> aorta_half_length{16, 28};
  std::array<long, 2> aorta_intensity{650, 750};
  std::array<long, 2> distractor_count{0, 3};
  std::array<long, 2> distractor_radius{3, 6};
  std::array<long, 2> distractor_intensity{150, 250};
};

PhantomSpec randomize_phantom(const PhantomRandomizer& ranges, Rng& rng);

// Writes `count` phantoms (volume.mhd/volume.raw/boxes.txt under
// phantom_### directories) plus split.txt into out_dir. count must be >= 10
// so the split rule applies.
void gen_dataset(const std::filesystem::path& out_dir, std::size_t count, const PhantomRandomizer& ranges,
                 std::uint64_t seed);

}  // namespace bobnet
