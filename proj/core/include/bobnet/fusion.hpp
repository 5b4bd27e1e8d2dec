#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bobnet/model.hpp"
#include "bobnet/slicing.hpp"
#include "bobnet/volume.hpp"

namespace bobnet {

// Per-structure posterior presence probabilities for every slice of the
// three planes; lengths equal the volume extents X, Y, Z.
struct StructureProfile {
  std::vector<float> sagittal;  // indexed i along x
  std::vector<float> coronal;   // indexed j along y
  std::vector<float> axial;     // indexed k along z

  const std::vector<float>& for_plane(Plane p) const {
    switch (p) {
      case Plane::Sagittal: return sagittal;
      case Plane::Coronal: return coronal;
      default: return axial;
    }
  }
  std::vector<float>& for_plane(Plane p) {
    return const_cast<std::vector<float>&>(static_cast<const StructureProfile*>(this)->for_plane(p));
  }
};

struct DetectionProfile {
  std::array<std::size_t, 3> dims{0, 0, 0};
  std::vector<std::string> structure_names;
  std::vector<StructureProfile> per_structure;
};

struct FusionConfig {
  double threshold = 0.5;  // probability threshold t, in (0,1)
  // connectivity is fixed at the 6-neighborhood
};

// Binary occupancy over voxel indices, x-fastest like Volume3D.
struct FusionMask {
  std::array<std::size_t, 3> dims{0, 0, 0};
  std::vector<std::uint8_t> occupancy;

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return x + dims[0] * (y + dims[1] * z); }
  bool at(std::size_t x, std::size_t y, std::size_t z) const { return occupancy[index(x, y, z)] != 0; }
  void set(std::size_t x, std::size_t y, std::size_t z, bool v) { occupancy[index(x, y, z)] = v ? 1 : 0; }
  std::size_t count() const;
  bool operator==(const FusionMask&) const = default;
};

// Voxel (i,j,k) is occupied iff s_i >= t and c_j >= t and a_k >= t.
FusionMask build_mask(const StructureProfile& profile, const std::array<std::size_t, 3>& dims, double threshold);

// Keeps only the 6-connected component with the most voxels; ties go to the
// component whose lexicographically smallest (i,j,k) voxel is smallest. An
// empty mask stays empty.
FusionMask largest_component(const FusionMask& mask);

// Inclusive extents of the occupied voxels; nullopt for an empty mask.
std::optional<BBox3D> mask_to_bbox(const FusionMask& mask, const std::string& structure_name,
                                   const std::array<double, 3>& spacing_mm);

struct LocalizeResult {
  DetectionProfile profile;
  std::vector<std::pair<std::string, std::optional<BBox3D>>> boxes;
  std::size_t slice_count = 0;
  double prediction_seconds = 0.0;  // time spent in per-slice prediction
};

// Full localization: every slice of every plane is resampled, normalized and
// classified; the per-plane probability profiles are thresholded into a mask
// per structure and reduced to its largest component's bounding box.
// Slice predictions are distributed over `workers` threads; results do not
// depend on the worker count.
LocalizeResult localize(const BobNet<float>& model, const Volume3D& volume,
                        const std::vector<std::string>& structure_names, const FusionConfig& config,
                        double target_spacing_mm = 1.5, std::size_t workers = 1);

// Profile CSV: header `plane,slice_index,structure,probability`, six decimal
// digits, rows grouped per structure in sagittal/coronal/axial order.
void write_profile_csv(const DetectionProfile& profile, const std::filesystem::path& path);
void write_profile_csv(const DetectionProfile& profile, std::ostream& os);

struct ProfileRow {
  Plane plane;
  std::size_t slice_index;
  std::string structure;
  double probability;
};

std::vector<ProfileRow> read_profile_csv(const std::filesystem::path& path);

}  // namespace bobnet
