#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bobnet/rng.hpp"
#include "bobnet/tensor.hpp"
#include "bobnet/volume.hpp"

namespace bobnet {

// Viewing planes, identified by their normal axis: sagittal slices are
// indexed along x, coronal along y, axial along z.
enum class Plane : int { Sagittal = 0, Coronal = 1, Axial = 2 };

inline constexpr Plane kAllPlanes[3] = {Plane::Sagittal, Plane::Coronal, Plane::Axial};

const char* plane_name(Plane p);
Plane plane_from_name(const std::string& name);  // throws FormatError on unknown name

// In-plane axes in (x,y,z) order: the slice's first pixel axis is the lower
// volume axis, the second the higher one.
inline std::array<int, 2> in_plane_axes(Plane p) {
  switch (p) {
    case Plane::Sagittal: return {1, 2};
    case Plane::Coronal: return {0, 2};
    default: return {0, 1};
  }
}

// One 2D plane extracted from a volume. pixels is row-major with the first
// in-plane axis as rows: pixel (u,v) of axial slice k is voxel (u,v,k).
struct Slice2D {
  Plane plane = Plane::Axial;
  std::size_t index = 0;
  std::size_t height = 0, width = 0;
  std::array<double, 2> pixel_spacing_mm{1.0, 1.0};
  std::vector<float> pixels;

  float& at(std::size_t u, std::size_t v) { return pixels[u * width + v]; }
  float at(std::size_t u, std::size_t v) const { return pixels[u * width + v]; }
};

struct SliceLabel {
  std::vector<std::uint8_t> presence;  // one flag per structure
};

struct LabeledSlice {
  Slice2D slice;
  std::vector<std::uint8_t> presence;
};

Slice2D extract_slice(const Volume3D& volume, Plane plane, std::size_t index);
std::vector<Slice2D> extract_slices(const Volume3D& volume, Plane plane);

// Bilinear in-plane resample to an isotropic target spacing. The new extent
// is round(extent * spacing / target); slice counts along plane normals are
// never touched because only 2D slices are resampled.
Slice2D resample_slice(const Slice2D& slice, double target_mm);

// Clamp to [-1000, 1000] then map affinely to [-1, 1].
Slice2D normalize_intensity(const Slice2D& slice);

// A structure is present in a slice iff the slice index lies inside the
// box's extent along the plane normal, boundaries included.
SliceLabel label_slice(const Slice2D& slice, const std::vector<BBox3D>& boxes);

// Rotation about the slice center with bilinear resampling; pixels falling
// outside the source frame take `fill`.
Slice2D rotate_slice(const Slice2D& slice, double angle_deg, float fill = -1.0f);

// Training augmentation: rotation angle uniform in [-10, +10] degrees.
Slice2D rotate_augment(const Slice2D& slice, Rng& rng);

struct Minibatch {
  Tensor32 images;  // [B,1,H,W]
  std::vector<std::vector<std::uint8_t>> labels;
  std::size_t target_h = 0, target_w = 0;
};

// Batch assembly with per-batch size selection: the target height/width are
// drawn from the first/third nearest-rank quartiles of the batch dimensions,
// clamped to min_input, and every slice is random-offset cropped or padded
// (fill -1) to that size. Cropping can never remove more than
// (original - Q1) pixels per dimension.
Minibatch make_minibatch(const std::vector<const LabeledSlice*>& slices, Rng& rng, std::size_t min_input = 224);

// Nearest-rank quantile: value at position ceil(q*n), 1-based.
std::size_t nearest_rank_quantile(std::vector<std::size_t> values, double q);

// Pads a normalized slice to at least min_h x min_w (centered, fill value
// -1) and shapes it as a [1,H,W] network input.
Tensor32 slice_to_input(const Slice2D& slice, std::size_t min_h = 64, std::size_t min_w = 64);

struct DatasetSplit {
  std::vector<std::string> train, val, test;
};

// Volume-level 50/50 train/test split with 10% of the training pool held
// out for validation. Requires at least 10 ids.
DatasetSplit split_dataset(std::vector<std::string> ids, Rng& rng);

// split.txt: one `<id> train|val|test` line per volume.
void write_split(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit load_split(const std::filesystem::path& path);

}  // namespace bobnet
