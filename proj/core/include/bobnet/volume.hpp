#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace bobnet {

// Axis-aligned 3D scalar image, x-fastest voxel layout, per-axis physical
// spacing in millimetres.
struct Volume3D {
  std::array<std::size_t, 3> dims{0, 0, 0};        // X, Y, Z
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};  // sx, sy, sz
  std::vector<float> voxels;

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + dims[0] * (y + dims[1] * z);
  }
  float& at(std::size_t x, std::size_t y, std::size_t z) { return voxels[index(x, y, z)]; }
  float at(std::size_t x, std::size_t y, std::size_t z) const { return voxels[index(x, y, z)]; }
  std::size_t voxel_count() const { return dims[0] * dims[1] * dims[2]; }
};

// Inclusive voxel-index extents of one structure.
struct BBox3D {
  std::string structure_name;
  std::array<long, 3> lo{0, 0, 0};
  std::array<long, 3> hi{0, 0, 0};
  std::array<double, 3> spacing_mm{1.0, 1.0, 1.0};

  std::array<double, 3> center() const {
    return {(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0, (lo[2] + hi[2]) / 2.0};
  }
  bool operator==(const BBox3D&) const = default;
};

// MetaImage subset reader: plain-text .mhd header next to a raw
// little-endian payload, MET_SHORT or MET_FLOAT, x-fastest.
Volume3D load_volume(const std::filesystem::path& header_path);

// Writes <header_path> plus a sibling .raw payload as MET_FLOAT.
void write_volume(const Volume3D& volume, const std::filesystem::path& header_path);

// Box annotation format: one `name x_lo x_hi y_lo y_hi z_lo z_hi` line per
// box, '#' comments. Loaded boxes carry unit spacing until validated against
// their volume.
std::vector<BBox3D> load_boxes(const std::filesystem::path& path);
void write_boxes(const std::vector<BBox3D>& boxes, const std::filesystem::path& path,
                 const std::vector<std::string>& not_found = {});

// Checks 0 <= lo <= hi < dims per axis and stamps the volume spacing onto
// every box. Throws std::invalid_argument on violation.
void validate_boxes(std::vector<BBox3D>& boxes, const Volume3D& volume);

}  // namespace bobnet
