#include "bobnet/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace bobnet {

namespace {

bool inside_shape(const ShapeSpec& shape, std::size_t x, std::size_t y, std::size_t z) {
  const std::array<double, 3> p{static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
  if (shape.kind == ShapeKind::Ellipsoid) {
    double sum = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double d = (p[a] - shape.center[a]) / shape.radii[a];
      sum += d * d;
    }
    return sum <= 1.0;
  }
  // tube: elliptical cross-section, flat ends along the tube axis
  if (std::abs(p[shape.tube_axis] - shape.center[shape.tube_axis]) > shape.radii[shape.tube_axis]) return false;
  double sum = 0.0;
  for (int a = 0; a < 3; ++a) {
    if (a == shape.tube_axis) continue;
    const double d = (p[a] - shape.center[a]) / shape.radii[a];
    sum += d * d;
  }
  return sum <= 1.0;
}

BBox3D shape_box(const ShapeSpec& shape, const std::array<std::size_t, 3>& dims,
                 const std::array<double, 3>& spacing) {
  BBox3D box;
  box.structure_name = shape.name;
  box.spacing_mm = spacing;
  for (int a = 0; a < 3; ++a) {
    box.lo[a] = std::max<long>(0, static_cast<long>(std::ceil(shape.center[a] - shape.radii[a])));
    box.hi[a] = std::min<long>(static_cast<long>(dims[a]) - 1,
                               static_cast<long>(std::floor(shape.center[a] + shape.radii[a])));
  }
  return box;
}

void rasterize(const ShapeSpec& shape, Volume3D& vol) {
  std::array<std::size_t, 3> lo, hi;
  for (int a = 0; a < 3; ++a) {
    const long l = static_cast<long>(std::floor(shape.center[a] - shape.radii[a]));
    const long h = static_cast<long>(std::ceil(shape.center[a] + shape.radii[a]));
    if (l < 0 || h >= static_cast<long>(vol.dims[a]))
      throw std::invalid_argument("phantom shape '" + shape.name + "' exceeds volume dims on axis " +
                                  std::string(1, "xyz"[a]));
    lo[a] = static_cast<std::size_t>(l);
    hi[a] = static_cast<std::size_t>(h);
  }
  for (std::size_t z = lo[2]; z <= hi[2]; ++z)
    for (std::size_t y = lo[1]; y <= hi[1]; ++y)
      for (std::size_t x = lo[0]; x <= hi[0]; ++x)
        if (inside_shape(shape, x, y, z)) vol.at(x, y, z) = static_cast<float>(shape.intensity);
}

}  // namespace

std::pair<Volume3D, std::vector<BBox3D>> gen_phantom(const PhantomSpec& spec, std::uint64_t seed) {
  Volume3D vol;
  vol.dims = spec.dims;
  vol.spacing_mm = spec.spacing_mm;
  vol.voxels.assign(vol.voxel_count(), static_cast<float>(spec.background));

  // distractors first so targets win overlapping voxels
  for (const auto& shape : spec.distractors) rasterize(shape, vol);
  for (const auto& shape : spec.structures) rasterize(shape, vol);

  std::vector<BBox3D> boxes;
  boxes.reserve(spec.structures.size());
  for (const auto& shape : spec.structures) boxes.push_back(shape_box(shape, spec.dims, spec.spacing_mm));

  if (spec.noise_sigma > 0.0) {
    Rng rng(seed);
    for (float& v : vol.voxels) v += static_cast<float>(spec.noise_sigma * rng.normal());
  }
  return {std::move(vol), std::move(boxes)};
}

PhantomSpec randomize_phantom(const PhantomRandomizer& ranges, Rng& rng) {
  PhantomSpec spec;
  spec.dims = ranges.dims;
  spec.spacing_mm = ranges.spacing_mm;
  spec.background = ranges.background;

  auto centered = [&](const std::array<double, 3>& radii) {
    std::array<double, 3> c;
    for (int a = 0; a < 3; ++a) {
      const long r = static_cast<long>(std::ceil(radii[a]));
      const long lo = r + 1;
      const long hi = static_cast<long>(ranges.dims[a]) - 2 - r;
      if (hi < lo) throw std::invalid_argument("randomize_phantom: volume too small for configured radii");
      c[a] = static_cast<double>(rng.uniform_int(lo, hi));
    }
    return c;
  };

  // The scene is always the full two-structure layout; label flags only pick
  // which shapes are annotated, so the voxel data is identical for a given
  // seed whatever the label selection. The two prototypes are kept disjoint
  // (rejection on expanded bounding boxes): overlap resolution would
  // otherwise depend on render order, which follows the label partition.
  ShapeSpec heart;
  heart.name = "heart";
  heart.kind = ShapeKind::Ellipsoid;
  for (int a = 0; a < 3; ++a)
    heart.radii[a] = static_cast<double>(rng.uniform_int(ranges.heart_radius[0], ranges.heart_radius[1]));
  heart.center = centered(heart.radii);
  heart.intensity = static_cast<double>(rng.uniform_int(ranges.heart_intensity[0], ranges.heart_intensity[1]));

  ShapeSpec aorta;
  aorta.name = "aorta";
  aorta.kind = ShapeKind::Tube;
  aorta.tube_axis = 2;
  aorta.radii[0] = static_cast<double>(rng.uniform_int(ranges.aorta_cross_radius[0], ranges.aorta_cross_radius[1]));
  aorta.radii[1] = static_cast<double>(rng.uniform_int(ranges.aorta_cross_radius[0], ranges.aorta_cross_radius[1]));
  aorta.radii[2] = static_cast<double>(rng.uniform_int(ranges.aorta_half_length[0], ranges.aorta_half_length[1]));
  aorta.intensity = static_cast<double>(rng.uniform_int(ranges.aorta_intensity[0], ranges.aorta_intensity[1]));
  auto disjoint = [](const ShapeSpec& a, const ShapeSpec& b) {
    for (int axis = 0; axis < 3; ++axis) {
      if (a.center[axis] + a.radii[axis] + 1.0 < b.center[axis] - b.radii[axis] ||
          b.center[axis] + b.radii[axis] + 1.0 < a.center[axis] - a.radii[axis])
        return true;
    }
    return false;
  };
  int attempts = 0;
  do {
    if (++attempts > 100)
      throw std::invalid_argument("randomize_phantom: could not place disjoint structures; enlarge dims");
    aorta.center = centered(aorta.radii);
  } while (!disjoint(heart, aorta));

  const long n_distractors = rng.uniform_int(ranges.distractor_count[0], ranges.distractor_count[1]);
  for (long i = 0; i < n_distractors; ++i) {
    ShapeSpec d;
    d.name = "distractor";
    d.kind = ShapeKind::Ellipsoid;
    for (int a = 0; a < 3; ++a)
      d.radii[a] = static_cast<double>(rng.uniform_int(ranges.distractor_radius[0], ranges.distractor_radius[1]));
    d.center = centered(d.radii);
    d.intensity = static_cast<double>(rng.uniform_int(ranges.distractor_intensity[0], ranges.distractor_intensity[1]));
    spec.distractors.push_back(std::move(d));
  }

  const double contrast = std::min(std::abs(heart.intensity - ranges.background),
                                   std::abs(aorta.intensity - ranges.background));
  spec.noise_sigma = ranges.noise_frac * contrast;

  if (ranges.label_heart) spec.structures.push_back(heart);
  if (ranges.label_aorta) spec.structures.push_back(aorta);
  if (!ranges.label_heart) spec.distractors.push_back(heart);
  if (!ranges.label_aorta) spec.distractors.push_back(aorta);
  return spec;
}

void gen_dataset(const std::filesystem::path& out_dir, std::size_t count, const PhantomRandomizer& ranges,
                 std::uint64_t seed) {
  if (count < 10) throw std::invalid_argument("gen_dataset: at least 10 phantoms required for the split rule");
  std::filesystem::create_directories(out_dir);

  std::vector<std::string> ids;
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "phantom_%03zu", i);
    ids.emplace_back(name);

    Rng rng(derive_seed(seed, i));
    const PhantomSpec spec = randomize_phantom(ranges, rng);
    auto [vol, boxes] = gen_phantom(spec, rng.next_u64());

    const std::filesystem::path dir = out_dir / ids.back();
    std::filesystem::create_directories(dir);
    write_volume(vol, dir / "volume.mhd");
    write_boxes(boxes, dir / "boxes.txt");
  }

  Rng split_rng(derive_seed(seed, 0x73706C6974ULL));  // independent stream for the split
  const DatasetSplit split = split_dataset(ids, split_rng);
  write_split(split, out_dir / "split.txt");
}

}  // namespace bobnet
