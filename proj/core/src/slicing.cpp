#include "bobnet/slicing.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "bobnet/errors.hpp"

namespace bobnet {

namespace {

// Bilinear lookup with edge clamping; caller guarantees u,v within [0,H-1]x[0,W-1]
// up to floating fuzz.
float sample_bilinear(const Slice2D& s, double u, double v) {
  u = std::clamp(u, 0.0, static_cast<double>(s.height - 1));
  v = std::clamp(v, 0.0, static_cast<double>(s.width - 1));
  const std::size_t u0 = std::min(static_cast<std::size_t>(u), s.height - 1);
  const std::size_t v0 = std::min(static_cast<std::size_t>(v), s.width - 1);
  const std::size_t u1 = std::min(u0 + 1, s.height - 1);
  const std::size_t v1 = std::min(v0 + 1, s.width - 1);
  const double fu = u - static_cast<double>(u0);
  const double fv = v - static_cast<double>(v0);
  const double top = s.at(u0, v0) * (1.0 - fv) + s.at(u0, v1) * fv;
  const double bot = s.at(u1, v0) * (1.0 - fv) + s.at(u1, v1) * fv;
  return static_cast<float>(top * (1.0 - fu) + bot * fu);
}

}  // namespace

const char* plane_name(Plane p) {
  switch (p) {
    case Plane::Sagittal: return "sagittal";
    case Plane::Coronal: return "coronal";
    default: return "axial";
  }
}

Plane plane_from_name(const std::string& name) {
  if (name == "sagittal") return Plane::Sagittal;
  if (name == "coronal") return Plane::Coronal;
  if (name == "axial") return Plane::Axial;
  throw FormatError("unknown plane name: '" + name + "'");
}

Slice2D extract_slice(const Volume3D& volume, Plane plane, std::size_t index) {
  const int normal = static_cast<int>(plane);
  if (index >= volume.dims[normal]) throw std::invalid_argument("extract_slice: index beyond volume extent");
  const auto axes = in_plane_axes(plane);
  Slice2D s;
  s.plane = plane;
  s.index = index;
  s.height = volume.dims[axes[0]];
  s.width = volume.dims[axes[1]];
  s.pixel_spacing_mm = {volume.spacing_mm[axes[0]], volume.spacing_mm[axes[1]]};
  s.pixels.resize(s.height * s.width);
  std::array<std::size_t, 3> pos{};
  pos[normal] = index;
  for (std::size_t u = 0; u < s.height; ++u) {
    pos[axes[0]] = u;
    for (std::size_t v = 0; v < s.width; ++v) {
      pos[axes[1]] = v;
      s.at(u, v) = volume.at(pos[0], pos[1], pos[2]);
    }
  }
  return s;
}

std::vector<Slice2D> extract_slices(const Volume3D& volume, Plane plane) {
  std::vector<Slice2D> out;
  const std::size_t count = volume.dims[static_cast<int>(plane)];
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(extract_slice(volume, plane, i));
  return out;
}

Slice2D resample_slice(const Slice2D& slice, double target_mm) {
  if (!(target_mm > 0)) throw std::invalid_argument("resample_slice: target spacing must be positive");
  Slice2D out;
  out.plane = slice.plane;
  out.index = slice.index;
  const double sh = slice.pixel_spacing_mm[0], sw = slice.pixel_spacing_mm[1];
  const long nh = std::llround(static_cast<double>(slice.height) * sh / target_mm);
  const long nw = std::llround(static_cast<double>(slice.width) * sw / target_mm);
  if (nh < 1 || nw < 1) throw std::invalid_argument("resample_slice: resulting extent would be empty");
  out.height = static_cast<std::size_t>(nh);
  out.width = static_cast<std::size_t>(nw);
  out.pixel_spacing_mm = {target_mm, target_mm};
  out.pixels.resize(out.height * out.width);
  // pixel centers are aligned in physical space
  const double ru = target_mm / sh, rv = target_mm / sw;
  for (std::size_t u = 0; u < out.height; ++u) {
    const double su = (static_cast<double>(u) + 0.5) * ru - 0.5;
    for (std::size_t v = 0; v < out.width; ++v) {
      const double sv = (static_cast<double>(v) + 0.5) * rv - 0.5;
      out.at(u, v) = sample_bilinear(slice, su, sv);
    }
  }
  return out;
}

Slice2D normalize_intensity(const Slice2D& slice) {
  Slice2D out = slice;
  for (float& p : out.pixels) p = std::clamp(p, -1000.0f, 1000.0f) / 1000.0f;
  return out;
}

SliceLabel label_slice(const Slice2D& slice, const std::vector<BBox3D>& boxes) {
  const int normal = static_cast<int>(slice.plane);
  SliceLabel label;
  label.presence.reserve(boxes.size());
  const long idx = static_cast<long>(slice.index);
  for (const auto& b : boxes) label.presence.push_back(idx >= b.lo[normal] && idx <= b.hi[normal] ? 1 : 0);
  return label;
}

Slice2D rotate_slice(const Slice2D& slice, double angle_deg, float fill) {
  Slice2D out = slice;
  const double rad = angle_deg * 3.14159265358979323846 / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double cu = (static_cast<double>(slice.height) - 1.0) / 2.0;
  const double cv = (static_cast<double>(slice.width) - 1.0) / 2.0;
  for (std::size_t u = 0; u < slice.height; ++u) {
    for (std::size_t v = 0; v < slice.width; ++v) {
      const double du = static_cast<double>(u) - cu;
      const double dv = static_cast<double>(v) - cv;
      const double su = cu + c * du + s * dv;
      const double sv = cv - s * du + c * dv;
      if (su < 0.0 || su > static_cast<double>(slice.height - 1) || sv < 0.0 ||
          sv > static_cast<double>(slice.width - 1)) {
        out.at(u, v) = fill;
      } else {
        out.at(u, v) = sample_bilinear(slice, su, sv);
      }
    }
  }
  return out;
}

Slice2D rotate_augment(const Slice2D& slice, Rng& rng) {
  const double angle = rng.uniform(-10.0, 10.0);
  return rotate_slice(slice, angle, -1.0f);
}

std::size_t nearest_rank_quantile(std::vector<std::size_t> values, double q) {
  if (values.empty()) throw std::invalid_argument("nearest_rank_quantile: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

namespace {

struct CopyPlan {
  std::size_t src0, dst0, len;
};

CopyPlan plan_dim(std::size_t original, std::size_t target, Rng& rng) {
  CopyPlan p{};
  if (original >= target) {
    p.len = target;
    p.src0 = rng.uniform_index(original - target + 1);
    p.dst0 = 0;
  } else {
    p.len = original;
    p.src0 = 0;
    p.dst0 = rng.uniform_index(target - original + 1);
  }
  return p;
}

}  // namespace

Minibatch make_minibatch(const std::vector<const LabeledSlice*>& slices, Rng& rng, std::size_t min_input) {
  if (slices.empty()) throw std::invalid_argument("make_minibatch: empty batch");
  std::vector<std::size_t> heights, widths;
  heights.reserve(slices.size());
  widths.reserve(slices.size());
  for (const auto* ls : slices) {
    heights.push_back(ls->slice.height);
    widths.push_back(ls->slice.width);
  }
  const std::size_t q1_h = nearest_rank_quantile(heights, 0.25), q3_h = nearest_rank_quantile(heights, 0.75);
  const std::size_t q1_w = nearest_rank_quantile(widths, 0.25), q3_w = nearest_rank_quantile(widths, 0.75);

  Minibatch mb;
  mb.target_h = std::max(rng.uniform_index(2) == 0 ? q1_h : q3_h, min_input);
  mb.target_w = std::max(rng.uniform_index(2) == 0 ? q1_w : q3_w, min_input);
  mb.images = Tensor32({slices.size(), 1, mb.target_h, mb.target_w});
  mb.images.fill(-1.0f);
  mb.labels.reserve(slices.size());
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const Slice2D& s = slices[i]->slice;
    const CopyPlan pu = plan_dim(s.height, mb.target_h, rng);
    const CopyPlan pv = plan_dim(s.width, mb.target_w, rng);
    float* dst = mb.images.ptr() + i * mb.target_h * mb.target_w;
    for (std::size_t u = 0; u < pu.len; ++u) {
      const float* src_row = s.pixels.data() + (pu.src0 + u) * s.width + pv.src0;
      std::copy_n(src_row, pv.len, dst + (pu.dst0 + u) * mb.target_w + pv.dst0);
    }
    mb.labels.push_back(slices[i]->presence);
  }
  return mb;
}

Tensor32 slice_to_input(const Slice2D& slice, std::size_t min_h, std::size_t min_w) {
  const std::size_t h = std::max(slice.height, min_h);
  const std::size_t w = std::max(slice.width, min_w);
  Tensor32 t({1, h, w});
  t.fill(-1.0f);
  const std::size_t off_u = (h - slice.height) / 2;
  const std::size_t off_v = (w - slice.width) / 2;
  for (std::size_t u = 0; u < slice.height; ++u)
    std::copy_n(slice.pixels.data() + u * slice.width, slice.width, t.ptr() + (off_u + u) * w + off_v);
  return t;
}

DatasetSplit split_dataset(std::vector<std::string> ids, Rng& rng) {
  if (ids.size() < 10) throw std::invalid_argument("split_dataset: at least 10 volumes required");
  shuffle(ids, rng);
  const std::size_t train_pool = ids.size() / 2;
  const std::size_t val_count = (train_pool + 9) / 10;  // ceil(10%)
  DatasetSplit split;
  split.val.assign(ids.begin(), ids.begin() + val_count);
  split.train.assign(ids.begin() + val_count, ids.begin() + train_pool);
  split.test.assign(ids.begin() + train_pool, ids.end());
  return split;
}

void write_split(const DatasetSplit& split, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open split file for writing: " + path.string());
  for (const auto& id : split.train) os << id << " train\n";
  for (const auto& id : split.val) os << id << " val\n";
  for (const auto& id : split.test) os << id << " test\n";
  if (!os) throw FormatError("failed writing split file: " + path.string());
}

DatasetSplit load_split(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open split file: " + path.string());
  DatasetSplit split;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::istringstream iss(line);
    std::string id, part, extra;
    if (!(iss >> id)) continue;
    if (!(iss >> part) || (iss >> extra))
      throw FormatError(path.filename().string() + ":" + std::to_string(line_no) + ": expected '<id> train|val|test'");
    if (part == "train") {
      split.train.push_back(id);
    } else if (part == "val") {
      split.val.push_back(id);
    } else if (part == "test") {
      split.test.push_back(id);
    } else {
      throw FormatError(path.filename().string() + ":" + std::to_string(line_no) + ": unknown partition '" + part +
                        "'");
    }
  }
  return split;
}

}  // namespace bobnet
