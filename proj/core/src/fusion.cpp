#include "bobnet/fusion.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>
#include <tuple>

#include "bobnet/errors.hpp"

namespace bobnet {

std::size_t FusionMask::count() const {
  std::size_t n = 0;
  for (std::uint8_t v : occupancy) n += v;
  return n;
}

FusionMask build_mask(const StructureProfile& profile, const std::array<std::size_t, 3>& dims, double threshold) {
  if (profile.sagittal.size() != dims[0] || profile.coronal.size() != dims[1] || profile.axial.size() != dims[2])
    throw std::invalid_argument("build_mask: profile lengths must equal volume dims");
  FusionMask mask;
  mask.dims = dims;
  mask.occupancy.assign(dims[0] * dims[1] * dims[2], 0);
  const float t = static_cast<float>(threshold);
  std::vector<std::uint8_t> sx(dims[0]), cy(dims[1]), az(dims[2]);
  for (std::size_t i = 0; i < dims[0]; ++i) sx[i] = profile.sagittal[i] >= t;
  for (std::size_t j = 0; j < dims[1]; ++j) cy[j] = profile.coronal[j] >= t;
  for (std::size_t k = 0; k < dims[2]; ++k) az[k] = profile.axial[k] >= t;
  for (std::size_t k = 0; k < dims[2]; ++k) {
    if (!az[k]) continue;
    for (std::size_t j = 0; j < dims[1]; ++j) {
      if (!cy[j]) continue;
      std::uint8_t* row = mask.occupancy.data() + dims[0] * (j + dims[1] * k);
      for (std::size_t i = 0; i < dims[0]; ++i) row[i] = sx[i];
    }
  }
  return mask;
}

FusionMask largest_component(const FusionMask& mask) {
  const auto [X, Y, Z] = std::tuple{mask.dims[0], mask.dims[1], mask.dims[2]};
  FusionMask out;
  out.dims = mask.dims;
  out.occupancy.assign(mask.occupancy.size(), 0);
  if (mask.occupancy.empty()) return out;

  std::vector<std::int32_t> component(mask.occupancy.size(), -1);
  std::vector<std::size_t> sizes;
  std::vector<std::array<std::size_t, 3>> min_voxel;
  std::vector<std::size_t> stack;

  for (std::size_t z = 0; z < Z; ++z) {
    for (std::size_t y = 0; y < Y; ++y) {
      for (std::size_t x = 0; x < X; ++x) {
        const std::size_t start = mask.index(x, y, z);
        if (!mask.occupancy[start] || component[start] >= 0) continue;
        const std::int32_t id = static_cast<std::int32_t>(sizes.size());
        std::size_t count = 0;
        std::array<std::size_t, 3> mv{x, y, z};
        component[start] = id;
        stack.assign(1, start);
        while (!stack.empty()) {
          const std::size_t cur = stack.back();
          stack.pop_back();
          ++count;
          const std::size_t cx = cur % X, cy = (cur / X) % Y, cz = cur / (X * Y);
          const std::array<std::size_t, 3> v{cx, cy, cz};
          if (std::tie(v[0], v[1], v[2]) < std::tie(mv[0], mv[1], mv[2])) mv = v;
          auto visit = [&](std::size_t nidx) {
            if (mask.occupancy[nidx] && component[nidx] < 0) {
              component[nidx] = id;
              stack.push_back(nidx);
            }
          };
          if (cx > 0) visit(cur - 1);
          if (cx + 1 < X) visit(cur + 1);
          if (cy > 0) visit(cur - X);
          if (cy + 1 < Y) visit(cur + X);
          if (cz > 0) visit(cur - X * Y);
          if (cz + 1 < Z) visit(cur + X * Y);
        }
        sizes.push_back(count);
        min_voxel.push_back(mv);
      }
    }
  }
  if (sizes.empty()) return out;

  std::int32_t best = 0;
  for (std::int32_t id = 1; id < static_cast<std::int32_t>(sizes.size()); ++id) {
    if (sizes[id] > sizes[best] ||
        (sizes[id] == sizes[best] &&
         std::tie(min_voxel[id][0], min_voxel[id][1], min_voxel[id][2]) <
             std::tie(min_voxel[best][0], min_voxel[best][1], min_voxel[best][2]))) {
      best = id;
    }
  }
  for (std::size_t i = 0; i < component.size(); ++i) out.occupancy[i] = component[i] == best ? 1 : 0;
  return out;
}

std::optional<BBox3D> mask_to_bbox(const FusionMask& mask, const std::string& structure_name,
                                   const std::array<double, 3>& spacing_mm) {
  BBox3D box;
  box.structure_name = structure_name;
  box.spacing_mm = spacing_mm;
  bool any = false;
  for (std::size_t z = 0; z < mask.dims[2]; ++z) {
    for (std::size_t y = 0; y < mask.dims[1]; ++y) {
      for (std::size_t x = 0; x < mask.dims[0]; ++x) {
        if (!mask.at(x, y, z)) continue;
        const std::array<long, 3> v{static_cast<long>(x), static_cast<long>(y), static_cast<long>(z)};
        if (!any) {
          box.lo = box.hi = v;
          any = true;
        } else {
          for (int a = 0; a < 3; ++a) {
            box.lo[a] = std::min(box.lo[a], v[a]);
            box.hi[a] = std::max(box.hi[a], v[a]);
          }
        }
      }
    }
  }
  if (!any) return std::nullopt;
  return box;
}

LocalizeResult localize(const BobNet<float>& model, const Volume3D& volume,
                        const std::vector<std::string>& structure_names, const FusionConfig& config,
                        double target_spacing_mm, std::size_t workers) {
  if (!(config.threshold > 0.0 && config.threshold < 1.0))
    throw std::invalid_argument("localize: threshold must lie in (0,1)");
  const std::size_t n_structures = model.num_structures();
  if (structure_names.size() != n_structures)
    throw std::invalid_argument("localize: one structure name per model output pair required");

  LocalizeResult result;
  result.profile.dims = volume.dims;
  result.profile.structure_names = structure_names;
  result.profile.per_structure.resize(n_structures);
  for (auto& sp : result.profile.per_structure) {
    sp.sagittal.assign(volume.dims[0], 0.0f);
    sp.coronal.assign(volume.dims[1], 0.0f);
    sp.axial.assign(volume.dims[2], 0.0f);
  }

  struct Task {
    Plane plane;
    std::size_t index;
  };
  std::vector<Task> tasks;
  for (Plane plane : kAllPlanes)
    for (std::size_t i = 0; i < volume.dims[static_cast<int>(plane)]; ++i) tasks.push_back({plane, i});
  result.slice_count = tasks.size();

  auto predict_task = [&](const Task& task) {
    Slice2D slice = normalize_intensity(resample_slice(extract_slice(volume, task.plane, task.index),
                                                       target_spacing_mm));
    const Tensor32 input = slice_to_input(slice);
    const std::vector<float> probs = model.predict_slice(input);
    for (std::size_t n = 0; n < n_structures; ++n)
      result.profile.per_structure[n].for_plane(task.plane)[task.index] = probs[n];
  };

  const auto t0 = std::chrono::steady_clock::now();
  if (workers <= 1) {
    for (const Task& task : tasks) predict_task(task);
  } else {
    // each task writes a distinct profile slot, so plain index striping is
    // race-free and worker-count invariant
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        for (std::size_t t = w; t < tasks.size(); t += workers) predict_task(tasks[t]);
      });
    }
    for (auto& th : pool) th.join();
  }
  result.prediction_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  for (std::size_t n = 0; n < n_structures; ++n) {
    const FusionMask mask = build_mask(result.profile.per_structure[n], volume.dims, config.threshold);
    const FusionMask kept = largest_component(mask);
    result.boxes.emplace_back(structure_names[n], mask_to_bbox(kept, structure_names[n], volume.spacing_mm));
  }
  return result;
}

void write_profile_csv(const DetectionProfile& profile, std::ostream& os) {
  os << "plane,slice_index,structure,probability\n";
  char buf[32];
  for (std::size_t n = 0; n < profile.per_structure.size(); ++n) {
    for (Plane plane : kAllPlanes) {
      const auto& probs = profile.per_structure[n].for_plane(plane);
      for (std::size_t i = 0; i < probs.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.6f", static_cast<double>(probs[i]));
        os << plane_name(plane) << ',' << i << ',' << profile.structure_names[n] << ',' << buf << '\n';
      }
    }
  }
}

void write_profile_csv(const DetectionProfile& profile, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open profile CSV for writing: " + path.string());
  write_profile_csv(profile, os);
  if (!os) throw FormatError("failed writing profile CSV: " + path.string());
}

std::vector<ProfileRow> read_profile_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open profile CSV: " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty profile CSV: " + path.string());
  if (line != "plane,slice_index,structure,probability")
    throw FormatError(path.filename().string() + ": unexpected CSV header '" + line + "'");
  std::vector<ProfileRow> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream iss(line);
    std::string plane, index, structure, prob;
    if (!std::getline(iss, plane, ',') || !std::getline(iss, index, ',') || !std::getline(iss, structure, ',') ||
        !std::getline(iss, prob)) {
      throw FormatError(path.filename().string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    ProfileRow row;
    row.plane = plane_from_name(plane);
    try {
      row.slice_index = std::stoul(index);
      row.probability = std::stod(prob);
    } catch (const std::exception&) {
      throw FormatError(path.filename().string() + ":" + std::to_string(line_no) + ": malformed number");
    }
    row.structure = structure;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace bobnet
