#include "bobnet/volume.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "bobnet/errors.hpp"
#include "bobnet/io_util.hpp"

namespace bobnet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream iss(s);
  std::vector<std::string> out;
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

long parse_long(const std::string& tok, const std::string& context) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(tok, &pos);
  } catch (const std::exception&) {
    throw FormatError(context + ": not an integer: '" + tok + "'");
  }
  if (pos != tok.size()) throw FormatError(context + ": not an integer: '" + tok + "'");
  return v;
}

double parse_double(const std::string& tok, const std::string& context) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw FormatError(context + ": not a number: '" + tok + "'");
  }
  if (pos != tok.size()) throw FormatError(context + ": not a number: '" + tok + "'");
  return v;
}

std::string format_spacing(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<char> read_all_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw FormatError("ElementDataFile: cannot open raw file: " + path.string());
  const std::streamsize n = is.tellg();
  is.seekg(0);
  std::vector<char> bytes(static_cast<std::size_t>(n));
  if (n > 0 && !is.read(bytes.data(), n)) throw FormatError("ElementDataFile: cannot read raw file: " + path.string());
  return bytes;
}

}  // namespace

Volume3D load_volume(const std::filesystem::path& header_path) {
  std::ifstream is(header_path);
  if (!is) throw FormatError("cannot open header: " + header_path.string());

  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("malformed header line (missing '='): " + line);
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  auto require = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("missing key: ") + key);
    return it->second;
  };

  if (require("ObjectType") != "Image") throw FormatError("ObjectType: expected 'Image'");
  if (parse_long(require("NDims"), "NDims") != 3) throw FormatError("NDims: expected 3");

  const auto dim_toks = split_ws(require("DimSize"));
  if (dim_toks.size() != 3) throw FormatError("DimSize: expected three extents");
  Volume3D vol;
  for (int i = 0; i < 3; ++i) {
    const long d = parse_long(dim_toks[i], "DimSize");
    if (d < 1) throw FormatError("DimSize: extents must be positive");
    vol.dims[i] = static_cast<std::size_t>(d);
  }

  const auto sp_toks = split_ws(require("ElementSpacing"));
  if (sp_toks.size() != 3) throw FormatError("ElementSpacing: expected three spacings");
  for (int i = 0; i < 3; ++i) {
    vol.spacing_mm[i] = parse_double(sp_toks[i], "ElementSpacing");
    if (!(vol.spacing_mm[i] > 0)) throw FormatError("ElementSpacing: spacings must be positive");
  }

  const std::string& elem_type = require("ElementType");
  if (elem_type != "MET_SHORT" && elem_type != "MET_FLOAT")
    throw FormatError("ElementType: expected MET_SHORT or MET_FLOAT, got '" + elem_type + "'");

  const std::filesystem::path raw_path = header_path.parent_path() / require("ElementDataFile");
  const std::vector<char> bytes = read_all_bytes(raw_path);

  const std::size_t n = vol.voxel_count();
  const std::size_t elem_size = (elem_type == "MET_SHORT") ? 2 : 4;
  if (bytes.size() != n * elem_size) {
    throw FormatError("DimSize: raw byte count mismatch for " + raw_path.string() + ": expected " +
                      std::to_string(n * elem_size) + " bytes, got " + std::to_string(bytes.size()));
  }

  vol.voxels.resize(n);
  const auto* b = reinterpret_cast<const unsigned char*>(bytes.data());
  if (elem_type == "MET_SHORT") {
    for (std::size_t i = 0; i < n; ++i) vol.voxels[i] = static_cast<float>(io::decode_i16le(b + 2 * i));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = static_cast<std::uint32_t>(b[4 * i]) | (static_cast<std::uint32_t>(b[4 * i + 1]) << 8) |
                           (static_cast<std::uint32_t>(b[4 * i + 2]) << 16) |
                           (static_cast<std::uint32_t>(b[4 * i + 3]) << 24);
      float v;
      std::memcpy(&v, &bits, 4);
      vol.voxels[i] = v;
    }
  }
  return vol;
}

void write_volume(const Volume3D& volume, const std::filesystem::path& header_path) {
  if (volume.voxels.size() != volume.voxel_count())
    throw std::invalid_argument("write_volume: voxel count does not match dims");
  std::filesystem::path raw_path = header_path;
  raw_path.replace_extension(".raw");

  {
    std::ofstream os(raw_path, std::ios::binary);
    if (!os) throw FormatError("cannot open raw file for writing: " + raw_path.string());
    io::write_f32le_array(os, volume.voxels.data(), volume.voxels.size());
    if (!os) throw FormatError("failed writing raw file: " + raw_path.string());
  }
  {
    std::ofstream os(header_path);
    if (!os) throw FormatError("cannot open header for writing: " + header_path.string());
    os << "ObjectType = Image\n";
    os << "NDims = 3\n";
    os << "DimSize = " << volume.dims[0] << ' ' << volume.dims[1] << ' ' << volume.dims[2] << '\n';
    os << "ElementSpacing = " << format_spacing(volume.spacing_mm[0]) << ' ' << format_spacing(volume.spacing_mm[1])
       << ' ' << format_spacing(volume.spacing_mm[2]) << '\n';
    os << "ElementType = MET_FLOAT\n";
    os << "ElementDataFile = " << raw_path.filename().string() << '\n';
    if (!os) throw FormatError("failed writing header: " + header_path.string());
  }
}

std::vector<BBox3D> load_boxes(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open boxes file: " + path.string());
  std::vector<BBox3D> boxes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    const std::string ctx = path.filename().string() + ":" + std::to_string(line_no);
    if (toks.size() < 7) throw FormatError(ctx + ": expected 'name x_lo x_hi y_lo y_hi z_lo z_hi'");
    if (toks.size() > 7) throw FormatError(ctx + ": unexpected trailing token '" + toks[7] + "'");
    BBox3D box;
    box.structure_name = toks[0];
    for (int axis = 0; axis < 3; ++axis) {
      box.lo[axis] = parse_long(toks[1 + 2 * axis], ctx);
      box.hi[axis] = parse_long(toks[2 + 2 * axis], ctx);
      if (box.hi[axis] < box.lo[axis])
        throw FormatError(ctx + ": hi < lo on axis " + std::string(1, "xyz"[axis]) + " for '" +
                          box.structure_name + "'");
    }
    boxes.push_back(std::move(box));
  }
  return boxes;
}

void write_boxes(const std::vector<BBox3D>& boxes, const std::filesystem::path& path,
                 const std::vector<std::string>& not_found) {
  std::ofstream os(path);
  if (!os) throw FormatError("cannot open boxes file for writing: " + path.string());
  for (const auto& b : boxes) {
    os << b.structure_name << ' ' << b.lo[0] << ' ' << b.hi[0] << ' ' << b.lo[1] << ' ' << b.hi[1] << ' '
       << b.lo[2] << ' ' << b.hi[2] << '\n';
  }
  for (const auto& name : not_found) os << "# " << name << " not found\n";
  if (!os) throw FormatError("failed writing boxes file: " + path.string());
}

void validate_boxes(std::vector<BBox3D>& boxes, const Volume3D& volume) {
  for (auto& b : boxes) {
    for (int axis = 0; axis < 3; ++axis) {
      if (b.lo[axis] < 0 || b.hi[axis] < b.lo[axis] || b.hi[axis] >= static_cast<long>(volume.dims[axis]))
        throw std::invalid_argument("box '" + b.structure_name + "' violates volume extents on axis " +
                                    std::string(1, "xyz"[axis]));
    }
    b.spacing_mm = volume.spacing_mm;
  }
}

}  // namespace bobnet
