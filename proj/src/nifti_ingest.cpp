// SPDX-License-Identifier: Apache-2.0
// NIfTI-1 volume ingestion for load_volume_as_sample.
#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hca/errors.hpp"
#include "hca/spine_data.hpp"

namespace hca {
namespace {

struct Volume {
  std::array<int, 3> dims{};
  std::array<double, 3> spacing{};
  std::vector<double> voxels;  // x fastest

  double at(int i, int j, int k) const {
    return voxels[(static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i];
  }
};

template <typename T>
T swap_bytes(T v) {
  auto* b = reinterpret_cast<unsigned char*>(&v);
  std::reverse(b, b + sizeof(T));
  return v;
}

template <typename T>
T read_field(const unsigned char* hdr, std::size_t offset, bool swap) {
  T v;
  std::memcpy(&v, hdr + offset, sizeof(T));
  return swap ? swap_bytes(v) : v;
}

class GzFile {
 public:
  explicit GzFile(const std::filesystem::path& path) : handle_(gzopen(path.string().c_str(), "rb")) {
    if (!handle_) throw IngestionError("cannot open " + path.string());
  }
  ~GzFile() { gzclose(handle_); }
  GzFile(const GzFile&) = delete;
  GzFile& operator=(const GzFile&) = delete;

  bool read(void* dst, std::size_t n) {
    auto* p = static_cast<char*>(dst);
    while (n > 0) {
      const auto chunk = static_cast<unsigned>(std::min<std::size_t>(n, 1u << 30));
      const int got = gzread(handle_, p, chunk);
      if (got <= 0) return false;
      p += got;
      n -= static_cast<std::size_t>(got);
    }
    return true;
  }
  bool skip(std::size_t n) {
    std::vector<char> sink(std::min<std::size_t>(n, 4096));
    while (n > 0) {
      const std::size_t step = std::min(n, sink.size());
      if (!read(sink.data(), step)) return false;
      n -= step;
    }
    return true;
  }

 private:
  gzFile handle_;
};

template <typename T>
void decode_voxels(const std::vector<unsigned char>& raw, bool swap, std::vector<double>& out) {
  const std::size_t n = raw.size() / sizeof(T);
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    T v;
    std::memcpy(&v, raw.data() + i * sizeof(T), sizeof(T));
    out[i] = static_cast<double>(swap ? swap_bytes(v) : v);
  }
}

Volume read_nifti(const std::filesystem::path& path) {
  GzFile file(path);
  std::array<unsigned char, 348> hdr{};
  if (!file.read(hdr.data(), hdr.size())) throw IngestionError("truncated NIfTI header: " + path.string());
  bool swap = false;
  if (read_field<std::int32_t>(hdr.data(), 0, false) != 348) {
    if (read_field<std::int32_t>(hdr.data(), 0, true) != 348) {
      throw IngestionError("not a NIfTI-1 file: " + path.string());
    }
    swap = true;
  }
  if (std::memcmp(hdr.data() + 344, "n+1", 3) != 0) {
    throw IngestionError("only single-file NIfTI-1 (n+1) is supported: " + path.string());
  }
  const auto ndim = read_field<std::int16_t>(hdr.data(), 40, swap);
  if (ndim < 3) throw IngestionError("NIfTI volume has fewer than 3 dimensions: " + path.string());
  Volume vol;
  for (int a = 0; a < 3; ++a) {
    vol.dims[static_cast<std::size_t>(a)] = read_field<std::int16_t>(hdr.data(), 42 + 2 * a, swap);
    vol.spacing[static_cast<std::size_t>(a)] =
        std::abs(read_field<float>(hdr.data(), 80 + 4 * a, swap));
    if (vol.dims[static_cast<std::size_t>(a)] <= 0) throw IngestionError("bad NIfTI dims: " + path.string());
  }
  const auto datatype = read_field<std::int16_t>(hdr.data(), 70, swap);
  const auto bitpix = read_field<std::int16_t>(hdr.data(), 72, swap);
  const double vox_offset = read_field<float>(hdr.data(), 108, swap);
  const double slope = read_field<float>(hdr.data(), 112, swap);
  const double inter = read_field<float>(hdr.data(), 116, swap);

  const std::size_t count = static_cast<std::size_t>(vol.dims[0]) * vol.dims[1] * vol.dims[2];
  const std::size_t skip = vox_offset > 348.0 ? static_cast<std::size_t>(vox_offset) - 348 : 0;
  if (!file.skip(skip)) throw IngestionError("truncated NIfTI file: " + path.string());
  std::vector<unsigned char> raw(count * static_cast<std::size_t>(bitpix / 8));
  if (raw.empty() || !file.read(raw.data(), raw.size())) {
    throw IngestionError("truncated NIfTI voxel data: " + path.string());
  }
  switch (datatype) {
    case 2: decode_voxels<std::uint8_t>(raw, swap, vol.voxels); break;
    case 4: decode_voxels<std::int16_t>(raw, swap, vol.voxels); break;
    case 8: decode_voxels<std::int32_t>(raw, swap, vol.voxels); break;
    case 16: decode_voxels<float>(raw, swap, vol.voxels); break;
    case 64: decode_voxels<double>(raw, swap, vol.voxels); break;
    case 256: decode_voxels<std::int8_t>(raw, swap, vol.voxels); break;
    case 512: decode_voxels<std::uint16_t>(raw, swap, vol.voxels); break;
    case 768: decode_voxels<std::uint32_t>(raw, swap, vol.voxels); break;
    default: throw IngestionError("unsupported NIfTI datatype " + std::to_string(datatype) + ": " + path.string());
  }
  if (slope != 0.0 && std::isfinite(slope)) {
    for (double& v : vol.voxels) v = v * slope + inter;
  }
  return vol;
}

bool has_nifti_extension(const std::filesystem::path& p) {
  const std::string name = p.filename().string();
  auto ends = [&](const std::string& suffix) {
    return name.size() >= suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return ends(".nii") || ends(".nii.gz");
}

std::string strip_nifti_extension(const std::filesystem::path& p) {
  std::string name = p.filename().string();
  for (const char* suffix : {".nii.gz", ".nii"}) {
    const std::string s = suffix;
    if (name.size() > s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0) {
      return name.substr(0, name.size() - s.size());
    }
  }
  return p.stem().string();
}

// Voxel-space disc positions: (x, y, z) per disc, NaN x for missing.
std::vector<std::array<double, 3>> read_disc_labels(const std::filesystem::path& path,
                                                    const Volume& image) {
  std::vector<std::array<double, 3>> discs(kDiscCount, {NAN, NAN, NAN});
  if (has_nifti_extension(path)) {
    const Volume labels = read_nifti(path);
    if (labels.dims != image.dims) throw IngestionError("label volume dims differ from image: " + path.string());
    std::vector<std::array<double, 4>> acc(kDiscCount, {0, 0, 0, 0});
    for (int k = 0; k < labels.dims[2]; ++k) {
      for (int j = 0; j < labels.dims[1]; ++j) {
        for (int i = 0; i < labels.dims[0]; ++i) {
          const auto v = static_cast<long>(std::lround(labels.at(i, j, k)));
          if (v < 1 || v > kDiscCount) continue;
          auto& a = acc[static_cast<std::size_t>(v - 1)];
          a[0] += i;
          a[1] += j;
          a[2] += k;
          a[3] += 1;
        }
      }
    }
    for (int d = 0; d < kDiscCount; ++d) {
      const auto& a = acc[static_cast<std::size_t>(d)];
      if (a[3] > 0) discs[static_cast<std::size_t>(d)] = {a[0] / a[3], a[1] / a[3], a[2] / a[3]};
    }
    return discs;
  }

  std::ifstream is(path);
  if (!is) throw IngestionError("cannot read labels " + path.string());
  std::string line;
  std::getline(is, line);
  if (line.rfind("disc,x,y,z", 0) != 0) {
    throw IngestionError("label file " + path.string() + " must start with 'disc,x,y,z'");
  }
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    int disc = -1;
    double x = 0, y = 0, z = 0;
    if (!(ls >> disc >> x >> y >> z) || disc < 0 || disc >= kDiscCount) {
      throw IngestionError("unreadable label row " + path.string() + ":" + std::to_string(line_no));
    }
    discs[static_cast<std::size_t>(disc)] = {x, y, z};
  }
  return discs;
}

}  // namespace

SpineSample load_volume_as_sample(const std::filesystem::path& volume_path,
                                  const std::filesystem::path& labels_path) {
  const Volume vol = read_nifti(volume_path);
  const int n = vol.dims[0];
  if (n < 6) {
    throw IngestionError(volume_path.string() + " has " + std::to_string(n) +
                         " sagittal slices; at least 6 are required");
  }
  const double dy = vol.spacing[1], dz = vol.spacing[2];
  if (!(dy > 0.0 && dz > 0.0) || std::abs(dy - dz) > 1e-3 * std::max(dy, dz)) {
    throw IngestionError(volume_path.string() + ": in-plane spacing must be isotropic");
  }

  // rows follow axis 2 (superior first in RPI), columns axis 1
  SpineSample s;
  const int H = vol.dims[2], W = vol.dims[1];
  s.image.height = H;
  s.image.width = W;
  s.image.pixels.assign(static_cast<std::size_t>(H) * W, 0.0);
  const int mid = n / 2;
  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      double acc = 0.0;
      for (int i = mid - 3; i <= mid + 2; ++i) acc += vol.at(i, c, r);
      s.image.at(r, c) = acc / 6.0;
    }
  }
  normalize_min_max(s.image.pixels);

  const auto discs = read_disc_labels(labels_path, vol);
  s.keypoints.coords.assign(kDiscCount, kInvisiblePoint);
  s.keypoints.visible.assign(kDiscCount, false);
  s.keypoints.spacing_mm = 0.5 * (dy + dz);
  for (int d = 0; d < kDiscCount; ++d) {
    const auto& p = discs[static_cast<std::size_t>(d)];
    if (std::isnan(p[0])) continue;
    s.keypoints.coords[static_cast<std::size_t>(d)] = {p[2], p[1]};
    s.keypoints.visible[static_cast<std::size_t>(d)] = true;
  }
  try {
    s.keypoints.validate(H, W);
  } catch (const InputDomainError& e) {
    throw IngestionError(labels_path.string() + ": " + e.what());
  }

  s.id = strip_nifti_extension(volume_path);
  s.subject_id = s.id.substr(0, s.id.find('_'));
  if (s.id.find("T1w") != std::string::npos) {
    s.modality = Modality::T1w;
  } else if (s.id.find("T2w") != std::string::npos) {
    s.modality = Modality::T2w;
  } else {
    s.modality = Modality::synthetic;
  }
  return s;
}

}  // namespace hca
