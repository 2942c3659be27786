// SPDX-License-Identifier: Apache-2.0
#include "hca/spine_data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "hca/errors.hpp"
#include "hca/hca_network.hpp"
#include "hca/random.hpp"

namespace hca {

std::string to_string(Modality m) {
  switch (m) {
    case Modality::T1w: return "T1w";
    case Modality::T2w: return "T2w";
    case Modality::synthetic: return "synthetic";
  }
  return "synthetic";
}

Modality parse_modality(const std::string& text) {
  if (text == "T1w") return Modality::T1w;
  if (text == "T2w") return Modality::T2w;
  if (text == "synthetic") return Modality::synthetic;
  throw IngestionError("unknown modality '" + text + "'");
}

void normalize_min_max(std::vector<double>& pixels) {
  if (pixels.empty()) return;
  const auto [lo, hi] = std::minmax_element(pixels.begin(), pixels.end());
  const double mn = *lo, mx = *hi;
  if (!(mx > mn)) {
    std::fill(pixels.begin(), pixels.end(), 0.0);
    return;
  }
  for (double& v : pixels) v = std::clamp((v - mn) / (mx - mn), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// synthetic spines

void SynthConfig::validate() const {
  if (count < 1) throw ConfigError("synth: count must be >= 1");
  if (height < 16 || width < 16) throw ConfigError("synth: image must be at least 16x16");
  if (!(curvature.lo <= curvature.hi) || !(disc_gap_px.lo <= disc_gap_px.hi)) {
    throw ConfigError("synth: empty range");
  }
  if (!(disc_gap_px.lo > 0.0)) throw ConfigError("synth: disc gaps must be positive");
  if (!(noise_std >= 0.0)) throw ConfigError("synth: noise_std must be >= 0");
  if (distractor_count < 0) throw ConfigError("synth: distractor_count must be >= 0");
  if (!(spacing_mm > 0.0)) throw ConfigError("synth: spacing_mm must be positive");
  const double margin = std::max(2.0, 0.04 * height);
  if (disc_gap_px.hi * (kDiscCount - 1) > height - 1 - 2 * margin) {
    throw ConfigError("synth: spine of 11 discs with the given gaps does not fit the image height");
  }
}

namespace {

struct SpineCurve {
  double center_col, tilt, bend, mid_row, half_height, width;

  double col(double row) const {
    const double t = (row - mid_row) / half_height;
    return center_col + tilt * (row - mid_row) + bend * width * t * t;
  }
  // unit tangent (d row, d col) along increasing row
  Point2 tangent(double row) const {
    const double dc = tilt + 2.0 * bend * width * (row - mid_row) / (half_height * half_height);
    const double n = std::hypot(1.0, dc);
    return {1.0 / n, dc / n};
  }
};

// Elliptical Gaussian splat; `along` is the axis parallel to `dir`.
void splat_gaussian(Image& img, Point2 center, Point2 dir, double sigma_along,
                    double sigma_across, double amplitude) {
  const double reach = 4.0 * std::max(sigma_along, sigma_across);
  const int r0 = std::max(0, static_cast<int>(std::floor(center.row - reach)));
  const int r1 = std::min(img.height - 1, static_cast<int>(std::ceil(center.row + reach)));
  const int c0 = std::max(0, static_cast<int>(std::floor(center.col - reach)));
  const int c1 = std::min(img.width - 1, static_cast<int>(std::ceil(center.col + reach)));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double dr = r - center.row, dc = c - center.col;
      const double u = dr * dir.row + dc * dir.col;
      const double v = -dr * dir.col + dc * dir.row;
      const double q = (u * u) / (sigma_along * sigma_along) + (v * v) / (sigma_across * sigma_across);
      img.at(r, c) += amplitude * std::exp(-0.5 * q);
    }
  }
}

// Rounded rectangle with soft edges (vertebral body).
void splat_body(Image& img, Point2 center, Point2 dir, double half_along, double half_across,
                double amplitude) {
  const double reach = half_along + half_across + 3.0;
  const int r0 = std::max(0, static_cast<int>(std::floor(center.row - reach)));
  const int r1 = std::min(img.height - 1, static_cast<int>(std::ceil(center.row + reach)));
  const int c0 = std::max(0, static_cast<int>(std::floor(center.col - reach)));
  const int c1 = std::min(img.width - 1, static_cast<int>(std::ceil(center.col + reach)));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double dr = r - center.row, dc = c - center.col;
      const double u = std::abs(dr * dir.row + dc * dir.col) / half_along;
      const double v = std::abs(-dr * dir.col + dc * dir.row) / half_across;
      const double q = std::pow(std::pow(u, 4.0) + std::pow(v, 4.0), 0.25);
      img.at(r, c) += amplitude / (1.0 + std::exp(6.0 * (q - 1.0)));
    }
  }
}

// Next point on the curve at Euclidean distance `gap` below `from`.
Point2 step_along(const SpineCurve& curve, Point2 from, double gap) {
  double lo = from.row, hi = from.row + gap;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double d = std::hypot(mid - from.row, curve.col(mid) - from.col);
    (d < gap ? lo : hi) = mid;
  }
  const double row = 0.5 * (lo + hi);
  return {row, curve.col(row)};
}

SpineSample make_spine(const SynthConfig& cfg, Rng& rng, int index, bool drop_disc) {
  const int H = cfg.height, W = cfg.width;
  const double margin = std::max(2.0, 0.04 * H);
  for (int attempt = 0;; ++attempt) {
    std::vector<double> gaps(kDiscCount - 1);
    double length = 0.0;
    for (auto& g : gaps) length += (g = uniform(rng, cfg.disc_gap_px.lo, cfg.disc_gap_px.hi));
    SpineCurve curve{uniform(rng, 0.4 * W, 0.6 * W), uniform(rng, -0.1, 0.1),
                     uniform(rng, cfg.curvature.lo, cfg.curvature.hi), 0.5 * H, 0.5 * H,
                     static_cast<double>(W)};
    const double first_row = uniform(rng, margin, std::max(margin, H - 1 - margin - length));
    std::vector<Point2> centers{{first_row, curve.col(first_row)}};
    for (double g : gaps) centers.push_back(step_along(curve, centers.back(), g));

    const double mean_gap = length / gaps.size();
    const double edge = 0.6 * mean_gap + 2.0;
    const bool fits = std::all_of(centers.begin(), centers.end(), [&](Point2 p) {
      return p.row >= 0.0 && p.row <= H - 1 && p.col >= edge && p.col <= W - 1 - edge;
    });
    if (!fits && attempt < 100) continue;

    const int dropped = drop_disc ? static_cast<int>(uniform_index(rng, kDiscCount)) : -1;
    const double disc_amp = uniform(rng, 0.75, 0.9);
    const double body_amp = uniform(rng, 0.25, 0.35);

    SpineSample s;
    s.image.height = H;
    s.image.width = W;
    s.image.pixels.assign(static_cast<std::size_t>(H) * W, 0.0);
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) s.image.at(r, c) = 0.06 + 0.04 * r / H;
    }

    // vertebral bodies between consecutive discs and one past each end
    std::vector<Point2> bodies;
    for (std::size_t i = 0; i + 1 < centers.size(); ++i) {
      bodies.push_back({0.5 * (centers[i].row + centers[i + 1].row),
                        0.5 * (centers[i].col + centers[i + 1].col)});
    }
    const double top_row = centers.front().row - 0.5 * gaps.front();
    const double bottom_row = centers.back().row + 0.5 * gaps.back();
    bodies.push_back({top_row, curve.col(top_row)});
    bodies.push_back({bottom_row, curve.col(bottom_row)});
    for (const auto& b : bodies) {
      splat_body(s.image, b, curve.tangent(b.row), 0.33 * mean_gap, 0.55 * mean_gap, body_amp);
    }

    s.keypoints.coords.assign(kDiscCount, kInvisiblePoint);
    s.keypoints.visible.assign(kDiscCount, false);
    s.keypoints.spacing_mm = cfg.spacing_mm;
    for (int i = 0; i < kDiscCount; ++i) {
      if (i == dropped) continue;
      splat_gaussian(s.image, centers[static_cast<std::size_t>(i)],
                     curve.tangent(centers[static_cast<std::size_t>(i)].row), 0.16 * mean_gap,
                     0.4 * mean_gap, disc_amp);
      s.keypoints.coords[static_cast<std::size_t>(i)] = centers[static_cast<std::size_t>(i)];
      s.keypoints.visible[static_cast<std::size_t>(i)] = true;
    }

    for (int d = 0; d < cfg.distractor_count; ++d) {
      Point2 p{};
      for (int tries = 0; tries < 100; ++tries) {
        p = {uniform(rng, 2.0, H - 3.0), uniform(rng, 2.0, W - 3.0)};
        if (std::abs(p.col - curve.col(p.row)) >= 0.22 * W) break;
      }
      const double sigma = uniform(rng, 0.15, 0.3) * mean_gap;
      splat_gaussian(s.image, p, {1.0, 0.0}, sigma, sigma, uniform(rng, 0.7, 0.9));
    }

    if (cfg.noise_std > 0.0) {
      for (double& v : s.image.pixels) v += cfg.noise_std * normal(rng);
    }
    for (double& v : s.image.pixels) v = std::clamp(v, 0.0, 1.0);

    char id[32];
    std::snprintf(id, sizeof id, "synth_%04d", index);
    s.id = id;
    s.subject_id = id;
    s.modality = Modality::synthetic;
    return s;
  }
}

}  // namespace

std::vector<SpineSample> generate_synthetic(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  // floor(count / 10) samples lose one disc; pick them by partial shuffle.
  std::vector<int> order(static_cast<std::size_t>(config.count));
  for (int i = 0; i < config.count; ++i) order[static_cast<std::size_t>(i)] = i;
  const int drops = config.count / 10;
  for (int i = 0; i < drops; ++i) {
    const auto j = i + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(config.count - i)));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  std::vector<bool> drop(static_cast<std::size_t>(config.count), false);
  for (int i = 0; i < drops; ++i) drop[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;

  std::vector<SpineSample> out;
  out.reserve(static_cast<std::size_t>(config.count));
  for (int i = 0; i < config.count; ++i) {
    out.push_back(make_spine(config, rng, i, drop[static_cast<std::size_t>(i)]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// on-disk format

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

}  // namespace

void write_image_file(const std::filesystem::path& path, const Image& image, double spacing_mm) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "HCA1 " << image.height << ' ' << image.width << ' ' << format_double(spacing_mm) << '\n';
  std::vector<std::uint32_t> raw(image.pixels.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(image.pixels[i])));
  }
  os.write(reinterpret_cast<const char*>(raw.data()),
           static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t)));
  if (!os) throw IoError("short write to " + path.string());
}

Image read_image_file(const std::filesystem::path& path, double* spacing_mm) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read image " + path.string());
  std::string header;
  std::getline(is, header);
  std::istringstream hs(header);
  std::string magic;
  Image img;
  double spacing = 0.0;
  if (!(hs >> magic >> img.height >> img.width >> spacing) || magic != "HCA1" || img.height <= 0 ||
      img.width <= 0 || !(spacing > 0.0)) {
    throw IoError("bad image header in " + path.string());
  }
  std::vector<std::uint32_t> raw(static_cast<std::size_t>(img.height) * img.width);
  is.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t)));
  if (is.gcount() != static_cast<std::streamsize>(raw.size() * sizeof(std::uint32_t))) {
    throw IoError("truncated pixel data in " + path.string());
  }
  img.pixels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    img.pixels[i] = std::bit_cast<float>(to_little_endian(raw[i]));
  }
  if (spacing_mm) *spacing_mm = spacing;
  return img;
}

void write_keypoints_csv(const std::filesystem::path& path, const KeypointSet& keypoints) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "disc,row,col,visible\n";
  for (int i = 0; i < keypoints.size(); ++i) {
    const auto& p = keypoints.coords[static_cast<std::size_t>(i)];
    os << i << ',' << format_double(p.row) << ',' << format_double(p.col) << ','
       << (keypoints.visible[static_cast<std::size_t>(i)] ? 1 : 0) << '\n';
  }
}

KeypointSet read_keypoints_csv(const std::filesystem::path& path, double spacing_mm) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read keypoints " + path.string());
  KeypointSet k;
  k.coords.assign(kDiscCount, kInvisiblePoint);
  k.visible.assign(kDiscCount, false);
  k.spacing_mm = spacing_mm;
  std::string line;
  std::getline(is, line);
  if (line.rfind("disc,row,col,visible", 0) != 0) {
    throw IoError("keypoints header must be 'disc,row,col,visible' in " + path.string());
  }
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    int disc = -1, vis = 0;
    double row = 0.0, col = 0.0;
    if (!(ls >> disc >> row >> col >> vis) || disc < 0 || disc >= kDiscCount || (vis != 0 && vis != 1)) {
      throw IoError("bad keypoint row at " + path.string() + ":" + std::to_string(line_no));
    }
    if (vis) {
      k.coords[static_cast<std::size_t>(disc)] = {row, col};
      k.visible[static_cast<std::size_t>(disc)] = true;
    }
  }
  return k;
}

void write_sample(const std::filesystem::path& dir, const SpineSample& sample) {
  write_image_file(dir / (sample.id + ".img"), sample.image, sample.keypoints.spacing_mm);
  write_keypoints_csv(dir / (sample.id + ".keypoints.csv"), sample.keypoints);
}

SpineSample read_sample(const std::filesystem::path& dir, const std::string& id) {
  SpineSample s;
  double spacing = 1.0;
  s.image = read_image_file(dir / (id + ".img"), &spacing);
  s.keypoints = read_keypoints_csv(dir / (id + ".keypoints.csv"), spacing);
  s.keypoints.validate(s.image.height, s.image.width);
  s.id = id;
  s.subject_id = id;
  s.modality = Modality::synthetic;
  return s;
}

void write_dataset(const std::filesystem::path& dir, const std::vector<SpineSample>& samples) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.csv", std::ios::trunc);
  if (!manifest) throw IoError("cannot write manifest in " + dir.string());
  manifest << "id,modality,subject_id\n";
  for (const auto& s : samples) {
    write_sample(dir, s);
    manifest << s.id << ',' << to_string(s.modality) << ',' << s.subject_id << '\n';
  }
}

std::vector<SpineSample> load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a dataset directory: " + dir.string());
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".img") {
      ids.push_back(entry.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());

  std::map<std::string, std::pair<Modality, std::string>> meta;
  if (std::ifstream ms(dir / "manifest.csv"); ms) {
    std::string line;
    std::getline(ms, line);
    while (std::getline(ms, line)) {
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string id, modality, subject;
      std::getline(ls, id, ',');
      std::getline(ls, modality, ',');
      std::getline(ls, subject);
      if (!subject.empty() && subject.back() == '\r') subject.pop_back();
      meta[id] = {parse_modality(modality), subject};
    }
  }

  std::vector<SpineSample> out;
  for (const auto& id : ids) {
    SpineSample s = read_sample(dir, id);
    if (auto it = meta.find(id); it != meta.end()) {
      s.modality = it->second.first;
      s.subject_id = it->second.second;
    }
    out.push_back(std::move(s));
  }
  return out;
}

bool is_validation_subject(const std::string& subject_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : subject_id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h % 100 >= 80;
}

std::pair<std::vector<SpineSample>, std::vector<SpineSample>> split_by_subject(
    const std::vector<SpineSample>& samples) {
  std::pair<std::vector<SpineSample>, std::vector<SpineSample>> out;
  for (const auto& s : samples) {
    (is_validation_subject(s.subject_id) ? out.second : out.first).push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// resizing

Letterbox Letterbox::fit(int src_h, int src_w, int dst_h, int dst_w) {
  if (src_h <= 0 || src_w <= 0 || dst_h <= 0 || dst_w <= 0) {
    throw InputDomainError("letterbox: empty image");
  }
  Letterbox box;
  box.scale = std::min(static_cast<double>(dst_h) / src_h, static_cast<double>(dst_w) / src_w);
  const auto new_h = static_cast<int>(std::lround(src_h * box.scale));
  const auto new_w = static_cast<int>(std::lround(src_w * box.scale));
  box.offset_row = std::floor((dst_h - new_h) / 2.0);
  box.offset_col = std::floor((dst_w - new_w) / 2.0);
  return box;
}

Point2 Letterbox::apply(Point2 p) const {
  return {p.row * scale + offset_row, p.col * scale + offset_col};
}

Point2 Letterbox::invert(Point2 p) const {
  return {(p.row - offset_row) / scale, (p.col - offset_col) / scale};
}

namespace {

struct Tap {
  int index;
  double weight;
};

// For each destination index: the source taps it reads (empty = padding).
std::vector<std::vector<Tap>> axis_taps(int src, int dst, double scale, double offset) {
  const auto extent = static_cast<int>(std::lround(src * scale));
  const int first = static_cast<int>(offset);
  std::vector<std::vector<Tap>> taps(static_cast<std::size_t>(dst));
  for (int o = first; o < std::min(dst, first + extent); ++o) {
    if (o < 0) continue;
    const double x = (o - offset) / scale;
    auto& t = taps[static_cast<std::size_t>(o)];
    if (scale >= 1.0) {
      const double cx = std::clamp(x, 0.0, src - 1.0);
      const int i0 = static_cast<int>(std::floor(cx));
      const int i1 = std::min(i0 + 1, src - 1);
      const double f = cx - i0;
      t.push_back({i0, 1.0 - f});
      if (f > 0.0) t.push_back({i1, f});
    } else {
      const double a = std::max(x - 0.5 / scale, -0.5);
      const double b = std::min(x + 0.5 / scale, src - 0.5);
      double total = 0.0;
      for (int j = static_cast<int>(std::floor(a + 0.5)); j <= static_cast<int>(std::floor(b + 0.5)); ++j) {
        if (j < 0 || j >= src) continue;
        const double w = std::min(b, j + 0.5) - std::max(a, j - 0.5);
        if (w > 0.0) {
          t.push_back({j, w});
          total += w;
        }
      }
      for (auto& tap : t) tap.weight /= total;
    }
  }
  return taps;
}

}  // namespace

Image letterbox_image(const Image& src, const Letterbox& box, int dst_h, int dst_w) {
  const auto rows = axis_taps(src.height, dst_h, box.scale, box.offset_row);
  const auto cols = axis_taps(src.width, dst_w, box.scale, box.offset_col);
  // columns first, then rows
  std::vector<double> tmp(static_cast<std::size_t>(src.height) * dst_w, 0.0);
  for (int r = 0; r < src.height; ++r) {
    for (int c = 0; c < dst_w; ++c) {
      double v = 0.0;
      for (const auto& t : cols[static_cast<std::size_t>(c)]) v += t.weight * src.at(r, t.index);
      tmp[static_cast<std::size_t>(r) * dst_w + c] = v;
    }
  }
  Image out{dst_h, dst_w, std::vector<double>(static_cast<std::size_t>(dst_h) * dst_w, 0.0)};
  for (int r = 0; r < dst_h; ++r) {
    for (const auto& t : rows[static_cast<std::size_t>(r)]) {
      for (int c = 0; c < dst_w; ++c) {
        out.at(r, c) += t.weight * tmp[static_cast<std::size_t>(t.index) * dst_w + c];
      }
    }
  }
  for (double& v : out.pixels) v = std::clamp(v, 0.0, 1.0);
  return out;
}

PreparedSample prepare_sample(const SpineSample& sample, const ModelConfig& model, double sigma) {
  const int H = model.input_height, W = model.input_width;
  PreparedSample out;
  out.transform = Letterbox::fit(sample.image.height, sample.image.width, H, W);
  const Image resized = letterbox_image(sample.image, out.transform, H, W);
  out.image = Tensor(1, H, W);
  std::copy(resized.pixels.begin(), resized.pixels.end(), out.image.data());

  out.keypoints = sample.keypoints;
  out.keypoints.spacing_mm = sample.keypoints.spacing_mm / out.transform.scale;
  for (int i = 0; i < out.keypoints.size(); ++i) {
    auto& p = out.keypoints.coords[static_cast<std::size_t>(i)];
    if (!out.keypoints.visible[static_cast<std::size_t>(i)]) {
      p = kInvisiblePoint;
      continue;
    }
    p = out.transform.apply(p);
    // p * scale can overshoot the last pixel centre by < 1 px when shrinking
    p.row = std::clamp(p.row, 0.0, H - 1.0);
    p.col = std::clamp(p.col, 0.0, W - 1.0);
  }
  out.heatmap_keypoints = heatmap_keypoints(out.keypoints, model);
  out.target = encode_heatmaps(out.heatmap_keypoints, model.heatmap_height(),
                               model.heatmap_width(), sigma);
  return out;
}

KeypointSet heatmap_keypoints(const KeypointSet& input_keypoints, const ModelConfig& model) {
  KeypointSet k = input_keypoints.scaled(1.0 / kHeatmapStride);
  for (int i = 0; i < k.size(); ++i) {
    if (!k.visible[static_cast<std::size_t>(i)]) continue;
    auto& p = k.coords[static_cast<std::size_t>(i)];
    p.row = std::clamp(p.row, 0.0, model.heatmap_height() - 1.0);
    p.col = std::clamp(p.col, 0.0, model.heatmap_width() - 1.0);
  }
  return k;
}

Batch prepare_batch(const std::vector<SpineSample>& samples, const ModelConfig& model, double sigma) {
  if (samples.empty()) throw InputDomainError("prepare_batch: empty batch");
  Batch b;
  for (const auto& s : samples) {
    PreparedSample p = prepare_sample(s, model, sigma);
    b.images.push_back(std::move(p.image));
    b.targets.push_back(std::move(p.target));
    b.visibility.push_back(p.keypoints.visible);
    b.keypoints.push_back(std::move(p.keypoints));
  }
  return b;
}

}  // namespace hca
