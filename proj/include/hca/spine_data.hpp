// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hca/heatmap_codec.hpp"
#include "hca/tensor.hpp"

namespace hca {

inline constexpr int kDiscCount = 11;

enum class Modality { T1w, T2w, synthetic };

std::string to_string(Modality m);
Modality parse_modality(const std::string& text);

/// Single-channel image, height x width, row-major, values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  double& at(int r, int c) { return pixels[static_cast<std::size_t>(r) * width + c]; }
  double at(int r, int c) const { return pixels[static_cast<std::size_t>(r) * width + c]; }
};

struct SpineSample {
  Image image;
  KeypointSet keypoints;  // always kDiscCount slots, image pixel coordinates
  std::string id;
  std::string subject_id;
  Modality modality = Modality::synthetic;
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct SynthConfig {
  int count = 16;
  int height = 128;
  int width = 128;
  Range curvature{-0.12, 0.12};  // lateral bend at the spine ends, fraction of width
  Range disc_gap_px{8.0, 10.0};  // Euclidean distance between consecutive centers
  double noise_std = 0.03;
  int distractor_count = 0;
  double spacing_mm = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Deterministic synthetic sagittal spines with 11 disc blobs each.
/// floor(count / 10) samples (chosen by the seed) lose one random disc.
std::vector<SpineSample> generate_synthetic(const SynthConfig& config);

/// Averages sagittal slices mid-3 .. mid+2 (mid = n/2) of a NIfTI-1 volume
/// (.nii or .nii.gz), min-max normalizes, and projects the disc labels.
/// Labels are either a CSV `disc,x,y,z` (voxel indices) or a NIfTI label
/// volume whose voxel value v in 1..11 marks disc v-1.
SpineSample load_volume_as_sample(const std::filesystem::path& volume_path,
                                  const std::filesystem::path& labels_path);

/// Per-image min-max normalization; constant images become zeros.
void normalize_min_max(std::vector<double>& pixels);

// On-disk sample pair: <id>.img (header line "HCA1 <h> <w> <spacing>\n" then
// float32 little-endian row-major) and <id>.keypoints.csv.
void write_sample(const std::filesystem::path& dir, const SpineSample& sample);
SpineSample read_sample(const std::filesystem::path& dir, const std::string& id);

Image read_image_file(const std::filesystem::path& path, double* spacing_mm = nullptr);
void write_image_file(const std::filesystem::path& path, const Image& image, double spacing_mm);
KeypointSet read_keypoints_csv(const std::filesystem::path& path, double spacing_mm);
void write_keypoints_csv(const std::filesystem::path& path, const KeypointSet& keypoints);

/// Writes every sample plus manifest.csv (`id,modality,subject_id`).
void write_dataset(const std::filesystem::path& dir, const std::vector<SpineSample>& samples);
/// Reads all `.img` + `.keypoints.csv` pairs in `dir`, sorted by id.
std::vector<SpineSample> load_dataset(const std::filesystem::path& dir);

/// 80/20 train/validation split keyed on a hash of subject_id.
bool is_validation_subject(const std::string& subject_id);
std::pair<std::vector<SpineSample>, std::vector<SpineSample>> split_by_subject(
    const std::vector<SpineSample>& samples);

/// Aspect-preserving scale plus centered zero padding into a fixed canvas.
/// Maps source pixel p to scale * p + offset.
struct Letterbox {
  double scale = 1.0;
  double offset_row = 0.0;
  double offset_col = 0.0;

  static Letterbox fit(int src_h, int src_w, int dst_h, int dst_w);
  Point2 apply(Point2 p) const;
  Point2 invert(Point2 p) const;
};

/// Resamples `src` into a dst_h x dst_w canvas (bilinear when enlarging, box
/// filter when shrinking).
Image letterbox_image(const Image& src, const Letterbox& box, int dst_h, int dst_w);

struct ModelConfig;

struct PreparedSample {
  Tensor image;           // 1 x H x W network input
  HeatmapStack target;    // V x H/4 x W/4
  KeypointSet keypoints;          // network-input pixel coordinates
  KeypointSet heatmap_keypoints;  // keypoints / 4, clamped to the heatmap grid
  Letterbox transform;            // source image -> network input
};

/// Input-space keypoints divided by the stem stride, clamped to the grid.
KeypointSet heatmap_keypoints(const KeypointSet& input_keypoints, const ModelConfig& model);

struct Batch {
  std::vector<Tensor> images;
  std::vector<HeatmapStack> targets;
  std::vector<KeypointSet> keypoints;
  std::vector<std::vector<bool>> visibility;
};

PreparedSample prepare_sample(const SpineSample& sample, const ModelConfig& model,
                              double sigma = kDefaultSigma);
Batch prepare_batch(const std::vector<SpineSample>& samples, const ModelConfig& model,
                    double sigma = kDefaultSigma);

}  // namespace hca
