// SPDX-License-Identifier: Apache-2.0
#include "hca/cli.hpp"

#include <png.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "hca/checkpoint.hpp"
#include "hca/errors.hpp"
#include "hca/evaluator.hpp"
#include "hca/spine_data.hpp"
#include "hca/trainer.hpp"

namespace hca {
namespace {

namespace fs = std::filesystem;

struct SynthArgs {
  std::string out;
  int count = 0;
  std::uint64_t seed = 0;
  int distractors = 0;
  double noise = SynthConfig{}.noise_std;
  bool force = false;
};

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string report;
  double threshold = kDefaultThreshold;
};

struct PredictArgs {
  std::string checkpoint;
  std::string image;
  std::string out;
  std::string keypoints;
  double threshold = kDefaultThreshold;
};

int run_synth(const SynthArgs& a) {
  const fs::path out(a.out);
  if (fs::exists(out) && !fs::is_directory(out)) throw UsageError("--out " + a.out + " is not a directory");
  if (fs::is_directory(out) && !fs::is_empty(out) && !a.force) {
    throw UsageError("--out " + a.out + " is not empty (pass --force to overwrite)");
  }
  SynthConfig cfg;
  cfg.count = a.count;
  cfg.seed = a.seed;
  cfg.distractor_count = a.distractors;
  cfg.noise_std = a.noise;
  cfg.validate();
  const auto samples = generate_synthetic(cfg);
  fs::create_directories(out);
  write_dataset(out, samples);
  std::cout << "wrote " << samples.size() << " samples to " << out.string() << "\n";
  return 0;
}

std::string fmt_metric(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

int run_train(const TrainArgs& a) {
  const TrainConfig config = load_config(a.config);
  config.validate();
  const auto samples = load_dataset(a.data);
  if (samples.empty()) throw IngestionError("no samples found in " + a.data);
  auto [train_set, val_set] = split_by_subject(samples);
  if (train_set.empty()) std::swap(train_set, val_set);

  std::cout << "effective config:\n" << format_config(config);
  std::cout << "data: " << train_set.size() << " train / " << val_set.size() << " val samples\n"
            << std::flush;

  TrainOptions opts;
  opts.on_epoch = [](const EpochLog& e) {
    std::printf("epoch %d train_loss %.6g val_loss %.6g val_dtt_px %s fnr %.2f fpr %.2f\n", e.epoch,
                e.train_loss, e.val_loss, fmt_metric(e.val_dtt_px).c_str(), e.val_fnr, e.val_fpr);
    std::fflush(stdout);
  };
  const TrainReport report = train(config, train_set, val_set, a.out, opts);
  const EpochLog& last = report.history.back();
  std::printf("final val: dtt_px %s fnr %.2f fpr %.2f (best epoch %d, dtt_px %s)\n",
              fmt_metric(last.val_dtt_px).c_str(), last.val_fnr, last.val_fpr, report.best_epoch,
              report.best ? fmt_metric(report.best->val_dtt_px).c_str() : "n/a");
  return 0;
}

int run_eval(const EvalArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  if (ck.config.model.num_discs != kDiscCount) {
    throw std::runtime_error("checkpoint predicts " + std::to_string(ck.config.model.num_discs) +
                             " discs but data carries " + std::to_string(kDiscCount));
  }
  const Model model = model_from_checkpoint(ck);
  const auto samples = load_dataset(a.data);
  if (samples.empty()) throw IngestionError("no samples found in " + a.data);

  std::vector<SampleScore> scores;
  scores.reserve(samples.size());
  for (const auto& s : samples) {
    const PreparedSample p = prepare_sample(s, ck.config.model, ck.config.heatmap_sigma);
    const NetworkOutput out = model.forward(p.image);
    // network-input keypoints carry mm per input pixel; 4 input px per heatmap px
    scores.push_back(score_sample(out.fused, p.keypoints, a.threshold, kHeatmapStride));
  }
  const MetricsReport report = aggregate(scores, a.threshold);
  {
    std::ofstream f(a.report);
    if (!f) throw IoError("cannot write report " + a.report);
    f << to_json(report).dump(2) << "\n";
    if (!f) throw IoError("failed writing report " + a.report);
  }
  std::cout << format_table(report, "HCA-Net");
  return 0;
}

// 3x5 digit glyphs, one row per 3 bits
constexpr std::array<std::array<std::uint8_t, 5>, 10> kDigits{{
    {7, 5, 5, 5, 7}, {2, 6, 2, 2, 7}, {7, 1, 7, 4, 7}, {7, 1, 7, 1, 7}, {5, 5, 7, 1, 1},
    {7, 4, 7, 1, 7}, {7, 4, 7, 5, 7}, {7, 1, 1, 1, 1}, {7, 5, 7, 5, 7}, {7, 5, 7, 1, 7},
}};

struct Canvas {
  int height, width;
  std::vector<std::uint8_t> rgb;

  void put(int r, int c, std::array<std::uint8_t, 3> color) {
    if (r < 0 || c < 0 || r >= height || c >= width) return;
    auto* p = &rgb[(static_cast<std::size_t>(r) * width + c) * 3];
    p[0] = color[0];
    p[1] = color[1];
    p[2] = color[2];
  }

  void dot(double row, double col, int radius, std::array<std::uint8_t, 3> color) {
    const int r0 = static_cast<int>(std::lround(row)), c0 = static_cast<int>(std::lround(col));
    for (int dr = -radius; dr <= radius; ++dr) {
      for (int dc = -radius; dc <= radius; ++dc) {
        if (dr * dr + dc * dc <= radius * radius) put(r0 + dr, c0 + dc, color);
      }
    }
  }

  void cross(double row, double col, int arm, std::array<std::uint8_t, 3> color) {
    const int r0 = static_cast<int>(std::lround(row)), c0 = static_cast<int>(std::lround(col));
    for (int d = -arm; d <= arm; ++d) {
      put(r0 + d, c0, color);
      put(r0, c0 + d, color);
    }
  }

  void text(int row, int col, const std::string& digits, int px, std::array<std::uint8_t, 3> color) {
    for (char ch : digits) {
      const auto& g = kDigits[static_cast<std::size_t>(ch - '0')];
      for (int gr = 0; gr < 5; ++gr) {
        for (int gc = 0; gc < 3; ++gc) {
          if (!(g[static_cast<std::size_t>(gr)] >> (2 - gc) & 1)) continue;
          for (int a = 0; a < px; ++a) {
            for (int b = 0; b < px; ++b) put(row + gr * px + a, col + gc * px + b, color);
          }
        }
      }
      col += 4 * px;
    }
  }
};

void write_png(const fs::path& path, const Canvas& canvas) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(canvas.width);
  img.height = static_cast<png_uint_32>(canvas.height);
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, canvas.rgb.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError("cannot write " + path.string() + ": " + msg);
  }
}

int run_predict(const PredictArgs& a) {
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const Model model = model_from_checkpoint(ck);
  const int V = ck.config.model.num_discs;

  SpineSample sample;
  double spacing = 1.0;
  sample.image = read_image_file(a.image, &spacing);
  sample.keypoints.coords.assign(static_cast<std::size_t>(V), kInvisiblePoint);
  sample.keypoints.visible.assign(static_cast<std::size_t>(V), false);
  sample.keypoints.spacing_mm = spacing;
  std::optional<KeypointSet> truth;
  if (!a.keypoints.empty()) truth = read_keypoints_csv(a.keypoints, spacing);

  const PreparedSample p = prepare_sample(sample, ck.config.model, ck.config.heatmap_sigma);
  const NetworkOutput out = model.forward(p.image);
  const KeypointSet found = decode_peaks(out.fused, a.threshold);
  const std::vector<double> peaks = channel_peaks(out.fused);

  std::vector<Point2> coords(static_cast<std::size_t>(V), kInvisiblePoint);
  const fs::path coords_path = a.out + ".coords.csv";
  std::ofstream csv(coords_path);
  if (!csv) throw IoError("cannot write " + coords_path.string());
  csv << "disc,row,col,confidence,visible\n";
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (found.visible[i]) {
      const Point2 h = found.coords[i];
      coords[i] = p.transform.invert({h.row * kHeatmapStride, h.col * kHeatmapStride});
    }
    const double confidence = 1.0 / (1.0 + std::exp(-peaks[i]));  // display only
    char line[160];
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g,%.17g,%d\n", i, coords[i].row, coords[i].col,
                  confidence, found.visible[i] ? 1 : 0);
    csv << line;
  }
  csv.close();
  if (!csv) throw IoError("failed writing " + coords_path.string());

  const Image& img = sample.image;
  Canvas canvas{img.height, img.width, std::vector<std::uint8_t>(static_cast<std::size_t>(img.height) * img.width * 3)};
  for (std::size_t k = 0; k < img.pixels.size(); ++k) {
    const auto g = static_cast<std::uint8_t>(std::lround(std::clamp(img.pixels[k], 0.0, 1.0) * 255.0));
    canvas.rgb[3 * k] = canvas.rgb[3 * k + 1] = canvas.rgb[3 * k + 2] = g;
  }
  const int glyph = std::max(1, std::min(img.height, img.width) / 128);
  const std::array<std::uint8_t, 3> red{230, 40, 40}, green{40, 220, 60};
  if (truth) {
    for (std::size_t i = 0; i < truth->coords.size(); ++i) {
      if (truth->visible[i]) canvas.dot(truth->coords[i].row, truth->coords[i].col, glyph, green);
    }
  }
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (!found.visible[i]) continue;
    canvas.cross(coords[i].row, coords[i].col, 2 * glyph, red);
    canvas.text(static_cast<int>(std::lround(coords[i].row)) - 2 * glyph,
                static_cast<int>(std::lround(coords[i].col)) + 3 * glyph, std::to_string(i), glyph, red);
  }
  write_png(a.out + ".overlay.png", canvas);
  std::cout << "wrote " << coords_path.string() << " and " << a.out << ".overlay.png\n";
  return 0;
}

void add_predict_flags(CLI::App* cmd, PredictArgs& a) {
  cmd->add_option("--checkpoint", a.checkpoint, "checkpoint file")->required();
  cmd->add_option("--image", a.image, "input .img file")->required();
  cmd->add_option("--out", a.out, "output prefix")->required();
  cmd->add_option("--keypoints", a.keypoints, "ground-truth keypoints CSV drawn in green");
  cmd->add_option("--threshold", a.threshold, "detection threshold")->check(CLI::NonNegativeNumber);
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"HCA-Net intervertebral disc labeling toolkit", "hcanet"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic spine dataset");
  s->add_option("--out", synth.out, "output directory")->required();
  s->add_option("--count", synth.count, "number of samples")->required()->check(CLI::PositiveNumber);
  s->add_option("--seed", synth.seed, "generator seed");
  s->add_option("--distractors", synth.distractors, "off-spine blobs per image")->check(CLI::NonNegativeNumber);
  s->add_option("--noise", synth.noise, "Gaussian noise std")->check(CLI::NonNegativeNumber);
  s->add_flag("--force", synth.force, "allow a non-empty output directory");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model");
  t->add_option("--config", tr.config, "config file")->required();
  t->add_option("--data", tr.data, "dataset directory")->required();
  t->add_option("--out", tr.out, "run directory")->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "score a checkpoint on a dataset");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  e->add_option("--data", ev.data, "dataset directory")->required();
  e->add_option("--report", ev.report, "JSON report path")->required();
  e->add_option("--threshold", ev.threshold, "detection threshold")->check(CLI::NonNegativeNumber);

  PredictArgs pr, vis;
  auto* p = app.add_subcommand("predict", "predict disc coordinates for one image");
  add_predict_flags(p, pr);
  auto* v = app.add_subcommand("visualize", "draw predicted discs over one image");
  add_predict_flags(v, vis);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 2;
  }

  try {
    if (s->parsed()) return run_synth(synth);
    if (t->parsed()) return run_train(tr);
    if (e->parsed()) return run_eval(ev);
    if (p->parsed()) return run_predict(pr);
    if (v->parsed()) return run_predict(vis);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return 2;
  } catch (const ConfigError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace hca
