// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "hca/errors.hpp"
#include "hca/trainer.hpp"
#include "oracles.hpp"

using namespace hca;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 4;
  c.model.stacks = 1;
  c.model.channels = 8;
  c.model.input_height = c.model.input_width = 64;
  c.checkpoint_every = 0;
  return c;
}

std::vector<SpineSample> synth(int count, std::uint64_t seed = 0) {
  SynthConfig s;
  s.count = count;
  s.seed = seed;
  return generate_synthetic(s);
}

std::vector<std::string> log_lines(const fs::path& dir) {
  std::istringstream is(oracle::read_file(dir / "train_log.csv"));
  std::vector<std::string> lines;
  for (std::string line; std::getline(is, line);) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("one epoch writes one log row and the checkpoints") {
  const auto dir = oracle::temp_dir("train1");
  const auto samples = synth(4);
  const auto report = train(tiny(1), samples, {}, dir);
  const auto lines = log_lines(dir);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "epoch,train_loss,val_loss,val_dtt_px,val_fnr,val_fpr");
  CHECK(lines[1].rfind("1,", 0) == 0);
  CHECK(report.history.size() == 1);
  CHECK(fs::exists(dir / "best.ckpt"));
  CHECK(fs::exists(dir / "last.ckpt"));
  fs::remove_all(dir);
}

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
  const auto dir = oracle::temp_dir("train_lr0");
  TrainConfig c = tiny(3);
  c.learning_rate = 0.0;
  train(c, synth(4), {}, dir);
  const Checkpoint ck = load_checkpoint(dir / "last.ckpt");
  CHECK(ck.parameters == build_model(c.model).parameters());
  CHECK(ck.epoch == 3);
  fs::remove_all(dir);
}

TEST_CASE("tiny config: 200 epochs cut the training loss tenfold") {
  // lambda = 0: the skeleton term has a floor on flat early heatmaps (see README)
  const auto dir = oracle::temp_dir("train_drop");
  TrainConfig c = tiny(200);
  c.learning_rate = 1e-3;
  c.loss.lambda_sk = 0.0;
  const auto samples = synth(8);
  const auto report = train(c, samples, {}, dir);
  const double first = report.history.front().train_loss, last = report.history.back().train_loss;
  MESSAGE("train loss " << first << " -> " << last << " (" << first / last << "x)");
  CHECK(last * 10.0 <= first);
  fs::remove_all(dir);
}

TEST_CASE("resume: 10 + 10 epochs equals 20 straight, bitwise") {
  const auto split = oracle::temp_dir("resume_split"), straight = oracle::temp_dir("resume_straight");
  const auto samples = synth(6, 3);
  const std::vector<SpineSample> train_set(samples.begin(), samples.begin() + 5), val_set(samples.begin() + 5, samples.end());
  TrainConfig c = tiny(10);
  c.batch_size = 2;
  c.learning_rate = 1e-3;
  c.seed = 42;
  train(c, train_set, val_set, split);
  ResumeOptions ro;
  ro.total_epochs = 20;
  const auto resumed = resume(split / "last.ckpt", train_set, val_set, ro);
  c.epochs = 20;
  train(c, train_set, val_set, straight);

  const Checkpoint a = load_checkpoint(split / "last.ckpt"), b = load_checkpoint(straight / "last.ckpt");
  CHECK(a.epoch == 20);
  CHECK(a.parameters == b.parameters);
  CHECK(a.optimizer.square_avg == b.optimizer.square_avg);
  CHECK(log_lines(split) == log_lines(straight));
  CHECK(resumed.history.size() == 10);
  CHECK(oracle::read_file(split / "best.ckpt").size() > 0);
  fs::remove_all(split);
  fs::remove_all(straight);
}

TEST_CASE("resume with no further epochs changes nothing") {
  const auto dir = oracle::temp_dir("resume0");
  const auto samples = synth(4);
  train(tiny(2), samples, {}, dir);
  const Checkpoint before = load_checkpoint(dir / "last.ckpt");
  const auto lines = log_lines(dir);
  ResumeOptions ro;
  ro.total_epochs = 2;
  const auto r = resume(dir / "last.ckpt", samples, {}, ro);
  CHECK(r.history.empty());
  const Checkpoint after = load_checkpoint(dir / "last.ckpt");
  CHECK(after.parameters == before.parameters);
  CHECK(log_lines(dir) == lines);

  std::string bytes = oracle::read_file(dir / "last.ckpt");
  bytes[0] = 'X';
  std::ofstream(dir / "broken.ckpt", std::ios::binary) << bytes;
  CHECK_THROWS_AS(resume(dir / "broken.ckpt", samples, {}, ro), VersionError);
  fs::remove_all(dir);
}

TEST_CASE("identical runs give identical logs") {
  const auto a = oracle::temp_dir("det_a"), b = oracle::temp_dir("det_b");
  const auto samples = synth(6, 9);
  TrainConfig c = tiny(4);
  c.loss.prototype_mode = PrototypeMode::stochastic;
  train(c, samples, {}, a);
  train(c, samples, {}, b);
  CHECK(oracle::read_file(a / "train_log.csv") == oracle::read_file(b / "train_log.csv"));
  CHECK(oracle::read_file(a / "last.ckpt") == oracle::read_file(b / "last.ckpt"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("periodic checkpoints") {
  const auto dir = oracle::temp_dir("periodic");
  TrainConfig c = tiny(4);
  c.checkpoint_every = 2;
  train(c, synth(4), {}, dir);
  CHECK(fs::exists(dir / "epoch_0002.ckpt"));
  CHECK(fs::exists(dir / "epoch_0004.ckpt"));
  CHECK_FALSE(fs::exists(dir / "epoch_0001.ckpt"));
  fs::remove_all(dir);
}

TEST_CASE("one small step does not increase the batch loss (20 seeds)") {
  const auto samples = synth(4);
  int violations = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TrainConfig c = tiny(1);
    c.model.seed = seed;
    Model m = build_model(c.model);
    std::vector<PreparedSample> prepared;
    for (const auto& s : samples) prepared.push_back(prepare_sample(s, c.model));
    std::vector<const PreparedSample*> batch;
    for (const auto& p : prepared) batch.push_back(&p);
    RmsProp opt(m.parameters());
    double alpha = c.loss.alpha;
    Rng rng(seed);
    const double before = train_step(m, opt, batch, c.loss, alpha, 1e-4, rng).loss.total;
    Gradients g;
    Rng rng2(seed);
    const double after = batch_gradients(m, batch, c.loss, alpha, rng2, g).total;
    if (after > before) ++violations;
  }
  MESSAGE("violations: " << violations);
  CHECK(violations <= 2);
}

TEST_CASE("a disc invisible everywhere gets no head-bias gradient") {
  auto samples = synth(4, 5);
  for (auto& s : samples) {
    s.keypoints.visible[6] = false;
    s.keypoints.coords[6] = kInvisiblePoint;
  }
  for (int stacks : {1, 2}) {
    TrainConfig c = tiny(1);
    c.model.stacks = stacks;
    const Model m = build_model(c.model);
    std::vector<PreparedSample> prepared;
    for (const auto& s : samples) prepared.push_back(prepare_sample(s, c.model));
    std::vector<const PreparedSample*> batch;
    for (const auto& p : prepared) batch.push_back(&p);
    for (PrototypeMode mode : {PrototypeMode::expectation, PrototypeMode::stochastic}) {
      c.loss.prototype_mode = mode;
      c.loss.lambda_sk = 0.5;  // make the skeleton term matter
      Gradients g;
      Rng rng(1);
      batch_gradients(m, batch, c.loss, c.loss.alpha, rng, g);
      const auto heads = m.head_bias_indices();
      // with stacked blocks, earlier heads feed later blocks, so only the last is masked
      const std::size_t first = stacks == 1 ? 0 : heads.size() - 1;
      for (std::size_t h = first; h < heads.size(); ++h) {
        CHECK(g[static_cast<std::size_t>(heads[h])][6] == 0.0);
        CHECK(g[static_cast<std::size_t>(heads[h])][5] != 0.0);
      }
      CHECK(g[static_cast<std::size_t>(m.fusion_bias_index())][6] == 0.0);
      CHECK(g[static_cast<std::size_t>(m.fusion_bias_index())][5] != 0.0);
    }
  }
}

TEST_CASE("non-finite loss names the offending term") {
  TrainConfig c = tiny(1);
  const Model m = build_model(c.model);
  const auto samples = synth(1);
  Gradients g;
  Rng rng(0);

  PreparedSample bad_target = prepare_sample(samples[0], c.model);
  bad_target.target.values(0, 3, 3) = std::numeric_limits<double>::quiet_NaN();
  try {
    batch_gradients(m, {&bad_target}, c.loss, c.loss.alpha, rng, g);
    FAIL("expected a non-finite loss error");
  } catch (const NonFiniteLossError& e) {
    CHECK(std::string(e.what()).find("L_v") != std::string::npos);
  }

  PreparedSample bad_keypoint = prepare_sample(samples[0], c.model);
  bad_keypoint.heatmap_keypoints.coords[2].row = std::numeric_limits<double>::quiet_NaN();
  try {
    batch_gradients(m, {&bad_keypoint}, c.loss, c.loss.alpha, rng, g);
    FAIL("expected a non-finite loss error");
  } catch (const NonFiniteLossError& e) {
    CHECK(std::string(e.what()).find("L_sk") != std::string::npos);
  }
}

TEST_CASE("unwritable output directory is an I/O error") {
  const auto dir = oracle::temp_dir("unwritable");
  std::ofstream(dir / "file") << "x";
  CHECK_THROWS_AS(train(tiny(1), synth(4), {}, dir / "file" / "run"), IoError);
  CHECK_THROWS_AS(train(tiny(1), {}, {}, dir / "run"), InputDomainError);
  fs::remove_all(dir);
}
