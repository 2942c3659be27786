// SPDX-License-Identifier: Apache-2.0
#include "hca/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "hca/errors.hpp"

namespace hca {

RmsProp::RmsProp(const ParameterSet& params) { state_.square_avg = params.zero_gradients(); }

void RmsProp::step(ParameterSet& params, const Gradients& grads, double learning_rate) {
  for (int i = 0; i < params.count(); ++i) {
    auto& value = params[i].value;
    auto& sq = state_.square_avg[static_cast<std::size_t>(i)];
    const auto& g = grads[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < value.size(); ++j) {
      sq[j] = kRmsPropDecay * sq[j] + (1.0 - kRmsPropDecay) * g[j] * g[j];
      if (learning_rate != 0.0) value[j] -= learning_rate * g[j] / (std::sqrt(sq[j]) + kRmsPropEpsilon);
    }
  }
}

double RmsProp::step_scalar(double value, double grad, double learning_rate) {
  auto& sq = state_.alpha_square_avg;
  sq = kRmsPropDecay * sq + (1.0 - kRmsPropDecay) * grad * grad;
  if (learning_rate == 0.0) return value;
  return value - learning_rate * grad / (std::sqrt(sq) + kRmsPropEpsilon);
}

namespace {

KeypointSet unit_spacing(KeypointSet k) {
  k.spacing_mm = 1.0;
  return k;
}

void check_finite(const LossBreakdown& loss, const std::string& where) {
  if (!std::isfinite(loss.mse)) throw NonFiniteLossError("non-finite L_v (heatmap MSE) " + where);
  if (!std::isfinite(loss.skeleton)) throw NonFiniteLossError("non-finite L_sk (skeleton loss) " + where);
}

}  // namespace

LossBreakdown batch_gradients(const Model& model, const std::vector<const PreparedSample*>& batch,
                              const LossConfig& loss, double alpha, Rng& rng, Gradients& grads,
                              double* grad_alpha) {
  if (batch.empty()) throw InputDomainError("batch_gradients: empty batch");
  grads = model.parameters().zero_gradients();
  LossConfig cfg = loss;
  cfg.alpha = alpha;
  LossBreakdown mean;
  double g_alpha = 0.0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const PreparedSample& sample = *batch[s];
    Model::Trace trace;
    const NetworkOutput out = model.forward(sample.image, trace);
    LossGradients lg;
    const std::string where = "for batch sample " + std::to_string(s);
    LossBreakdown l;
    try {
      l = total_loss(out, sample.target, sample.heatmap_keypoints, cfg, &rng, &lg);
    } catch (const NumericInputError&) {
      // softmax inside L_sk refuses non-finite maps; report which term broke
      const double mse = mse_loss(out.fused, sample.target, sample.heatmap_keypoints.visible);
      check_finite({mse, mse, 0.0}, where);
      throw NonFiniteLossError("non-finite L_sk (skeleton loss) input " + where);
    }
    check_finite(l, where);
    model.backward(trace, lg.output, grads);
    mean.total += l.total;
    mean.mse += l.mse;
    mean.skeleton += l.skeleton;
    g_alpha += lg.alpha;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& g : grads) {
    for (double& v : g) v *= inv;
  }
  mean.total *= inv;
  mean.mse *= inv;
  mean.skeleton *= inv;
  if (grad_alpha) *grad_alpha = g_alpha * inv;
  return mean;
}

StepResult train_step(Model& model, RmsProp& optimizer, const std::vector<const PreparedSample*>& batch,
                      const LossConfig& loss, double& alpha, double learning_rate, Rng& rng) {
  Gradients grads;
  double g_alpha = 0.0;
  StepResult r;
  r.loss = batch_gradients(model, batch, loss, alpha, rng, grads, &g_alpha);
  optimizer.step(model.parameters(), grads, learning_rate);
  if (loss.alpha_learnable) {
    alpha = std::clamp(optimizer.step_scalar(alpha, g_alpha, learning_rate), 1e-6, 1.0);
  }
  return r;
}

SetEvaluation evaluate_prepared(const Model& model, const std::vector<PreparedSample>& set,
                                const LossConfig& loss, double alpha, double threshold) {
  if (set.empty()) throw InputDomainError("evaluate_prepared: empty set");
  LossConfig cfg = loss;
  cfg.alpha = alpha;
  Rng rng(0x5eed);  // evaluation never touches the training stream
  SetEvaluation ev;
  std::vector<SampleScore> scores;
  for (const auto& sample : set) {
    const NetworkOutput out = model.forward(sample.image);
    ev.loss += total_loss(out, sample.target, sample.heatmap_keypoints, cfg, &rng).total;
    scores.push_back(score_sample(out.fused, unit_spacing(sample.heatmap_keypoints), threshold, 1.0));
  }
  ev.loss /= static_cast<double>(set.size());
  ev.metrics = aggregate(scores, threshold);
  return ev;
}

namespace {

struct RunState {
  TrainConfig config;
  Model model;
  RmsProp optimizer;
  int epoch = 0;
  Rng rng;
  double alpha = 0.8;
  double best_score = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
};

std::vector<PreparedSample> prepare_all(const std::vector<SpineSample>& samples, const TrainConfig& config) {
  std::vector<PreparedSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.keypoints.size() != config.model.num_discs) {
      throw ConfigError("model predicts " + std::to_string(config.model.num_discs) + " discs but sample " +
                        s.id + " has " + std::to_string(s.keypoints.size()));
    }
    out.push_back(prepare_sample(s, config.model, config.heatmap_sigma));
  }
  return out;
}

Checkpoint snapshot(const RunState& st) {
  Checkpoint ck;
  ck.config = st.config;
  ck.parameters = st.model.parameters();
  ck.optimizer = st.optimizer.state();
  ck.epoch = st.epoch;
  ck.rng = st.rng;
  ck.alpha = st.alpha;
  ck.best_score = st.best_score;
  ck.best_epoch = st.best_epoch;
  return ck;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string log_row(const EpochLog& e) {
  return std::to_string(e.epoch) + "," + fmt(e.train_loss) + "," + fmt(e.val_loss) + "," +
         (e.val_dtt_px ? fmt(*e.val_dtt_px) : std::string("nan")) + "," + fmt(e.val_fnr) + "," +
         fmt(e.val_fpr) + "\n";
}

TrainReport run_epochs(RunState& st, const std::vector<SpineSample>& train_set,
                       const std::vector<SpineSample>& val_set, const std::filesystem::path& out_dir,
                       bool append_log, const TrainOptions& options) {
  if (train_set.empty()) throw InputDomainError("train: empty training set");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  const auto log_path = out_dir / "train_log.csv";
  std::ofstream log(log_path, append_log ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("cannot write " + log_path.string());
  if (!append_log) log << "epoch,train_loss,val_loss,val_dtt_px,val_fnr,val_fpr\n" << std::flush;

  const auto train = prepare_all(train_set, st.config);
  const auto val = val_set.empty() ? train : prepare_all(val_set, st.config);

  TrainReport report;
  report.out_dir = out_dir;
  std::vector<std::size_t> order(train.size());
  while (st.epoch < st.config.epochs) {
    const int epoch = st.epoch + 1;
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_index(st.rng, i))]);
    }
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(st.config.batch_size)) {
      std::vector<const PreparedSample*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + st.config.batch_size); ++i) {
        batch.push_back(&train[order[i]]);
      }
      try {
        const StepResult r = train_step(st.model, st.optimizer, batch, st.config.loss, st.alpha,
                                        st.config.learning_rate, st.rng);
        loss_sum += r.loss.total * static_cast<double>(batch.size());
      } catch (const NonFiniteLossError& e) {
        throw NonFiniteLossError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")");
      }
    }
    st.epoch = epoch;

    const SetEvaluation ev = evaluate_prepared(st.model, val, st.config.loss, st.alpha, kDefaultThreshold);
    EpochLog row;
    row.epoch = epoch;
    row.train_loss = loss_sum / static_cast<double>(train.size());
    row.val_loss = ev.loss;
    row.val_dtt_px = ev.metrics.dtt_mean_mm;  // unit spacing: heatmap pixels
    row.val_fnr = ev.metrics.fnr_pct;
    row.val_fpr = ev.metrics.fpr_pct;
    log << log_row(row) << std::flush;
    report.history.push_back(row);

    const double score = row.val_dtt_px.value_or(std::numeric_limits<double>::infinity());
    if (st.best_epoch == 0 || score < st.best_score) {
      st.best_score = score;
      st.best_epoch = epoch;
      save_checkpoint(out_dir / "best.ckpt", snapshot(st));
    }
    if (st.config.checkpoint_every > 0 && epoch % st.config.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04d.ckpt", epoch);
      save_checkpoint(out_dir / name, snapshot(st));
    }
    if (options.on_epoch) options.on_epoch(row);
  }
  save_checkpoint(out_dir / "last.ckpt", snapshot(st));

  report.best_epoch = st.best_epoch;
  report.best_score = st.best_score;
  for (const auto& row : report.history) {
    if (row.epoch == st.best_epoch) report.best = row;
  }
  return report;
}

}  // namespace

TrainReport train(const TrainConfig& config, const std::vector<SpineSample>& train_set,
                  const std::vector<SpineSample>& val_set, const std::filesystem::path& out_dir,
                  const TrainOptions& options) {
  config.validate();
  Model model = build_model(config.model);
  RmsProp optimizer(model.parameters());
  RunState st{config, std::move(model), std::move(optimizer), 0, Rng(config.seed), config.loss.alpha};
  return run_epochs(st, train_set, val_set, out_dir, false, options);
}

TrainReport resume(const std::filesystem::path& checkpoint_path, const std::vector<SpineSample>& train_set,
                   const std::vector<SpineSample>& val_set, const ResumeOptions& options) {
  Checkpoint ck = load_checkpoint(checkpoint_path);
  if (options.total_epochs) ck.config.epochs = *options.total_epochs;
  ck.config.validate();
  Model model = model_from_checkpoint(ck);
  RunState st{ck.config,  std::move(model), RmsProp(ck.optimizer), ck.epoch,
              ck.rng,     ck.alpha,         ck.best_score,          ck.best_epoch};
  const auto out_dir = options.out_dir.value_or(checkpoint_path.parent_path().empty()
                                                    ? std::filesystem::path(".")
                                                    : checkpoint_path.parent_path());
  return run_epochs(st, train_set, val_set, out_dir, true, options.train);
}

}  // namespace hca
