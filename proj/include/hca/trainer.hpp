// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hca/checkpoint.hpp"
#include "hca/config_file.hpp"
#include "hca/evaluator.hpp"
#include "hca/hca_network.hpp"
#include "hca/spine_data.hpp"

namespace hca {

inline constexpr double kRmsPropDecay = 0.99;
inline constexpr double kRmsPropEpsilon = 1e-8;

/// RMSprop without momentum: v = rho*v + (1-rho)*g^2; p -= lr * g / (sqrt(v) + eps).
class RmsProp {
 public:
  explicit RmsProp(const ParameterSet& params);
  explicit RmsProp(RmsPropState state) : state_(std::move(state)) {}

  void step(ParameterSet& params, const Gradients& grads, double learning_rate);
  double step_scalar(double value, double grad, double learning_rate);

  const RmsPropState& state() const { return state_; }

 private:
  RmsPropState state_;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  std::optional<double> val_dtt_px;
  double val_fnr = 0.0;
  double val_fpr = 0.0;
};

struct TrainReport {
  std::vector<EpochLog> history;
  int best_epoch = 0;
  double best_score = 0.0;
  std::optional<EpochLog> best;
  std::filesystem::path out_dir;
};

/// Loss and metrics of a model over a prepared set (heatmap pixel DTT).
struct SetEvaluation {
  double loss = 0.0;
  MetricsReport metrics;
};

SetEvaluation evaluate_prepared(const Model& model, const std::vector<PreparedSample>& set,
                                const LossConfig& loss, double alpha, double threshold);

struct StepResult {
  LossBreakdown loss;  // mean over the batch, before the update
};

/// Mean-of-batch gradient step. Throws NonFiniteLossError naming L_v or L_sk.
StepResult train_step(Model& model, RmsProp& optimizer, const std::vector<const PreparedSample*>& batch,
                      const LossConfig& loss, double& alpha, double learning_rate, Rng& rng);

/// Batch-mean loss and gradients without touching the parameters.
LossBreakdown batch_gradients(const Model& model, const std::vector<const PreparedSample*>& batch,
                              const LossConfig& loss, double alpha, Rng& rng, Gradients& grads,
                              double* grad_alpha = nullptr);

struct TrainOptions {
  std::function<void(const EpochLog&)> on_epoch;  // progress hook
};

/// Fresh run into `out_dir`: train_log.csv, best.ckpt, last.ckpt, and
/// epoch_NNNN.ckpt every checkpoint_every epochs. An empty validation set
/// falls back to the training set.
TrainReport train(const TrainConfig& config, const std::vector<SpineSample>& train_set,
                  const std::vector<SpineSample>& val_set, const std::filesystem::path& out_dir,
                  const TrainOptions& options = {});

struct ResumeOptions {
  std::optional<int> total_epochs;               // default: stored config.epochs
  std::optional<std::filesystem::path> out_dir;  // default: checkpoint's directory
  TrainOptions train;
};

/// Continues from the stored epoch, optimizer and rng state, appending to
/// train_log.csv.
TrainReport resume(const std::filesystem::path& checkpoint_path,
                   const std::vector<SpineSample>& train_set,
                   const std::vector<SpineSample>& val_set, const ResumeOptions& options = {});

}  // namespace hca
