#pragma once

#include <string>
#include <vector>

#include "sparsepair/baselines.hpp"
#include "sparsepair/eval.hpp"
#include "sparsepair/synth.hpp"
#include "sparsepair/types.hpp"

namespace sparsepair {

enum class ModelKind { Linear, OneHidden };

struct TrainConfig {
  Index epochs = 60;
  Index batch_k = 4;
  Index batch_n = 8;
  double lr_base = 3.5e-4;
  double warmup_fraction = 0.1;
  double weight_decay = 5e-4;
  double tau = 0.04;
  double lambda = 0.1;
  MetricKind loss_kind = MetricKind::AdaSP;
  bool use_identity = true;
  std::uint64_t seed = 1;
  Index embed_dim = 16;
  double margin = 0.3;
  ModelKind model = ModelKind::Linear;
  Index hidden_dim = 32;

  void validate() const;
};

/// Feature -> embedding map. Linear: y = x W1^T + b1. OneHidden:
/// y = tanh(x W1^T + b1) W2^T + b2. Embeddings are the row-normalized y.
struct EmbedModel {
  ModelKind kind = ModelKind::Linear;
  RealMatrix w1;  // out x in
  RealVector b1;
  RealMatrix w2;  // embed x hidden (OneHidden only)
  RealVector b2;

  Index input_dim() const { return w1.cols(); }
  Index embed_dim() const {
    return kind == ModelKind::Linear ? w1.rows() : w2.rows();
  }

  /// Raw (pre-normalization) outputs for a feature matrix.
  RealMatrix forward(const RealMatrix& x) const;
};

/// Semi-orthogonal initial weights: a random rotation when square, so the
/// initial embedding preserves the input geometry.
EmbedModel init_model(ModelKind kind, Index input_dim, Index embed_dim,
                      Index hidden_dim, std::uint64_t seed);

// --- Adam ------------------------------------------------------------------

struct AdamState {
  std::vector<RealVector> m;  // first/second moments, one flat pair per tensor
  std::vector<RealVector> v;
  long long step = 0;
};

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// A parameter tensor and its gradient, viewed flat.
struct TensorRef {
  double* param = nullptr;
  const double* grad = nullptr;
  Index size = 0;
};

AdamState make_adam_state(const std::vector<Index>& sizes);

/// One Adam update (bias-corrected moments) over a parameter group. Weight
/// decay enters as a classic L2 term added to each gradient.
void adam_step(const std::vector<TensorRef>& tensors, AdamState& state,
               double lr, double weight_decay,
               const AdamParams& hp = AdamParams{});

/// Convenience overload for whole-matrix parameter groups.
void adam_step(const std::vector<RealMatrix*>& params,
               const std::vector<const RealMatrix*>& grads, AdamState& state,
               double lr, double weight_decay,
               const AdamParams& hp = AdamParams{});

/// Linear ramp from lr_base/100 to lr_base over warmup_fraction*total_steps,
/// then constant.
double lr_schedule(long long step, long long total_steps,
                   const TrainConfig& cfg);

// --- Training loop ----------------------------------------------------------

/// Value and parameter gradients for one batch of raw features, with the
/// embedding-space gradient chained through the row normalization.
struct BatchGrads {
  double value = 0.0;
  double value_id = 0.0;
  double value_metric = 0.0;
  RealMatrix w1, w2;
  RealVector b1, b2;
  RealMatrix head_weights;
  RealVector head_bias;
};

BatchGrads batch_gradients(const EmbedModel& model, const ClassifierHead* head,
                           const RealMatrix& features,
                           const std::vector<ClassId>& labels,
                           const TrainConfig& cfg);

struct EpochMetrics {
  Index epoch = 0;
  double loss_total = 0.0;
  double loss_id = 0.0;
  double loss_metric = 0.0;
  double map = 0.0;
  double cmc1 = 0.0;
  double cmc5 = 0.0;
};

struct Checkpoint {
  EmbedModel model;
  ClassifierHead head;
  AdamState opt;
  Index epoch = 0;
  std::uint64_t config_hash = 0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochMetrics> log;

  const EpochMetrics& final_metrics() const { return log.back(); }
};

/// Deterministic single-threaded loop: PK batches (incomplete trailing class
/// group dropped each epoch), combined or metric-only loss, gradients chained
/// through the row normalization, Adam with warmup. Evaluates mAP / CMC on
/// the full dataset (self-match excluded) every epoch.
TrainResult train(const LabeledDataset& dataset, const TrainConfig& cfg);

std::uint64_t config_hash(const TrainConfig& cfg);

/// Checkpoint container (magic "SPCK1"), bit-exact round-trip.
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Embed a dataset with a trained model (rows normalized).
RealMatrix embed_dataset(const EmbedModel& model, const RealMatrix& features);

const char* metric_kind_name(MetricKind kind);
MetricKind metric_kind_from_name(const std::string& name);

// --- Robustness sweep --------------------------------------------------------

struct RobustnessCell {
  MetricKind loss;
  Index n_per_class = 0;
  std::uint64_t seed = 0;
  double map = 0.0;
  double cmc1 = 0.0;
  double cmc5 = 0.0;
  double rel_drop = 0.0;  // vs the same loss/seed at the smallest N
};

struct RobustnessReport {
  std::vector<RobustnessCell> cells;

  /// Median over seeds of the relative mAP drop from the smallest N to `n`.
  double median_drop(MetricKind loss, Index n) const;
};

/// Trains every (loss, N, seed) cell with an otherwise identical config and
/// reports absolute metrics plus relative drops against that loss's smallest-N
/// score for the same seed.
RobustnessReport robustness_sweep(const LabeledDataset& dataset,
                                  const std::vector<MetricKind>& losses,
                                  const std::vector<Index>& ns,
                                  const std::vector<std::uint64_t>& seeds,
                                  const TrainConfig& base_cfg);

}  // namespace sparsepair
