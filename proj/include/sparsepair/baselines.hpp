#pragma once

#include <vector>

#include "sparsepair/batch.hpp"
#include "sparsepair/sp_loss.hpp"
#include "sparsepair/types.hpp"

namespace sparsepair {

enum class PositiveRule { Hardest, Easiest };

struct TripletConfig {
  double margin = 0.3;
  PositiveRule positive_rule = PositiveRule::Hardest;
};

struct ClassifierHead {
  RealMatrix weights;  // num_classes x d
  RealVector bias;     // num_classes
};

/// Similarity-form triplet loss with per-anchor exact mining:
/// mean over anchors of max(0, margin + S_a^- - S_a^+), hardest negative per
/// anchor, positive per cfg.positive_rule. Anchors in singleton classes are
/// skipped. Subgradient at the hinge kink is taken as zero.
LossResult triplet_bh_loss(const EmbeddingBatch& batch,
                           const TripletConfig& cfg);

struct IdentityLossResult {
  double value = 0.0;
  RealMatrix grad_features;
  RealMatrix grad_weights;
  RealVector grad_bias;
};

/// Mean softmax cross-entropy of features * W^T + b against the labels.
IdentityLossResult identity_loss(const RealMatrix& features,
                                 const std::vector<ClassId>& labels,
                                 const ClassifierHead& head);

enum class MetricKind { SPHard, SPLeastHard, AdaSP, TripletBH, EPTriplet };

struct CombinedConfig {
  MetricKind metric = MetricKind::AdaSP;
  double lambda = 0.1;
  double tau = 0.04;
  double margin = 0.3;
};

struct CombinedLossResult {
  double value = 0.0;
  double value_identity = 0.0;
  double value_metric = 0.0;
  RealMatrix grad_embeddings;  // identity-part + lambda * metric-part
  RealMatrix grad_weights;
  RealVector grad_bias;
  std::vector<ClassDiagnostics> metric_diagnostics;
};

/// Eq.-10-style objective: identity + lambda * metric, both evaluated on the
/// batch's unit embeddings. Gradients add linearly.
CombinedLossResult combined_loss(const EmbeddingBatch& batch,
                                 const ClassifierHead& head,
                                 const CombinedConfig& cfg);

/// The metric part alone (value + gradient w.r.t. embeddings).
LossResult metric_loss(const EmbeddingBatch& batch, MetricKind kind,
                       double tau, double margin);

}  // namespace sparsepair
