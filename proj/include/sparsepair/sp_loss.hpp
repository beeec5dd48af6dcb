#pragma once

#include <vector>

#include "sparsepair/batch.hpp"
#include "sparsepair/numerics.hpp"
#include "sparsepair/types.hpp"

namespace sparsepair {

enum class SPVariant { Hard, LeastHard, Adaptive };

struct SPConfig {
  double tau = 0.04;
  SPVariant variant = SPVariant::Adaptive;
};

/// Per-class quantities the loss is assembled from. s_neg/s_pos_* are the
/// smoothed similarities; alpha is the gated harmonic-mean weight.
struct ClassDiagnostics {
  ClassId class_id = 0;
  double s_neg = 0.0;
  double s_pos_hard = 0.0;
  double s_pos_leasthard = 0.0;
  double alpha = 0.0;
  double s_pos_used = 0.0;
  RealVector per_instance_softmin;  // one entry per instance in the class
};

struct LossResult {
  double value = 0.0;
  RealMatrix grad;  // d(value)/d(embeddings), B x d
  std::vector<ClassDiagnostics> diagnostics;
};

/// Smoothed hardest-negative similarity for class i:
/// tau * log sum_{n in i} sum_{m not in i} exp(S[n][m]/tau).
/// Upper-bounds the true maximum cross-class similarity.
double soft_negative(const RealMatrix& S, const ClassView& view_i,
                     const std::vector<ClassView>& all_views, double tau);

/// Smoothed hardest-positive similarity:
/// -tau * log sum_{n != m in i} exp(-S[n][m]/tau) over ordered pairs.
/// Lower-bounds the true minimum intra-class similarity.
double soft_positive_hard(const RealMatrix& S, const ClassView& view_i,
                          double tau);

/// Smoothed per-instance minimum: -tau * log sum_{m != n} exp(-S[n][m]/tau).
/// n_local indexes into view_i.rows.
double soft_positive_per_instance(const RealMatrix& S, const ClassView& view_i,
                                  Index n_local, double tau);

/// Smoothed least-hard positive: tau * log sum_n exp(s_n/tau) over the
/// per-instance smoothed minima s_n.
double soft_positive_leasthard(const RealMatrix& S, const ClassView& view_i,
                               double tau);
double soft_positive_leasthard(const RealMatrix& S, const ClassView& view_i,
                               double tau, RealVector* per_instance_out);

/// Gated harmonic mean of the two positive similarities. Zero when the
/// hardest similarity is negative or when the denominator vanishes.
double adaptive_weight(double s_hard, double s_leasthard);

/// SP loss over a mini-batch: mean over usable classes (>= 2 instances) of
/// softplus((S_i^- - S_i^+)/tau), with the positive similarity chosen by the
/// variant. Classes with fewer than two instances are excluded entirely
/// (no loss term, not in any negative pool, zero gradient rows).
///
/// The gradient is the exact derivative w.r.t. the embedding rows, with the
/// adaptive weight treated as a constant (no gradient flows through alpha).
/// frozen_alpha, when given, pins the per-usable-class weights instead of
/// recomputing them — this is how a finite-difference probe evaluates the
/// same function the analytic gradient differentiates.
LossResult sp_loss(const EmbeddingBatch& batch, const SPConfig& cfg,
                   const std::vector<double>* frozen_alpha = nullptr);

/// One term of the batch loss.
inline double class_loss_term(double s_neg, double s_pos, double tau) {
  return stable_softplus((s_neg - s_pos) / tau);
}

}  // namespace sparsepair
