#include "sparsepair/baselines.hpp"

#include <algorithm>
#include <limits>

#include "sparsepair/numerics.hpp"

namespace sparsepair {

LossResult triplet_bh_loss(const EmbeddingBatch& batch,
                           const TripletConfig& cfg) {
  const auto all_views = class_views(batch);
  std::vector<ClassView> views;
  for (const auto& v : all_views)
    if (v.size() >= 2) views.push_back(v);
  if (views.empty())
    throw NoUsableClassesError("triplet_bh_loss: every class is singleton");
  if (views.size() < 2)
    throw NoNegativesError("triplet_bh_loss: fewer than two usable classes");

  const RealMatrix S = pairwise_similarity(batch.embeddings);
  const Index b = batch.size();
  RealMatrix g_sim = RealMatrix::Zero(b, b);

  Index anchors = 0;
  for (const auto& v : views) anchors += v.size();
  const double inv_b = 1.0 / static_cast<double>(anchors);

  double total = 0.0;
  for (const auto& view : views) {
    for (Index a_local = 0; a_local < view.size(); ++a_local) {
      const Index a = view.rows[static_cast<std::size_t>(a_local)];

      // hardest negative for this anchor (usable classes only)
      Index neg = -1;
      double neg_sim = -std::numeric_limits<double>::infinity();
      for (const auto& other : views) {
        if (other.class_id == view.class_id) continue;
        for (const Index m : other.rows)
          if (S(a, m) > neg_sim) {
            neg_sim = S(a, m);
            neg = m;
          }
      }

      // positive per rule
      Index pos = -1;
      double pos_sim = 0.0;
      for (Index m_local = 0; m_local < view.size(); ++m_local) {
        if (m_local == a_local) continue;
        const Index m = view.rows[static_cast<std::size_t>(m_local)];
        const bool take =
            pos < 0 || (cfg.positive_rule == PositiveRule::Hardest
                            ? S(a, m) < pos_sim
                            : S(a, m) > pos_sim);
        if (take) {
          pos_sim = S(a, m);
          pos = m;
        }
      }

      const double hinge = cfg.margin + neg_sim - pos_sim;
      if (hinge > 0.0) {  // exactly at the kink contributes no gradient
        total += hinge;
        g_sim(a, neg) += inv_b;
        g_sim(a, pos) -= inv_b;
      }
    }
  }

  LossResult result;
  result.value = total * inv_b;
  result.grad = (g_sim + g_sim.transpose()) * batch.embeddings;
  return result;
}

IdentityLossResult identity_loss(const RealMatrix& features,
                                 const std::vector<ClassId>& labels,
                                 const ClassifierHead& head) {
  const Index b = features.rows();
  const Index c = head.weights.rows();
  if (static_cast<Index>(labels.size()) != b)
    throw ShapeMismatchError("identity_loss: labels/features length mismatch");
  if (head.weights.cols() != features.cols() || head.bias.size() != c)
    throw ShapeMismatchError("identity_loss: head shape mismatch");
  for (const ClassId label : labels)
    if (static_cast<Index>(label) >= c)
      throw LabelOutOfRangeError("identity_loss: label " +
                                 std::to_string(label) + " >= " +
                                 std::to_string(c));

  RealMatrix logits = features * head.weights.transpose();
  logits.rowwise() += head.bias.transpose();

  const double inv_b = 1.0 / static_cast<double>(b);
  double total = 0.0;
  RealMatrix dlogits(b, c);
  for (Index r = 0; r < b; ++r) {
    const double row_max = logits.row(r).maxCoeff();
    const RealVector e = (logits.row(r).array() - row_max).exp();
    const double z = e.sum();
    const Index y = static_cast<Index>(labels[static_cast<std::size_t>(r)]);
    total += std::log(z) + row_max - logits(r, y);
    dlogits.row(r) = (e / z).transpose() * inv_b;
    dlogits(r, y) -= inv_b;
  }

  IdentityLossResult result;
  result.value = total * inv_b;
  result.grad_features = dlogits * head.weights;
  result.grad_weights = dlogits.transpose() * features;
  result.grad_bias = dlogits.colwise().sum().transpose();
  return result;
}

LossResult metric_loss(const EmbeddingBatch& batch, MetricKind kind,
                       double tau, double margin) {
  switch (kind) {
    case MetricKind::SPHard:
      return sp_loss(batch, SPConfig{tau, SPVariant::Hard});
    case MetricKind::SPLeastHard:
      return sp_loss(batch, SPConfig{tau, SPVariant::LeastHard});
    case MetricKind::AdaSP:
      return sp_loss(batch, SPConfig{tau, SPVariant::Adaptive});
    case MetricKind::TripletBH:
      return triplet_bh_loss(batch, TripletConfig{margin, PositiveRule::Hardest});
    case MetricKind::EPTriplet:
    default:
      return triplet_bh_loss(batch, TripletConfig{margin, PositiveRule::Easiest});
  }
}

CombinedLossResult combined_loss(const EmbeddingBatch& batch,
                                 const ClassifierHead& head,
                                 const CombinedConfig& cfg) {
  if (cfg.lambda < 0.0)
    throw ShapeMismatchError("combined_loss: lambda must be >= 0");
  const IdentityLossResult id =
      identity_loss(batch.embeddings, batch.labels, head);
  LossResult metric = metric_loss(batch, cfg.metric, cfg.tau, cfg.margin);

  CombinedLossResult result;
  result.value_identity = id.value;
  result.value_metric = metric.value;
  result.value = id.value + cfg.lambda * metric.value;
  result.grad_embeddings = id.grad_features + cfg.lambda * metric.grad;
  result.grad_weights = id.grad_weights;
  result.grad_bias = id.grad_bias;
  result.metric_diagnostics = std::move(metric.diagnostics);
  return result;
}

}  // namespace sparsepair
