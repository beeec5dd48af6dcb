#include "sparsepair/sp_loss.hpp"

#include <cmath>

#include "sparsepair/numerics.hpp"

namespace sparsepair {

namespace {

std::vector<ClassView> usable_views(const std::vector<ClassView>& views) {
  std::vector<ClassView> out;
  for (const auto& v : views)
    if (v.size() >= 2) out.push_back(v);
  return out;
}

// clamped intra-class similarities of view row n_local against its class
// peers, ordered as view.rows with n_local removed
RealVector intra_row(const RealMatrix& S, const ClassView& view,
                     Index n_local) {
  const Index n_rows = view.size();
  RealVector vals(n_rows - 1);
  Index w = 0;
  const Index row = view.rows[static_cast<std::size_t>(n_local)];
  for (Index m = 0; m < n_rows; ++m) {
    if (m == n_local) continue;
    vals[w++] = clamp_sim(S(row, view.rows[static_cast<std::size_t>(m)]));
  }
  return vals;
}

}  // namespace

double soft_negative(const RealMatrix& S, const ClassView& view_i,
                     const std::vector<ClassView>& all_views, double tau) {
  std::vector<double> vals;
  for (const auto& other : all_views) {
    if (other.class_id == view_i.class_id) continue;
    for (const Index n : view_i.rows)
      for (const Index m : other.rows) vals.push_back(clamp_sim(S(n, m)));
  }
  if (vals.empty())
    throw NoNegativesError("soft_negative: no other class in batch");
  return logsumexp(Eigen::Map<const RealVector>(vals.data(),
                                                static_cast<Index>(vals.size())),
                   tau);
}

double soft_positive_hard(const RealMatrix& S, const ClassView& view_i,
                          double tau) {
  const Index n_rows = view_i.size();
  if (n_rows < 2)
    throw SingletonClassError("soft_positive_hard: class needs >= 2 rows");
  RealVector vals(n_rows * (n_rows - 1));  // ordered pairs, diagonal excluded
  Index w = 0;
  for (Index n = 0; n < n_rows; ++n)
    for (Index m = 0; m < n_rows; ++m) {
      if (n == m) continue;
      vals[w++] = clamp_sim(S(view_i.rows[static_cast<std::size_t>(n)],
                              view_i.rows[static_cast<std::size_t>(m)]));
    }
  return softmin(vals, tau);
}

double soft_positive_per_instance(const RealMatrix& S, const ClassView& view_i,
                                  Index n_local, double tau) {
  if (view_i.size() < 2)
    throw SingletonClassError(
        "soft_positive_per_instance: class needs >= 2 rows");
  return softmin(intra_row(S, view_i, n_local), tau);
}

double soft_positive_leasthard(const RealMatrix& S, const ClassView& view_i,
                               double tau, RealVector* per_instance_out) {
  const Index n_rows = view_i.size();
  if (n_rows < 2)
    throw SingletonClassError("soft_positive_leasthard: class needs >= 2 rows");
  RealVector per_instance(n_rows);
  for (Index n = 0; n < n_rows; ++n)
    per_instance[n] = softmin(intra_row(S, view_i, n), tau);
  const double result = logsumexp(per_instance, tau);
  if (per_instance_out) *per_instance_out = std::move(per_instance);
  return result;
}

double soft_positive_leasthard(const RealMatrix& S, const ClassView& view_i,
                               double tau) {
  return soft_positive_leasthard(S, view_i, tau, nullptr);
}

double adaptive_weight(double s_hard, double s_leasthard) {
  if (s_hard < 0.0) return 0.0;
  const double denom = s_hard + s_leasthard;
  if (denom <= 1e-12) return 0.0;
  return 2.0 * s_leasthard * s_hard / denom;
}

LossResult sp_loss(const EmbeddingBatch& batch, const SPConfig& cfg,
                   const std::vector<double>* frozen_alpha) {
  const auto views = usable_views(class_views(batch));
  if (views.empty())
    throw NoUsableClassesError("sp_loss: every class is singleton");
  if (views.size() < 2)
    throw NoNegativesError("sp_loss: fewer than two usable classes");

  const double tau = cfg.tau;
  const Index b = batch.size();
  const double k_usable = static_cast<double>(views.size());
  const RealMatrix S = pairwise_similarity(batch.embeddings);

  LossResult result;
  result.grad = RealMatrix::Zero(b, batch.dim());
  RealMatrix g_sim = RealMatrix::Zero(b, b);  // d(value)/dS over ordered slots

  double total = 0.0;
  for (std::size_t ci = 0; ci < views.size(); ++ci) {
    const ClassView& view = views[ci];
    const Index n_rows = view.size();

    // ----- negative side: soft max over this class's cross-class slots -----
    std::vector<Index> neg_rows;
    for (const auto& other : views)
      if (other.class_id != view.class_id)
        neg_rows.insert(neg_rows.end(), other.rows.begin(), other.rows.end());

    RealMatrix neg_vals(n_rows, static_cast<Index>(neg_rows.size()));
    for (Index n = 0; n < n_rows; ++n)
      for (std::size_t m = 0; m < neg_rows.size(); ++m)
        neg_vals(n, static_cast<Index>(m)) =
            clamp_sim(S(view.rows[static_cast<std::size_t>(n)], neg_rows[m]));
    const double neg_max = neg_vals.maxCoeff();
    const RealMatrix neg_exp = ((neg_vals.array() - neg_max) / tau).exp();
    const double neg_sum = neg_exp.sum();
    const double s_neg = neg_max + tau * std::log(neg_sum);

    // ----- positive side: per-instance soft minima and their two blends ----
    RealVector per_instance(n_rows);
    std::vector<RealVector> row_weights(static_cast<std::size_t>(n_rows));
    for (Index n = 0; n < n_rows; ++n) {
      const RealVector vals = intra_row(S, view, n);
      const double row_min = vals.minCoeff();
      const RealVector e = ((row_min - vals.array()) / tau).exp();
      const double esum = e.sum();
      per_instance[n] = row_min - tau * std::log(esum);
      row_weights[static_cast<std::size_t>(n)] = e / esum;
    }
    // hard = soft min of the per-instance values; sum_n exp(-s_n/tau) equals
    // the flat ordered-pair sum, and the softmax weights factorize the same way
    const double pi_min = per_instance.minCoeff();
    const RealVector hard_outer_e =
        ((pi_min - per_instance.array()) / tau).exp();
    const double hard_outer_sum = hard_outer_e.sum();
    const double s_hard = pi_min - tau * std::log(hard_outer_sum);
    const RealVector hard_outer = hard_outer_e / hard_outer_sum;

    const double pi_max = per_instance.maxCoeff();
    const RealVector lh_outer_e = ((per_instance.array() - pi_max) / tau).exp();
    const double lh_outer_sum = lh_outer_e.sum();
    const double s_leasthard = pi_max + tau * std::log(lh_outer_sum);
    const RealVector lh_outer = lh_outer_e / lh_outer_sum;

    double alpha_eq7 = adaptive_weight(s_hard, s_leasthard);
    double alpha_used;
    switch (cfg.variant) {
      case SPVariant::Hard:
        alpha_used = 1.0;
        break;
      case SPVariant::LeastHard:
        alpha_used = 0.0;
        break;
      case SPVariant::Adaptive:
      default:
        alpha_used =
            frozen_alpha ? (*frozen_alpha)[ci] : alpha_eq7;
        if (frozen_alpha) alpha_eq7 = alpha_used;
        break;
    }
    const double s_pos =
        alpha_used * s_hard + (1.0 - alpha_used) * s_leasthard;

    const double u = (s_neg - s_pos) / tau;
    total += stable_softplus(u);
    const double coeff = stable_sigmoid(u) / (k_usable * tau);

    // d(value)/dS: + for negative slots, - for the blended positive slots
    for (Index n = 0; n < n_rows; ++n) {
      const Index row_n = view.rows[static_cast<std::size_t>(n)];
      for (std::size_t m = 0; m < neg_rows.size(); ++m)
        g_sim(row_n, neg_rows[m]) +=
            coeff * neg_exp(n, static_cast<Index>(m)) / neg_sum;

      const double outer =
          alpha_used * hard_outer[n] + (1.0 - alpha_used) * lh_outer[n];
      Index w = 0;
      for (Index m = 0; m < n_rows; ++m) {
        if (m == n) continue;
        const Index row_m = view.rows[static_cast<std::size_t>(m)];
        g_sim(row_n, row_m) -=
            coeff * outer * row_weights[static_cast<std::size_t>(n)][w++];
      }
    }

    ClassDiagnostics diag;
    diag.class_id = view.class_id;
    diag.s_neg = s_neg;
    diag.s_pos_hard = s_hard;
    diag.s_pos_leasthard = s_leasthard;
    diag.alpha = alpha_eq7;
    diag.s_pos_used = s_pos;
    diag.per_instance_softmin = per_instance;
    result.diagnostics.push_back(std::move(diag));
  }

  result.value = total / k_usable;
  // S_ab = z_a . z_b, so dL/dZ = (G + G^T) Z
  result.grad = (g_sim + g_sim.transpose()) * batch.embeddings;
  return result;
}

}  // namespace sparsepair
