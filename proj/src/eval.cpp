#include "sparsepair/eval.hpp"

#include <algorithm>
#include <numeric>

namespace sparsepair {

namespace {

RetrievalMetrics evaluate_impl(const RealMatrix& queries,
                               const RealMatrix& gallery,
                               const std::vector<ClassId>& query_labels,
                               const std::vector<ClassId>& gallery_labels,
                               Index max_k, bool exclude_self) {
  if (gallery.rows() == 0) throw EmptyInputError("evaluate: empty gallery");
  if (queries.cols() != gallery.cols())
    throw ShapeMismatchError("evaluate: query/gallery dim mismatch");

  RetrievalMetrics metrics;
  metrics.cmc.assign(static_cast<std::size_t>(max_k), 0.0);

  const RealMatrix sims = queries * gallery.transpose();
  std::vector<Index> order(static_cast<std::size_t>(gallery.rows()));

  double ap_sum = 0.0;
  Index evaluated = 0;
  for (Index q = 0; q < queries.rows(); ++q) {
    order.resize(static_cast<std::size_t>(gallery.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    if (exclude_self) order.erase(order.begin() + q);

    Index relevant_total = 0;
    for (const Index g : order)
      if (gallery_labels[static_cast<std::size_t>(g)] ==
          query_labels[static_cast<std::size_t>(q)])
        ++relevant_total;
    if (relevant_total == 0) {
      ++metrics.skipped_queries;
      continue;
    }

    // descending similarity, ties to the lower gallery index
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      return sims(q, a) > sims(q, b);
    });

    double ap = 0.0;
    Index hits = 0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const bool relevant =
          gallery_labels[static_cast<std::size_t>(order[rank])] ==
          query_labels[static_cast<std::size_t>(q)];
      if (relevant) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(rank + 1);
        if (hits == 1 && static_cast<Index>(rank) < max_k) {
          // first relevant lands at this rank: every k > rank gets credit
          for (Index k = static_cast<Index>(rank); k < max_k; ++k)
            metrics.cmc[static_cast<std::size_t>(k)] += 1.0;
        }
      }
      if (hits == relevant_total && static_cast<Index>(rank) >= max_k - 1)
        break;
    }
    ap_sum += ap / static_cast<double>(relevant_total);
    ++evaluated;
  }

  if (evaluated > 0) {
    metrics.map = ap_sum / static_cast<double>(evaluated);
    for (auto& c : metrics.cmc) c /= static_cast<double>(evaluated);
  }
  return metrics;
}

}  // namespace

RetrievalMetrics evaluate(const RealMatrix& query_embeddings,
                          const RealMatrix& gallery_embeddings,
                          const std::vector<ClassId>& query_labels,
                          const std::vector<ClassId>& gallery_labels,
                          Index max_k) {
  return evaluate_impl(query_embeddings, gallery_embeddings, query_labels,
                       gallery_labels, max_k, false);
}

RetrievalMetrics evaluate_self(const RealMatrix& embeddings,
                               const std::vector<ClassId>& labels,
                               Index max_k) {
  if (embeddings.rows() < 2)
    throw EmptyInputError("evaluate_self: need >= 2 rows");
  return evaluate_impl(embeddings, embeddings, labels, labels, max_k, true);
}

}  // namespace sparsepair
