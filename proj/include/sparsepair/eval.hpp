#pragma once

#include <optional>
#include <vector>

#include "sparsepair/types.hpp"

namespace sparsepair {

struct RetrievalMetrics {
  double map = 0.0;
  std::vector<double> cmc;      // cmc[k-1] = CMC@k
  Index skipped_queries = 0;    // queries with no relevant gallery item

  double cmc_at(Index k) const {
    return cmc[static_cast<std::size_t>(k - 1)];
  }
};

/// Rank the gallery by descending dot similarity (ties to the lower gallery
/// index), AP = mean precision at each relevant rank, mAP = mean AP over
/// evaluable queries, CMC@k = fraction of queries with a relevant item in the
/// top k. Queries without any relevant item are skipped and counted.
RetrievalMetrics evaluate(const RealMatrix& query_embeddings,
                          const RealMatrix& gallery_embeddings,
                          const std::vector<ClassId>& query_labels,
                          const std::vector<ClassId>& gallery_labels,
                          Index max_k = 5);

/// Query set == gallery set, self-match excluded (ReID convention).
RetrievalMetrics evaluate_self(const RealMatrix& embeddings,
                               const std::vector<ClassId>& labels,
                               Index max_k = 5);

}  // namespace sparsepair
