#pragma once

#include <vector>

#include "sparsepair/rng.hpp"
#include "sparsepair/types.hpp"

namespace sparsepair {

struct LabeledDataset;

/// A PK mini-batch: K classes with N instances each, rows grouped
/// contiguously by class, every row unit-norm.
struct EmbeddingBatch {
  RealMatrix embeddings;         // B x d
  std::vector<ClassId> labels;   // length B
  Index num_classes = 0;         // K
  Index instances_per_class = 0; // N

  Index size() const { return embeddings.rows(); }
  Index dim() const { return embeddings.cols(); }
};

struct ClassView {
  ClassId class_id = 0;
  std::vector<Index> rows;  // strictly increasing batch row positions

  Index size() const { return static_cast<Index>(rows.size()); }
};

/// One view per distinct label, in order of first appearance; views cover all
/// rows and are pairwise disjoint.
std::vector<ClassView> class_views(const EmbeddingBatch& batch);
std::vector<ClassView> class_views(const std::vector<ClassId>& labels);

/// Draw one PK batch: K distinct classes, N rows each. Classes with fewer
/// than N items are upsampled with replacement; both class order and
/// within-class order come from the seeded generator.
EmbeddingBatch pk_sample(const LabeledDataset& dataset, Index k, Index n,
                         std::uint64_t rng_seed);

/// Epoch-structured PK sampling: shuffles the class list once per epoch and
/// deals consecutive groups of K; the trailing incomplete group is dropped.
class PkSampler {
 public:
  PkSampler(const LabeledDataset& dataset, Index k, Index n,
            std::uint64_t rng_seed);

  EmbeddingBatch next();
  Index batches_per_epoch() const { return batches_per_epoch_; }

 private:
  const LabeledDataset* dataset_;
  Index k_;
  Index n_;
  Rng rng_;
  std::vector<ClassId> class_order_;
  std::size_t cursor_ = 0;
  Index batches_per_epoch_ = 0;

  void reshuffle();
};

}  // namespace sparsepair
