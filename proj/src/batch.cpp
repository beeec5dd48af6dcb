#include "sparsepair/batch.hpp"

#include <algorithm>
#include <map>

#include "sparsepair/synth.hpp"

namespace sparsepair {

std::vector<ClassView> class_views(const std::vector<ClassId>& labels) {
  std::vector<ClassView> views;
  std::map<ClassId, std::size_t> slot;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    auto [it, inserted] = slot.try_emplace(labels[r], views.size());
    if (inserted) views.push_back(ClassView{labels[r], {}});
    views[it->second].rows.push_back(static_cast<Index>(r));
  }
  return views;
}

std::vector<ClassView> class_views(const EmbeddingBatch& batch) {
  return class_views(batch.labels);
}

namespace {

// class id -> dataset row positions, in label order of first appearance
std::vector<ClassView> dataset_views(const LabeledDataset& dataset) {
  return class_views(dataset.labels);
}

void sample_class_rows(const ClassView& view, Index n, Rng& rng,
                       std::vector<Index>& out) {
  const Index have = view.size();
  if (have >= n) {
    std::vector<Index> perm = view.rows;
    rng.shuffle(perm.begin(), perm.end());
    out.insert(out.end(), perm.begin(), perm.begin() + n);
  } else {
    // upsample with replacement so the batch stays rectangular
    for (Index i = 0; i < n; ++i)
      out.push_back(view.rows[rng.below(static_cast<std::uint64_t>(have))]);
  }
}

EmbeddingBatch assemble(const LabeledDataset& dataset,
                        const std::vector<Index>& rows, Index k, Index n) {
  EmbeddingBatch batch;
  batch.num_classes = k;
  batch.instances_per_class = n;
  batch.embeddings.resize(static_cast<Index>(rows.size()), dataset.dim());
  batch.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    batch.embeddings.row(static_cast<Index>(i)) = dataset.points.row(rows[i]);
    batch.labels.push_back(dataset.labels[static_cast<std::size_t>(rows[i])]);
  }
  return batch;
}

}  // namespace

EmbeddingBatch pk_sample(const LabeledDataset& dataset, Index k, Index n,
                         std::uint64_t rng_seed) {
  const auto views = dataset_views(dataset);
  if (static_cast<Index>(views.size()) < k)
    throw TooFewClassesError("pk_sample: dataset has " +
                             std::to_string(views.size()) +
                             " classes, need " + std::to_string(k));
  Rng rng(derive_seed(rng_seed, "pk_sample"));
  std::vector<std::size_t> order(views.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order.begin(), order.end());

  std::vector<Index> rows;
  rows.reserve(static_cast<std::size_t>(k * n));
  for (Index c = 0; c < k; ++c)
    sample_class_rows(views[order[static_cast<std::size_t>(c)]], n, rng, rows);
  return assemble(dataset, rows, k, n);
}

PkSampler::PkSampler(const LabeledDataset& dataset, Index k, Index n,
                     std::uint64_t rng_seed)
    : dataset_(&dataset), k_(k), n_(n), rng_(derive_seed(rng_seed, "pk")) {
  const auto views = dataset_views(dataset);
  if (static_cast<Index>(views.size()) < k)
    throw TooFewClassesError("PkSampler: dataset has " +
                             std::to_string(views.size()) +
                             " classes, need " + std::to_string(k));
  for (const auto& v : views) class_order_.push_back(v.class_id);
  batches_per_epoch_ = static_cast<Index>(class_order_.size()) / k_;
  reshuffle();
}

void PkSampler::reshuffle() {
  rng_.shuffle(class_order_.begin(), class_order_.end());
  cursor_ = 0;
}

EmbeddingBatch PkSampler::next() {
  // drop the trailing incomplete class group
  if (cursor_ + static_cast<std::size_t>(k_) > class_order_.size())
    reshuffle();

  const auto views = dataset_views(*dataset_);
  std::vector<Index> rows;
  rows.reserve(static_cast<std::size_t>(k_ * n_));
  for (Index c = 0; c < k_; ++c) {
    const ClassId id = class_order_[cursor_++];
    const auto it = std::find_if(views.begin(), views.end(),
                                 [id](const ClassView& v) {
                                   return v.class_id == id;
                                 });
    sample_class_rows(*it, n_, rng_, rows);
  }
  return assemble(*dataset_, rows, k_, n_);
}

}  // namespace sparsepair
