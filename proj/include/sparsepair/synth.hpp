#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparsepair/types.hpp"

namespace sparsepair {

/// Spherical cluster generator settings. Points are drawn as
/// normalize(mean + gaussian / sqrt(concentration)); a per-class subset is
/// regenerated with the noise scaled by outlier_spread and flagged harmful.
struct SyntheticSpec {
  Index num_classes = 10;
  Index per_class = 50;
  Index dim = 16;
  double concentration = 100.0;
  double outlier_fraction = 0.0;
  double outlier_spread = 10.0;
  std::uint64_t rng_seed = 1;
};

struct LabeledDataset {
  RealMatrix points;            // unit rows
  std::vector<ClassId> labels;
  std::vector<bool> harmful_mask;

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }
  std::vector<ClassId> distinct_classes() const;
};

LabeledDataset generate(const SyntheticSpec& spec);

/// Binary container: magic "SPDS1", LE u32 rows, u32 dim, rows*dim f64,
/// rows u32 labels, rows u8 mask. Round-trips bit-exactly.
void save(const LabeledDataset& ds, const std::string& path);
LabeledDataset load(const std::string& path);

/// JSON mirror of the binary fields (diagnostic export, not the primary
/// persistence path).
void save_json(const LabeledDataset& ds, const std::string& path);

}  // namespace sparsepair
