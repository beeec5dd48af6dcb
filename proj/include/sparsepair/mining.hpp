#pragma once

#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "sparsepair/batch.hpp"
#include "sparsepair/types.hpp"

namespace sparsepair {

using RowPair = std::pair<Index, Index>;

/// Positive-mining rules. The anchor-based rows mirror the dense losses they
/// come from; the SP rows are class-level and anchor-free.
enum class MiningKind {
  TripletBH,
  MSCondition,
  Circle,
  MP,
  EP,
  SPHard,
  SPLeastHard,
  SPAdaptive,
};

struct MiningStrategy {
  MiningKind kind = MiningKind::SPHard;
  double epsilon = 0.1;  // MSCondition slack only

  static MiningStrategy ms_condition(double eps) {
    return MiningStrategy{MiningKind::MSCondition, eps};
  }
};

inline bool is_anchor_based(MiningKind k) {
  return k == MiningKind::TripletBH || k == MiningKind::MSCondition ||
         k == MiningKind::Circle || k == MiningKind::MP || k == MiningKind::EP;
}

/// Result of one selection. pairs holds a single pair for most strategies,
/// the admitted set for MSCondition, and {hard, least-hard} for SPAdaptive.
/// selected_similarity is the similarity of the chosen pair (the blended
/// value for SPAdaptive, the minimum admitted one for MSCondition).
struct MiningSelection {
  std::optional<Index> anchor;
  std::vector<RowPair> pairs;
  double selected_similarity = 0.0;
  std::optional<double> alpha;  // SPAdaptive only

  const RowPair& pair() const { return pairs.front(); }
};

/// Per-row hardest-negative similarities, needed by the MS and MP rules.
RealVector negative_context(const RealMatrix& S,
                            const std::vector<ClassView>& views);

/// Exact (non-smoothed) positive selection. Anchor-based strategies require
/// `anchor` (a batch row inside view_i); class-level ones ignore it. All ties
/// break toward the lexicographically lowest (row, col) pair.
MiningSelection select_positive(const RealMatrix& S, const ClassView& view_i,
                                const MiningStrategy& strategy,
                                std::optional<Index> anchor = std::nullopt,
                                const RealVector* neg_context = nullptr);

/// Maximum-similarity inter-class pair touching class i.
std::pair<RowPair, double> select_negative_hardest(
    const RealMatrix& S, const ClassView& view_i,
    const std::vector<ClassView>& all_views);

// ---------------------------------------------------------------------------
// Monte Carlo check of the harmful-pair sampling bound.
//
// Each ID draws an M x M positive-similarity matrix with independent uniform
// [0,1] off-diagonal entries (no symmetrization: entry (n,m) is the pair
// anchored at instance n, so the M row-argmin slots dense sampling takes are
// distinct objects, which is what makes the K_h < M case exact). The K_h
// lowest-similarity slots are harmful. Dense sampling takes every row's
// argmin slot (M slots, Eq.-style N*M denominator); SP keeps only the
// highest-similarity slot among them (one slot per ID).
// ---------------------------------------------------------------------------

struct HarmfulSimConfig {
  Index num_ids = 16;
  Index instances = 4;                   // M
  std::vector<Index> harmful_per_id;     // K_h; single entry broadcasts
  Index trials = 1000;
  std::uint64_t rng_seed = 1;
  int workers = 1;

  Index harmful_for(Index id) const {
    if (harmful_per_id.empty()) return 0;
    return harmful_per_id.size() == 1
               ? harmful_per_id.front()
               : harmful_per_id[static_cast<std::size_t>(id)];
  }
};

struct HarmfulTrialRecord {
  std::uint64_t seed = 0;
  Index sp_hits = 0;     // IDs whose SP slot was harmful
  Index dense_hits = 0;  // harmful slots among the N*M dense ones
  Index situation1_sp_hits = 0;
};

struct HarmfulSimResult {
  double p_sp = 0.0;    // sp hits / (trials * num_ids)
  double p_dense = 0.0; // dense hits / (trials * num_ids * M)
  long long situation1_sp_hits = 0;
  std::vector<HarmfulTrialRecord> trials;
};

HarmfulSimResult run_harmful_sim(const HarmfulSimConfig& cfg);

}  // namespace sparsepair
