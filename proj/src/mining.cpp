#include "sparsepair/mining.hpp"

#include <algorithm>
#include <limits>
#include <thread>

#include "sparsepair/rng.hpp"
#include "sparsepair/sp_loss.hpp"

namespace sparsepair {

namespace {

RowPair ordered_pair(Index a, Index b) {
  return a <= b ? RowPair{a, b} : RowPair{b, a};
}

// true when (sim_a, pair_a) should be preferred over (sim_b, pair_b) as the
// minimum; ties go to the lexicographically lowest unordered pair
bool less_with_tie(double sim_a, RowPair a, double sim_b, RowPair b) {
  if (sim_a != sim_b) return sim_a < sim_b;
  return a < b;
}

bool greater_with_tie(double sim_a, RowPair a, double sim_b, RowPair b) {
  if (sim_a != sim_b) return sim_a > sim_b;
  return a < b;
}

Index local_of(const ClassView& view, Index batch_row) {
  const auto it = std::find(view.rows.begin(), view.rows.end(), batch_row);
  if (it == view.rows.end())
    throw ShapeMismatchError("anchor row not in the given class view");
  return static_cast<Index>(it - view.rows.begin());
}

// (partner local index, similarity) of the extreme intra pair for an anchor
std::pair<Index, double> anchor_extreme(const RealMatrix& S,
                                        const ClassView& view, Index a_local,
                                        bool want_min) {
  const Index a = view.rows[static_cast<std::size_t>(a_local)];
  Index best = -1;
  double best_sim = 0.0;
  for (Index m = 0; m < view.size(); ++m) {
    if (m == a_local) continue;
    const Index row_m = view.rows[static_cast<std::size_t>(m)];
    const double sim = S(a, row_m);
    const RowPair candidate = ordered_pair(a, row_m);
    if (best < 0) {
      best = m;
      best_sim = sim;
      continue;
    }
    const RowPair incumbent =
        ordered_pair(a, view.rows[static_cast<std::size_t>(best)]);
    const bool take = want_min
                          ? less_with_tie(sim, candidate, best_sim, incumbent)
                          : greater_with_tie(sim, candidate, best_sim, incumbent);
    if (take) {
      best = m;
      best_sim = sim;
    }
  }
  return {best, best_sim};
}

}  // namespace

RealVector negative_context(const RealMatrix& S,
                            const std::vector<ClassView>& views) {
  RealVector out =
      RealVector::Constant(S.rows(), -std::numeric_limits<double>::infinity());
  for (const auto& vi : views)
    for (const auto& vj : views) {
      if (vi.class_id == vj.class_id) continue;
      for (const Index a : vi.rows)
        for (const Index m : vj.rows) out[a] = std::max(out[a], S(a, m));
    }
  return out;
}

MiningSelection select_positive(const RealMatrix& S, const ClassView& view_i,
                                const MiningStrategy& strategy,
                                std::optional<Index> anchor,
                                const RealVector* neg_context) {
  if (view_i.size() < 2)
    throw SingletonClassError("select_positive: class needs >= 2 rows");

  MiningSelection sel;
  const MiningKind kind = strategy.kind;

  if (is_anchor_based(kind)) {
    if (!anchor)
      throw ShapeMismatchError("select_positive: strategy requires an anchor");
    const Index a = *anchor;
    const Index a_local = local_of(view_i, a);
    sel.anchor = a;

    switch (kind) {
      case MiningKind::TripletBH:
      case MiningKind::Circle: {
        const auto [m, sim] = anchor_extreme(S, view_i, a_local, true);
        sel.pairs = {ordered_pair(a, view_i.rows[static_cast<std::size_t>(m)])};
        sel.selected_similarity = sim;
        break;
      }
      case MiningKind::EP: {
        const auto [m, sim] = anchor_extreme(S, view_i, a_local, false);
        sel.pairs = {ordered_pair(a, view_i.rows[static_cast<std::size_t>(m)])};
        sel.selected_similarity = sim;
        break;
      }
      case MiningKind::MP: {
        if (!neg_context)
          throw ShapeMismatchError("select_positive: MP needs neg_context");
        const double gate = (*neg_context)[a];
        Index best = -1;
        double best_sim = 0.0;
        for (Index m = 0; m < view_i.size(); ++m) {
          const Index row_m = view_i.rows[static_cast<std::size_t>(m)];
          if (row_m == a) continue;
          const double sim = S(a, row_m);
          if (sim <= gate) continue;  // keep positives above the hardest negative
          if (best < 0 ||
              less_with_tie(sim, ordered_pair(a, row_m), best_sim,
                            ordered_pair(a, view_i.rows[static_cast<std::size_t>(
                                                best)]))) {
            best = m;
            best_sim = sim;
          }
        }
        if (best < 0)
          throw MPNoValidPositiveError(
              "select_positive: no positive above the anchor's hardest negative");
        sel.pairs = {
            ordered_pair(a, view_i.rows[static_cast<std::size_t>(best)])};
        sel.selected_similarity = best_sim;
        break;
      }
      case MiningKind::MSCondition: {
        if (!neg_context)
          throw ShapeMismatchError("select_positive: MS needs neg_context");
        const double gate = (*neg_context)[a] + strategy.epsilon;
        double min_selected = std::numeric_limits<double>::infinity();
        for (Index m = 0; m < view_i.size(); ++m) {
          const Index row_m = view_i.rows[static_cast<std::size_t>(m)];
          if (row_m == a) continue;
          const double sim = S(a, row_m);
          if (sim < gate) {
            sel.pairs.push_back(ordered_pair(a, row_m));
            min_selected = std::min(min_selected, sim);
          }
        }
        sel.selected_similarity = sel.pairs.empty() ? 0.0 : min_selected;
        break;
      }
      default:
        break;
    }
    return sel;
  }

  // class-level strategies
  const auto sp_hard = [&]() -> std::pair<RowPair, double> {
    RowPair best{-1, -1};
    double best_sim = 0.0;
    for (Index n = 0; n < view_i.size(); ++n)
      for (Index m = n + 1; m < view_i.size(); ++m) {
        const RowPair p =
            ordered_pair(view_i.rows[static_cast<std::size_t>(n)],
                         view_i.rows[static_cast<std::size_t>(m)]);
        const double sim = S(p.first, p.second);
        if (best.first < 0 || less_with_tie(sim, p, best_sim, best)) {
          best = p;
          best_sim = sim;
        }
      }
    return {best, best_sim};
  };

  const auto sp_leasthard = [&]() -> std::pair<RowPair, double> {
    RowPair best{-1, -1};
    double best_sim = 0.0;
    for (Index n = 0; n < view_i.size(); ++n) {
      const auto [m, sim] = anchor_extreme(S, view_i, n, true);
      const RowPair p =
          ordered_pair(view_i.rows[static_cast<std::size_t>(n)],
                       view_i.rows[static_cast<std::size_t>(m)]);
      if (best.first < 0 || greater_with_tie(sim, p, best_sim, best)) {
        best = p;
        best_sim = sim;
      }
    }
    return {best, best_sim};
  };

  switch (kind) {
    case MiningKind::SPHard: {
      const auto [p, sim] = sp_hard();
      sel.pairs = {p};
      sel.selected_similarity = sim;
      break;
    }
    case MiningKind::SPLeastHard: {
      const auto [p, sim] = sp_leasthard();
      sel.pairs = {p};
      sel.selected_similarity = sim;
      break;
    }
    case MiningKind::SPAdaptive: {
      const auto [ph, sim_h] = sp_hard();
      const auto [plh, sim_lh] = sp_leasthard();
      const double alpha = adaptive_weight(sim_h, sim_lh);
      sel.pairs = {ph, plh};
      sel.alpha = alpha;
      sel.selected_similarity = alpha * sim_h + (1.0 - alpha) * sim_lh;
      break;
    }
    default:
      throw ShapeMismatchError("select_positive: unhandled strategy");
  }
  return sel;
}

std::pair<RowPair, double> select_negative_hardest(
    const RealMatrix& S, const ClassView& view_i,
    const std::vector<ClassView>& all_views) {
  RowPair best{-1, -1};
  double best_sim = 0.0;
  for (const auto& other : all_views) {
    if (other.class_id == view_i.class_id) continue;
    for (const Index n : view_i.rows)
      for (const Index m : other.rows) {
        const RowPair p = ordered_pair(n, m);
        const double sim = S(n, m);
        if (best.first < 0 || greater_with_tie(sim, p, best_sim, best)) {
          best = p;
          best_sim = sim;
        }
      }
  }
  if (best.first < 0)
    throw NoNegativesError("select_negative_hardest: single-class batch");
  return {best, best_sim};
}

// ---------------------------------------------------------------------------
// Harmful-pair Monte Carlo
// ---------------------------------------------------------------------------

namespace {

HarmfulTrialRecord run_one_trial(const HarmfulSimConfig& cfg,
                                 std::uint64_t trial_seed) {
  const Index m = cfg.instances;
  Rng rng(trial_seed);
  HarmfulTrialRecord rec;
  rec.seed = trial_seed;

  RealMatrix sims(m, m);
  std::vector<std::pair<double, Index>> slot_order;  // (sim, flat slot id)
  for (Index id = 0; id < cfg.num_ids; ++id) {
    const Index k_h = cfg.harmful_for(id);

    // independent off-diagonal draws: slot (n,m) is the pair anchored at n
    for (Index r = 0; r < m; ++r)
      for (Index c = 0; c < m; ++c)
        sims(r, c) = r == c ? 2.0 : rng.uniform();

    slot_order.clear();
    for (Index r = 0; r < m; ++r)
      for (Index c = 0; c < m; ++c)
        if (r != c) slot_order.emplace_back(sims(r, c), r * m + c);
    std::sort(slot_order.begin(), slot_order.end());

    // harmful = the k_h lowest-similarity anchored slots
    std::vector<char> harmful(static_cast<std::size_t>(m * m), 0);
    for (Index k = 0; k < k_h; ++k)
      harmful[static_cast<std::size_t>(
          slot_order[static_cast<std::size_t>(k)].second)] = 1;

    // dense sampling: each anchor's argmin slot
    Index dense_hits = 0;
    Index sp_slot = -1;
    double sp_sim = -1.0;
    for (Index r = 0; r < m; ++r) {
      Index best_c = r == 0 ? 1 : 0;
      for (Index c = 0; c < m; ++c)
        if (c != r && sims(r, c) < sims(r, best_c)) best_c = c;
      const Index slot = r * m + best_c;
      if (harmful[static_cast<std::size_t>(slot)]) ++dense_hits;
      if (sims(r, best_c) > sp_sim) {
        sp_sim = sims(r, best_c);
        sp_slot = slot;
      }
    }

    const bool sp_hit = harmful[static_cast<std::size_t>(sp_slot)] != 0;
    rec.dense_hits += dense_hits;
    if (sp_hit) {
      ++rec.sp_hits;
      if (k_h < m) ++rec.situation1_sp_hits;
    }
  }
  return rec;
}

}  // namespace

HarmfulSimResult run_harmful_sim(const HarmfulSimConfig& cfg) {
  if (cfg.instances < 2)
    throw ShapeMismatchError("run_harmful_sim: need >= 2 instances per id");
  const Index max_kh = cfg.instances * (cfg.instances - 1);
  for (Index id = 0; id < cfg.num_ids; ++id)
    if (cfg.harmful_for(id) < 0 || cfg.harmful_for(id) > max_kh)
      throw ShapeMismatchError("run_harmful_sim: K_h out of [0, M(M-1)]");

  HarmfulSimResult result;
  result.trials.resize(static_cast<std::size_t>(cfg.trials));

  // per-trial seeds make the outcome independent of the worker count
  const auto run_range = [&](Index lo, Index hi) {
    for (Index t = lo; t < hi; ++t) {
      const std::uint64_t trial_seed =
          derive_seed(cfg.rng_seed, "minesim.trial." + std::to_string(t));
      result.trials[static_cast<std::size_t>(t)] = run_one_trial(cfg, trial_seed);
    }
  };

  const int workers = std::max(1, cfg.workers);
  if (workers == 1) {
    run_range(0, cfg.trials);
  } else {
    std::vector<std::thread> pool;
    const Index chunk = (cfg.trials + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const Index lo = std::min<Index>(cfg.trials, w * chunk);
      const Index hi = std::min<Index>(cfg.trials, lo + chunk);
      if (lo < hi) pool.emplace_back(run_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }

  long long sp_hits = 0;
  long long dense_hits = 0;
  for (const auto& rec : result.trials) {
    sp_hits += rec.sp_hits;
    dense_hits += rec.dense_hits;
    result.situation1_sp_hits += rec.situation1_sp_hits;
  }
  const double id_slots =
      static_cast<double>(cfg.trials) * static_cast<double>(cfg.num_ids);
  result.p_sp = static_cast<double>(sp_hits) / id_slots;
  result.p_dense = static_cast<double>(dense_hits) /
                   (id_slots * static_cast<double>(cfg.instances));
  return result;
}

}  // namespace sparsepair
