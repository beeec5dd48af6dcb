#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sparsepair/sp_loss.hpp"

using namespace sparsepair;

namespace {

ClassView view_of(std::initializer_list<Index> rows, ClassId id = 0) {
  ClassView v;
  v.class_id = id;
  v.rows = rows;
  return v;
}

// symmetric similarity matrix from the upper-triangle entries, diag 1
RealMatrix sim_matrix(Index n, std::initializer_list<double> upper) {
  RealMatrix s = RealMatrix::Identity(n, n);
  auto it = upper.begin();
  for (Index a = 0; a < n; ++a)
    for (Index b = a + 1; b < n; ++b) {
      s(a, b) = *it;
      s(b, a) = *it;
      ++it;
    }
  return s;
}

// independent reference for the whole batch loss, built on the long-double
// direct sums; alpha recomputed from the direct soft values
double oracle_sp_value(const EmbeddingBatch& batch, double tau,
                       SPVariant variant) {
  const RealMatrix s = batch.embeddings * batch.embeddings.transpose();
  const auto views = class_views(batch.labels);
  std::vector<ClassView> usable;
  for (const auto& v : views)
    if (v.rows.size() >= 2) usable.push_back(v);

  long double total = 0.0L;
  for (const auto& v : usable) {
    std::vector<Index> others;
    for (const auto& o : usable)
      if (o.class_id != v.class_id)
        others.insert(others.end(), o.rows.begin(), o.rows.end());
    const double s_neg = oracles::direct_soft_negative(s, v.rows, others, tau);
    const double s_h = oracles::direct_soft_hard(s, v.rows, tau);
    const double s_lh = oracles::direct_soft_leasthard(s, v.rows, tau);
    double a = 0.0;
    switch (variant) {
      case SPVariant::Hard: a = 1.0; break;
      case SPVariant::LeastHard: a = 0.0; break;
      case SPVariant::Adaptive: a = adaptive_weight(s_h, s_lh); break;
    }
    const long double u =
        (static_cast<long double>(s_neg) - (a * s_h + (1.0 - a) * s_lh)) / tau;
    total += log1pl(expl(u));
  }
  return static_cast<double>(total / static_cast<long double>(usable.size()));
}

EmbeddingBatch two_class_axis_batch() {
  EmbeddingBatch batch;
  batch.embeddings.resize(4, 2);
  batch.embeddings << 1, 0, 1, 0, 0, 1, 0, 1;
  batch.labels = {0, 0, 1, 1};
  batch.num_classes = 2;
  batch.instances_per_class = 2;
  return batch;
}

}  // namespace

// ---------------------------------------------------------------------------
// soft similarities against the spec's closed forms and the direct-sum oracle
// ---------------------------------------------------------------------------

TEST_CASE("soft_negative") {
  SUBCASE("single cross pair is returned exactly") {
    RealMatrix s = sim_matrix(2, {0.3});
    const auto views = std::vector<ClassView>{view_of({0}, 0), view_of({1}, 1)};
    CHECK(soft_negative(s, views[0], views, 0.04) ==
          doctest::Approx(0.3).epsilon(1e-14));
  }
  SUBCASE("equal cross sims: c + tau*ln(P)") {
    const double c = 0.4, tau = 0.05;
    RealMatrix s = RealMatrix::Constant(4, 4, c);
    s.diagonal().setOnes();
    s(0, 1) = s(1, 0) = 0.9;  // intra entries must not matter
    s(2, 3) = s(3, 2) = 0.8;
    const auto views =
        std::vector<ClassView>{view_of({0, 1}, 0), view_of({2, 3}, 1)};
    CHECK(soft_negative(s, views[0], views, tau) ==
          doctest::Approx(c + tau * std::log(4.0)).epsilon(1e-13));
  }
  SUBCASE("sharp-scale value matches the direct sum") {
    RealMatrix s = RealMatrix::Identity(4, 4);
    s(0, 1) = s(1, 0) = 0.9;
    s(0, 2) = s(2, 0) = 0.1;
    s(0, 3) = s(3, 0) = -0.4;
    const auto views =
        std::vector<ClassView>{view_of({0}, 0), view_of({1, 2, 3}, 1)};
    const double expected =
        oracles::direct_logsumexp({0.9, 0.1, -0.4}, 0.001);
    const double got = soft_negative(s, views[0], views, 0.001);
    CHECK(std::abs(got - expected) < 1e-12);
    CHECK(std::abs(got - 0.9) < 0.0015);
  }
  SUBCASE("single class has no negatives") {
    RealMatrix s = sim_matrix(2, {0.3});
    const auto views = std::vector<ClassView>{view_of({0, 1}, 0)};
    CHECK_THROWS_AS(soft_negative(s, views[0], views, 0.04), NoNegativesError);
  }
}

TEST_CASE("soft_positive_hard") {
  SUBCASE("N=2: s - tau*ln 2") {
    RealMatrix s = sim_matrix(2, {0.7});
    const double tau = 0.05;
    CHECK(soft_positive_hard(s, view_of({0, 1}), tau) ==
          doctest::Approx(0.7 - tau * std::log(2.0)).epsilon(1e-13));
  }
  SUBCASE("equal sims: c - tau*ln(N^2-N)") {
    const double c = 0.6, tau = 0.03;
    for (const Index n : {2, 3, 5}) {
      const RealMatrix z = oracles::equicorrelated_rows(n, n + 1, c);
      const RealMatrix s = z * z.transpose();
      ClassView v;
      v.rows.resize(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) v.rows[static_cast<std::size_t>(i)] = i;
      const double expected =
          c - tau * std::log(static_cast<double>(n * n - n));
      CHECK(std::abs(soft_positive_hard(s, v, tau) - expected) < 1e-10);
    }
  }
  SUBCASE("sharp-scale value matches the 6-ordered-pair direct sum") {
    const RealMatrix s = sim_matrix(3, {0.9, 0.2, 0.5});
    const ClassView v = view_of({0, 1, 2});
    const double expected = oracles::direct_soft_hard(s, v.rows, 0.001);
    const double got = soft_positive_hard(s, v, 0.001);
    CHECK(std::abs(got - expected) < 1e-12);
    CHECK(std::abs(got - 0.2) < 0.002);
  }
  SUBCASE("singleton class") {
    RealMatrix s = RealMatrix::Identity(1, 1);
    CHECK_THROWS_AS(soft_positive_hard(s, view_of({0}), 0.1),
                    SingletonClassError);
  }
}

TEST_CASE("soft_positive_per_instance") {
  SUBCASE("N=2 returns the single pair similarity") {
    RealMatrix s = sim_matrix(2, {0.35});
    CHECK(soft_positive_per_instance(s, view_of({0, 1}), 0, 0.04) ==
          doctest::Approx(0.35).epsilon(1e-14));
  }
  SUBCASE("two-term sharp-scale") {
    const RealMatrix s = sim_matrix(3, {0.9, 0.2, 0.5});
    const double got = soft_positive_per_instance(s, view_of({0, 1, 2}), 0, 0.001);
    CHECK(std::abs(got - oracles::direct_softmin({0.9, 0.2}, 0.001)) < 1e-12);
    CHECK(std::abs(got - 0.2) < 0.001);
  }
  SUBCASE("equal sims: c - tau*ln(N-1)") {
    const double c = 0.5, tau = 0.02;
    const Index n = 4;
    const RealMatrix z = oracles::equicorrelated_rows(n, n + 1, c);
    const RealMatrix s = z * z.transpose();
    const ClassView v = view_of({0, 1, 2, 3});
    CHECK(std::abs(soft_positive_per_instance(s, v, 2, tau) -
                   (c - tau * std::log(3.0))) < 1e-10);
  }
  SUBCASE("singleton class") {
    RealMatrix s = RealMatrix::Identity(1, 1);
    CHECK_THROWS_AS(soft_positive_per_instance(s, view_of({0}), 0, 0.1),
                    SingletonClassError);
  }
}

TEST_CASE("soft_positive_leasthard") {
  SUBCASE("equal sims: c - tau*ln(N-1) + tau*ln N") {
    const double c = 0.45, tau = 0.04;
    const Index n = 4;
    const RealMatrix z = oracles::equicorrelated_rows(n, n + 1, c);
    const RealMatrix s = z * z.transpose();
    const ClassView v = view_of({0, 1, 2, 3});
    const double expected = c - tau * std::log(3.0) + tau * std::log(4.0);
    CHECK(std::abs(soft_positive_leasthard(s, v, tau) - expected) < 1e-10);
  }
  SUBCASE("N=3 hand enumeration: per-instance mins 0.2/0.5/0.2, max 0.5") {
    const RealMatrix s = sim_matrix(3, {0.9, 0.2, 0.5});
    const ClassView v = view_of({0, 1, 2});
    const double got = soft_positive_leasthard(s, v, 0.001);
    CHECK(std::abs(got - oracles::direct_soft_leasthard(s, v.rows, 0.001)) <
          1e-12);
    CHECK(std::abs(got - 0.5) < 0.003);
  }
  SUBCASE("always >= soft_positive_hard, strictly for N > 1") {
    sparsepair::Rng rng(31);
    for (int trial = 0; trial < 300; ++trial) {
      const Index n = 2 + static_cast<Index>(rng.below(5));
      const RealMatrix z = oracles::random_unit_rows(n, 4, 1000 + trial);
      const RealMatrix s = z * z.transpose();
      ClassView v;
      for (Index i = 0; i < n; ++i) v.rows.push_back(i);
      const double tau = rng.uniform(0.005, 0.2);
      CHECK(soft_positive_leasthard(s, v, tau) > soft_positive_hard(s, v, tau));
    }
  }
}

TEST_CASE("nesting identity: hard equals soft-min of per-instance values") {
  sparsepair::Rng rng(67);
  for (int trial = 0; trial < 200; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.below(6));
    const RealMatrix z = oracles::random_unit_rows(n, 5, 2000 + trial);
    const RealMatrix s = z * z.transpose();
    ClassView v;
    for (Index i = 0; i < n; ++i) v.rows.push_back(i);
    const double tau = rng.uniform(0.01, 0.15);

    RealVector per_instance(n);
    for (Index i = 0; i < n; ++i)
      per_instance[i] = soft_positive_per_instance(s, v, i, tau);
    const double nested = softmin(per_instance, tau);
    CHECK(std::abs(soft_positive_hard(s, v, tau) - nested) < 1e-10);
  }
}

TEST_CASE("adaptive_weight") {
  CHECK(adaptive_weight(-0.3, 0.8) == 0.0);  // gate below zero
  CHECK(adaptive_weight(0.37, 0.37) == doctest::Approx(0.37).epsilon(1e-15));
  CHECK(adaptive_weight(0.2, 0.5) == doctest::Approx(2.0 / 7.0).epsilon(1e-14));
  CHECK(adaptive_weight(0.0, 0.0) == 0.0);  // vanishing denominator
  CHECK(adaptive_weight(5e-13, 5e-13) == 0.0);

  sparsepair::Rng rng(91);
  for (int trial = 0; trial < 1000; ++trial) {
    const double h = rng.uniform(0.0, 1.0);
    const double lh = rng.uniform(h, 1.0);
    const double a = adaptive_weight(h, lh);
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
    CHECK(a >= h - 1e-15);  // harmonic mean within [min, max]
    CHECK(a <= lh + 1e-15);
  }
}

// ---------------------------------------------------------------------------
// whole-batch loss
// ---------------------------------------------------------------------------

TEST_CASE("sp_loss K=2 N=2 axis batch matches the direct oracle") {
  const auto batch = two_class_axis_batch();
  const double tau = 0.1;

  // closed forms: s_h = 1 - tau*ln2 per class, s_neg = tau*ln4,
  // so u = ln8 - 1/tau and value = softplus(u)
  const double expected_closed =
      std::log1p(std::exp(std::log(8.0) - 1.0 / tau));
  const double expected_oracle = oracle_sp_value(batch, tau, SPVariant::Hard);
  CHECK(std::abs(expected_closed - expected_oracle) < 1e-15);

  const auto result = sp_loss(batch, SPConfig{tau, SPVariant::Hard});
  CHECK(std::abs(result.value - expected_oracle) < 1e-12);

  REQUIRE(result.diagnostics.size() == 2);
  for (const auto& d : result.diagnostics) {
    CHECK(d.s_pos_hard ==
          doctest::Approx(1.0 - tau * std::log(2.0)).epsilon(1e-12));
    CHECK(d.s_neg == doctest::Approx(tau * std::log(4.0)).epsilon(1e-12));
  }
}

TEST_CASE("sp_loss equals the oracle on random batches, all variants") {
  for (const auto variant :
       {SPVariant::Hard, SPVariant::LeastHard, SPVariant::Adaptive}) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto batch = oracles::random_batch(3, 4, 6, 500 + trial);
      for (const double tau : {0.1, 0.04}) {
        const auto result = sp_loss(batch, SPConfig{tau, variant});
        CHECK(std::abs(result.value - oracle_sp_value(batch, tau, variant)) <
              1e-11);
      }
    }
  }
}

TEST_CASE("per-class loss term at equal similarities is ln 2") {
  CHECK(std::abs(class_loss_term(0.42, 0.42, 0.04) - std::log(2.0)) < 1e-12);

  // engineered batch: intra sims 1, cross sims 1 - tau*ln8 make the soft
  // negative equal the soft hard positive for both classes
  const double tau = 0.1;
  const double c = 1.0 - tau * std::log(8.0);
  EmbeddingBatch batch;
  batch.embeddings.resize(4, 2);
  const double y = std::sqrt(1.0 - c * c);
  batch.embeddings << 1, 0, 1, 0, c, y, c, y;
  batch.labels = {0, 0, 1, 1};
  batch.num_classes = 2;
  batch.instances_per_class = 2;
  const auto result = sp_loss(batch, SPConfig{tau, SPVariant::Hard});
  CHECK(std::abs(result.value - std::log(2.0)) < 1e-12);
  for (const auto& d : result.diagnostics)
    CHECK(std::abs(d.s_neg - d.s_pos_used) < 1e-12);
}

TEST_CASE("sp_loss error cases") {
  EmbeddingBatch singletons;
  singletons.embeddings = oracles::random_unit_rows(3, 4, 77);
  singletons.labels = {0, 1, 2};
  CHECK_THROWS_AS(sp_loss(singletons, SPConfig{}), NoUsableClassesError);

  EmbeddingBatch lone;
  lone.embeddings = oracles::random_unit_rows(3, 4, 78);
  lone.labels = {0, 0, 1};  // one usable class plus a singleton
  CHECK_THROWS_AS(sp_loss(lone, SPConfig{}), NoNegativesError);
}

TEST_CASE("sp_loss skips singleton classes with zero gradient rows") {
  EmbeddingBatch batch;
  batch.embeddings = oracles::random_unit_rows(5, 4, 79);
  batch.labels = {0, 0, 1, 1, 2};  // row 4 is a singleton class
  const auto result = sp_loss(batch, SPConfig{0.05, SPVariant::Adaptive});
  CHECK(result.diagnostics.size() == 2);
  CHECK(result.grad.row(4).cwiseAbs().maxCoeff() == 0.0);

  // value must match the same batch without the singleton row
  EmbeddingBatch trimmed;
  trimmed.embeddings = batch.embeddings.topRows(4);
  trimmed.labels = {0, 0, 1, 1};
  const auto ref = sp_loss(trimmed, SPConfig{0.05, SPVariant::Adaptive});
  CHECK(std::abs(result.value - ref.value) < 1e-14);
}

TEST_CASE("analytic gradient matches central finite differences") {
  for (const auto variant :
       {SPVariant::Hard, SPVariant::LeastHard, SPVariant::Adaptive}) {
    for (int trial = 0; trial < 4; ++trial) {
      const auto batch = oracles::random_batch(3, 3, 5, 900 + trial);
      const SPConfig cfg{trial % 2 == 0 ? 0.1 : 0.04, variant};
      const auto result = sp_loss(batch, cfg);

      // adaptive runs differentiate with alpha held constant, so the probe
      // evaluates the alpha-pinned function
      std::vector<double> alphas;
      for (const auto& d : result.diagnostics) alphas.push_back(d.alpha);
      const auto f = [&](const RealMatrix& z) {
        EmbeddingBatch probe = batch;
        probe.embeddings = z;
        return sp_loss(probe, cfg,
                       variant == SPVariant::Adaptive ? &alphas : nullptr)
            .value;
      };
      const RealMatrix fd = oracles::fd_gradient(f, batch.embeddings, 1e-6);
      CHECK(oracles::max_rel_error(result.grad, fd) < 1e-5);
    }
  }
}

TEST_CASE("soft values converge to the exact selectors as tau shrinks") {
  sparsepair::Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.below(5));
    const Index k = 2;
    const auto batch = oracles::random_batch(k, n, 6, 3000 + trial);
    const RealMatrix s = batch.embeddings * batch.embeddings.transpose();
    const auto views = class_views(batch.labels);
    const ClassView& v = views[0];
    std::vector<Index> others = views[1].rows;

    // exact references by enumeration
    double exact_neg = -2.0;
    for (const Index a : v.rows)
      for (const Index b : others) exact_neg = std::max(exact_neg, s(a, b));
    const double exact_hard =
        oracles::enum_min_pair(oracles::all_unordered_pairs(s, v.rows)).sim;
    const double exact_lh = oracles::enum_maxmin_pair(s, v.rows).sim;
    double exact_pi = 2.0;  // instance 0's exact min
    for (std::size_t m = 1; m < v.rows.size(); ++m)
      exact_pi = std::min(exact_pi, s(v.rows[0], v.rows[m]));

    double prev_gap[4] = {1e9, 1e9, 1e9, 1e9};
    for (const double tau : {0.1, 0.01, 0.001}) {
      const double nd = static_cast<double>(n);
      const double gaps[4] = {
          std::abs(soft_negative(s, v, views, tau) - exact_neg),
          std::abs(soft_positive_hard(s, v, tau) - exact_hard),
          std::abs(soft_positive_per_instance(s, v, 0, tau) - exact_pi),
          std::abs(soft_positive_leasthard(s, v, tau) - exact_lh)};
      const double bounds[4] = {
          tau * std::log(static_cast<double>((k - 1) * n * n)),
          tau * std::log(nd * nd - nd), tau * std::log(nd - 1.0),
          tau * std::log(nd * (nd - 1.0))};
      for (int i = 0; i < 4; ++i) {
        CHECK(gaps[i] <= bounds[i] + 1e-12);
        CHECK(gaps[i] <= prev_gap[i] + 1e-15);
        prev_gap[i] = gaps[i];
      }
    }
  }
}

TEST_CASE("adaptive value sits between the hard and least-hard values") {
  for (int trial = 0; trial < 30; ++trial) {
    const auto batch = oracles::random_batch(3, 4, 5, 4000 + trial);
    const double tau = 0.05;
    const double hard = sp_loss(batch, SPConfig{tau, SPVariant::Hard}).value;
    const double lh = sp_loss(batch, SPConfig{tau, SPVariant::LeastHard}).value;
    const auto ada = sp_loss(batch, SPConfig{tau, SPVariant::Adaptive});
    bool alphas_in_range = true;
    for (const auto& d : ada.diagnostics)
      alphas_in_range &= d.alpha >= 0.0 && d.alpha <= 1.0;
    if (alphas_in_range) {
      CHECK(ada.value <= hard + 1e-12);
      CHECK(ada.value >= lh - 1e-12);
    }
  }
}

TEST_CASE("value is invariant under instance and class permutation") {
  sparsepair::Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    const auto batch = oracles::random_batch(3, 4, 6, 5000 + trial);
    const double base =
        sp_loss(batch, SPConfig{0.04, SPVariant::Adaptive}).value;

    std::vector<Index> perm(static_cast<std::size_t>(batch.size()));
    for (std::size_t i = 0; i < perm.size(); ++i)
      perm[i] = static_cast<Index>(i);
    rng.shuffle(perm.begin(), perm.end());

    EmbeddingBatch shuffled = batch;
    for (std::size_t i = 0; i < perm.size(); ++i) {
      shuffled.embeddings.row(static_cast<Index>(i)) =
          batch.embeddings.row(perm[i]);
      shuffled.labels[i] = batch.labels[static_cast<std::size_t>(perm[i])];
    }
    const double permuted =
        sp_loss(shuffled, SPConfig{0.04, SPVariant::Adaptive}).value;
    CHECK(std::abs(base - permuted) < 1e-12);
  }
}

TEST_CASE("diagnostics invariants on random batches") {
  for (int trial = 0; trial < 100; ++trial) {
    const auto batch = oracles::random_batch(3, 4, 4, 6000 + trial);
    const auto result = sp_loss(batch, SPConfig{0.04, SPVariant::Adaptive});
    for (const auto& d : result.diagnostics) {
      CHECK(d.s_pos_leasthard >= d.s_pos_hard);
      if (d.s_pos_hard < 0.0) {
        CHECK(d.alpha == 0.0);
      } else {
        CHECK(d.alpha >= 0.0);
        CHECK(d.alpha <= 1.0);
      }
      CHECK(d.per_instance_softmin.size() == 4);
    }
    CHECK(result.value >= 0.0);
    CHECK(result.grad.allFinite());
  }
}
