#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "sparsepair/trainer.hpp"

using namespace sparsepair;

namespace {

LabeledDataset clean_dataset(std::uint64_t seed = 1) {
  SyntheticSpec spec;
  spec.num_classes = 10;
  spec.per_class = 20;
  spec.dim = 8;
  spec.concentration = 100.0;
  spec.outlier_fraction = 0.0;
  spec.rng_seed = seed;
  return generate(spec);
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_k = 4;
  cfg.batch_n = 4;
  cfg.embed_dim = 8;
  cfg.lr_base = 1e-3;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("adam: zero gradient and zero decay leave params unchanged") {
  RealMatrix p(2, 2);
  p << 1.0, -2.0, 3.0, 0.5;
  const RealMatrix grad = RealMatrix::Zero(2, 2);
  auto state = make_adam_state({p.size()});
  const RealMatrix before = p;
  for (int i = 0; i < 5; ++i)
    adam_step({&p}, {&grad}, state, 0.01, 0.0);
  CHECK((p - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam: constant gradient steps stay near lr in magnitude") {
  RealMatrix p = RealMatrix::Zero(1, 1);
  RealMatrix grad(1, 1);
  grad << 0.37;
  auto state = make_adam_state({Index{1}});
  const double lr = 0.01;
  double prev = p(0, 0);
  for (int i = 0; i < 200; ++i) {
    adam_step({&p}, {&grad}, state, lr, 0.0);
    const double step = std::abs(p(0, 0) - prev);
    CHECK(step <= lr * 1.6);  // bias-corrected first steps stay bounded
    prev = p(0, 0);
  }
  // for a constant gradient the update converges to -lr * sign(g)
  CHECK(std::abs(p(0, 0) - prev) == doctest::Approx(0.0).epsilon(1.0));
  CHECK(p(0, 0) < 0.0);
}

TEST_CASE("adam: three hand-tracked steps on one scalar") {
  // beta1 = 0.9, beta2 = 0.999, eps = 1e-8, lr = 0.1, grads 1.0, 0.5, -0.25
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double grads[3] = {1.0, 0.5, -0.25};
  double theta = 0.2, m = 0.0, v = 0.0;
  for (int t = 1; t <= 3; ++t) {
    const double g = grads[t - 1];
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double m_hat = m / (1.0 - std::pow(b1, t));
    const double v_hat = v / (1.0 - std::pow(b2, t));
    theta -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }

  RealMatrix p(1, 1);
  p << 0.2;
  auto state = make_adam_state({Index{1}});
  for (int t = 0; t < 3; ++t) {
    RealMatrix g(1, 1);
    g << grads[t];
    adam_step({&p}, {&g}, state, lr, 0.0);
  }
  CHECK(p(0, 0) == doctest::Approx(theta).epsilon(1e-14));
}

TEST_CASE("adam: weight decay acts as an L2 gradient term") {
  RealMatrix p(1, 1);
  p << 2.0;
  const RealMatrix zero_grad = RealMatrix::Zero(1, 1);
  auto state = make_adam_state({Index{1}});
  adam_step({&p}, {&zero_grad}, state, 0.01, 0.1);
  CHECK(p(0, 0) < 2.0);  // decay pulls toward zero even with zero loss grad
}

TEST_CASE("adam: shape mismatch is rejected") {
  RealMatrix p(2, 2);
  p.setZero();
  RealMatrix g(1, 2);
  g.setZero();
  auto state = make_adam_state({p.size()});
  CHECK_THROWS_AS(adam_step({&p}, {&g}, state, 0.1, 0.0), ShapeMismatchError);
}

TEST_CASE("lr schedule") {
  TrainConfig cfg;
  cfg.lr_base = 3.5e-4;
  cfg.warmup_fraction = 0.1;
  const long long total = 1000;
  CHECK(lr_schedule(0, total, cfg) ==
        doctest::Approx(cfg.lr_base / 100.0).epsilon(1e-12));
  CHECK(lr_schedule(100, total, cfg) == doctest::Approx(cfg.lr_base));
  CHECK(lr_schedule(999, total, cfg) == doctest::Approx(cfg.lr_base));
  for (long long s = 1; s < 100; ++s)
    CHECK(lr_schedule(s, total, cfg) > lr_schedule(s - 1, total, cfg));

  cfg.warmup_fraction = 0.0;
  CHECK(lr_schedule(0, total, cfg) == doctest::Approx(cfg.lr_base));
}

TEST_CASE("zero learning rate leaves the model at its initialization") {
  const auto ds = clean_dataset();
  TrainConfig cfg = small_config();
  cfg.lr_base = 0.0;
  cfg.weight_decay = 0.0;
  const auto result = train(ds, cfg);
  const EmbedModel init = init_model(cfg.model, ds.dim(), cfg.embed_dim,
                                     cfg.hidden_dim,
                                     derive_seed(cfg.seed, "train.model"));
  CHECK((result.checkpoint.model.w1 - init.w1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto ds = clean_dataset();
  const TrainConfig cfg = small_config();
  const auto a = train(ds, cfg);
  const auto b = train(ds, cfg);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t e = 0; e < a.log.size(); ++e) {
    CHECK(a.log[e].loss_total == b.log[e].loss_total);
    CHECK(a.log[e].map == b.log[e].map);
    CHECK(a.log[e].cmc1 == b.log[e].cmc1);
  }
  CHECK((a.checkpoint.model.w1 - b.checkpoint.model.w1).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("gradient chaining matches full-model finite differences") {
  // tiny model: d = 3 features, 2 classes, linear embedder + identity head
  SyntheticSpec spec;
  spec.num_classes = 2;
  spec.per_class = 3;
  spec.dim = 3;
  spec.concentration = 20.0;
  spec.rng_seed = 5;
  const auto ds = generate(spec);

  TrainConfig cfg;
  cfg.loss_kind = MetricKind::SPHard;
  cfg.tau = 0.1;
  cfg.lambda = 0.3;
  cfg.embed_dim = 3;

  EmbedModel model = init_model(ModelKind::Linear, 3, 3, 0, 77);
  ClassifierHead head;
  head.weights = 0.5 * RealMatrix::Identity(2, 3);
  head.bias = RealVector::Zero(2);

  const auto analytic =
      batch_gradients(model, &head, ds.points, ds.labels, cfg);

  const RealMatrix fd_w1 = oracles::fd_gradient(
      [&](const RealMatrix& w) {
        EmbedModel probe = model;
        probe.w1 = w;
        return batch_gradients(probe, &head, ds.points, ds.labels, cfg).value;
      },
      model.w1, 1e-6);
  CHECK(oracles::max_rel_error(analytic.w1, fd_w1) < 1e-4);

  const RealMatrix fd_hw = oracles::fd_gradient(
      [&](const RealMatrix& w) {
        ClassifierHead probe = head;
        probe.weights = w;
        return batch_gradients(model, &probe, ds.points, ds.labels, cfg).value;
      },
      head.weights, 1e-6);
  CHECK(oracles::max_rel_error(analytic.head_weights, fd_hw) < 1e-4);
}

TEST_CASE("gradient chaining holds for the one-hidden-layer model") {
  SyntheticSpec spec;
  spec.num_classes = 2;
  spec.per_class = 3;
  spec.dim = 3;
  spec.concentration = 20.0;
  spec.rng_seed = 6;
  const auto ds = generate(spec);

  TrainConfig cfg;
  cfg.loss_kind = MetricKind::SPHard;
  cfg.tau = 0.1;

  EmbedModel model = init_model(ModelKind::OneHidden, 3, 3, 5, 78);
  const auto analytic =
      batch_gradients(model, nullptr, ds.points, ds.labels, cfg);
  const RealMatrix fd_w2 = oracles::fd_gradient(
      [&](const RealMatrix& w) {
        EmbedModel probe = model;
        probe.w2 = w;
        return batch_gradients(probe, nullptr, ds.points, ds.labels, cfg).value;
      },
      model.w2, 1e-6);
  CHECK(oracles::max_rel_error(analytic.w2, fd_w2) < 1e-4);
}

TEST_CASE("epoch-mean loss is non-increasing early for every loss kind") {
  const auto ds = clean_dataset(9);
  for (const MetricKind kind :
       {MetricKind::SPHard, MetricKind::SPLeastHard, MetricKind::AdaSP,
        MetricKind::TripletBH, MetricKind::EPTriplet}) {
    TrainConfig cfg = small_config();
    cfg.loss_kind = kind;
    cfg.epochs = 10;
    cfg.batch_k = 10;  // full-batch epochs: descent without sampling noise
    cfg.batch_n = 20;
    cfg.lr_base = 5e-4;
    cfg.seed = 17;
    const auto result = train(ds, cfg);
    for (std::size_t e = 1; e < result.log.size(); ++e)
      CHECK(result.log[e].loss_total <=
            result.log[e - 1].loss_total + 1e-9);
  }
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  const auto ds = clean_dataset();
  TrainConfig cfg = small_config();
  cfg.epochs = 2;
  const auto result = train(ds, cfg);

  const auto path =
      std::filesystem::temp_directory_path() / "trainer_roundtrip.spck";
  save_checkpoint(result.checkpoint, path.string());
  const auto back = load_checkpoint(path.string());
  CHECK((back.model.w1 - result.checkpoint.model.w1).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((back.head.weights - result.checkpoint.head.weights)
            .cwiseAbs()
            .maxCoeff() == 0.0);
  CHECK(back.epoch == result.checkpoint.epoch);
  CHECK(back.config_hash == result.checkpoint.config_hash);
  CHECK(back.opt.step == result.checkpoint.opt.step);
  REQUIRE(back.opt.m.size() == result.checkpoint.opt.m.size());
  for (std::size_t i = 0; i < back.opt.m.size(); ++i)
    CHECK((back.opt.m[i] - result.checkpoint.opt.m[i]).cwiseAbs().maxCoeff() ==
          0.0);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ck.spck"), IoError);
}

TEST_CASE("well-separated data trains to high CMC@1") {
  const auto ds = clean_dataset(4);
  TrainConfig cfg = small_config();
  cfg.epochs = 30;
  const auto result = train(ds, cfg);
  CHECK(result.final_metrics().cmc1 >= 0.95);
}

TEST_CASE("robustness report: single cell and zero-lr control") {
  const auto ds = clean_dataset(8);
  TrainConfig base = small_config();
  base.epochs = 2;
  base.use_identity = false;

  const auto single = robustness_sweep(ds, {MetricKind::SPHard}, {4}, {1}, base);
  CHECK(single.cells.size() == 1);
  CHECK(single.cells[0].rel_drop == 0.0);

  // zero lr: every loss sees the same initial embedding, so metrics agree
  TrainConfig frozen = base;
  frozen.lr_base = 0.0;
  const auto control = robustness_sweep(
      ds, {MetricKind::SPHard, MetricKind::SPLeastHard, MetricKind::TripletBH},
      {4}, {1}, frozen);
  REQUIRE(control.cells.size() == 3);
  CHECK(control.cells[0].metrics.map == control.cells[1].metrics.map);
  CHECK(control.cells[1].metrics.map == control.cells[2].metrics.map);
}

TEST_CASE("median drop aggregates stored cells") {
  RobustnessReport report;
  for (const double drop : {0.3, 0.1, 0.2}) {
    RobustnessCell cell;
    cell.loss = MetricKind::SPHard;
    cell.n_per_class = 32;
    cell.rel_drop = drop;
    report.cells.push_back(cell);
  }
  CHECK(report.median_drop(MetricKind::SPHard, 32) == doctest::Approx(0.2));
  CHECK_THROWS_AS(report.median_drop(MetricKind::AdaSP, 32), EmptyInputError);
}

TEST_CASE("metric kind names round-trip") {
  for (const MetricKind kind :
       {MetricKind::SPHard, MetricKind::SPLeastHard, MetricKind::AdaSP,
        MetricKind::TripletBH, MetricKind::EPTriplet})
    CHECK(metric_kind_from_name(metric_kind_name(kind)) == kind);
  CHECK_THROWS_AS(metric_kind_from_name("bogus"), Error);
}
