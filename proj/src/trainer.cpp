#include "sparsepair/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sparsepair/batch.hpp"
#include "sparsepair/detail/binio.hpp"
#include "sparsepair/numerics.hpp"
#include "sparsepair/rng.hpp"

namespace sparsepair {

void TrainConfig::validate() const {
  if (epochs < 1 || batch_k < 2 || batch_n < 1 || embed_dim < 1)
    throw ShapeMismatchError("TrainConfig: counts out of range");
  // lr_base 0 is allowed as a no-training control
  if (lr_base < 0.0 || tau <= 0.0)
    throw ShapeMismatchError("TrainConfig: lr_base/tau out of range");
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0)
    throw ShapeMismatchError("TrainConfig: warmup_fraction must be in [0,1]");
  if (weight_decay < 0.0 || lambda < 0.0 || margin < 0.0)
    throw ShapeMismatchError("TrainConfig: negative decay/lambda/margin");
}

RealMatrix EmbedModel::forward(const RealMatrix& x) const {
  RealMatrix y = x * w1.transpose();
  y.rowwise() += b1.transpose();
  if (kind == ModelKind::OneHidden) {
    y = y.array().tanh().matrix().eval();
    y = (y * w2.transpose()).eval();
    y.rowwise() += b2.transpose();
  }
  return y;
}

namespace {

// orthonormal rows (rows <= cols) or columns (rows > cols) of a seeded
// Gaussian matrix; a random rotation when square
RealMatrix semi_orthogonal(Index rows, Index cols, Rng& rng) {
  Eigen::MatrixXd g(std::max(rows, cols), std::min(rows, cols));
  for (Index r = 0; r < g.rows(); ++r)
    for (Index c = 0; c < g.cols(); ++c) g(r, c) = rng.gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() *
                      Eigen::MatrixXd::Identity(g.rows(), g.cols());
  return rows <= cols ? RealMatrix(q.transpose()) : RealMatrix(q);
}

}  // namespace

EmbedModel init_model(ModelKind kind, Index input_dim, Index embed_dim,
                      Index hidden_dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "model_init"));
  EmbedModel model;
  model.kind = kind;
  if (kind == ModelKind::Linear) {
    model.w1 = semi_orthogonal(embed_dim, input_dim, rng);
    model.b1 = RealVector::Zero(embed_dim);
  } else {
    model.w1 = semi_orthogonal(hidden_dim, input_dim, rng);
    model.b1 = RealVector::Zero(hidden_dim);
    model.w2 = semi_orthogonal(embed_dim, hidden_dim, rng);
    model.b2 = RealVector::Zero(embed_dim);
  }
  return model;
}

// --- Adam --------------------------------------------------------------------

AdamState make_adam_state(const std::vector<Index>& sizes) {
  AdamState state;
  for (const Index n : sizes) {
    state.m.emplace_back(RealVector::Zero(n));
    state.v.emplace_back(RealVector::Zero(n));
  }
  return state;
}

void adam_step(const std::vector<TensorRef>& tensors, AdamState& state,
               double lr, double weight_decay, const AdamParams& hp) {
  if (tensors.size() != state.m.size())
    throw ShapeMismatchError("adam_step: tensor/state count mismatch");
  ++state.step;
  const double bc1 =
      1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
  const double bc2 =
      1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    const TensorRef& ref = tensors[t];
    if (ref.size != state.m[t].size())
      throw ShapeMismatchError("adam_step: tensor size mismatch");
    double* m = state.m[t].data();
    double* v = state.v[t].data();
    for (Index i = 0; i < ref.size; ++i) {
      const double g = ref.grad[i] + weight_decay * ref.param[i];
      m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g;
      v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      ref.param[i] -= lr * m_hat / (std::sqrt(v_hat) + hp.eps);
    }
  }
}

void adam_step(const std::vector<RealMatrix*>& params,
               const std::vector<const RealMatrix*>& grads, AdamState& state,
               double lr, double weight_decay, const AdamParams& hp) {
  if (params.size() != grads.size())
    throw ShapeMismatchError("adam_step: params/grads count mismatch");
  std::vector<TensorRef> tensors;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i]->rows() ||
        params[i]->cols() != grads[i]->cols())
      throw ShapeMismatchError("adam_step: params/grads shape mismatch");
    tensors.push_back(
        TensorRef{params[i]->data(), grads[i]->data(), params[i]->size()});
  }
  adam_step(tensors, state, lr, weight_decay, hp);
}

double lr_schedule(long long step, long long total_steps,
                   const TrainConfig& cfg) {
  const long long warmup = static_cast<long long>(
      cfg.warmup_fraction * static_cast<double>(total_steps));
  if (warmup <= 0 || step >= warmup) return cfg.lr_base;
  const double frac = static_cast<double>(step) / static_cast<double>(warmup);
  return cfg.lr_base * (0.01 + 0.99 * frac);
}

// --- Training ----------------------------------------------------------------

namespace {

struct ModelGrads {
  RealMatrix w1, w2;
  RealVector b1, b2;
};

// back-propagates dL/dZ (w.r.t. unit embeddings) through the row
// normalization and the model layers
ModelGrads backward(const EmbedModel& model, const RealMatrix& x,
                    const RealMatrix& y, const RealMatrix& z,
                    const RealMatrix& dz) {
  RealMatrix dy(dz.rows(), dz.cols());
  for (Index r = 0; r < dz.rows(); ++r) {
    const double norm = y.row(r).norm();
    const double dot = dz.row(r).dot(z.row(r));
    dy.row(r) = (dz.row(r) - dot * z.row(r)) / norm;
  }

  ModelGrads g;
  if (model.kind == ModelKind::Linear) {
    g.w1 = dy.transpose() * x;
    g.b1 = dy.colwise().sum().transpose();
    return g;
  }
  // y = tanh(a) W2^T + b2 with a = x W1^T + b1
  RealMatrix a = x * model.w1.transpose();
  a.rowwise() += model.b1.transpose();
  const RealMatrix h = a.array().tanh();
  g.w2 = dy.transpose() * h;
  g.b2 = dy.colwise().sum().transpose();
  const RealMatrix dh = dy * model.w2;
  const RealMatrix da = dh.array() * (1.0 - h.array().square());
  g.w1 = da.transpose() * x;
  g.b1 = da.colwise().sum().transpose();
  return g;
}

std::vector<Index> tensor_sizes(const EmbedModel& model,
                                const ClassifierHead* head) {
  std::vector<Index> sizes{model.w1.size(), model.b1.size()};
  if (model.kind == ModelKind::OneHidden) {
    sizes.push_back(model.w2.size());
    sizes.push_back(model.b2.size());
  }
  if (head) {
    sizes.push_back(head->weights.size());
    sizes.push_back(head->bias.size());
  }
  return sizes;
}

}  // namespace

BatchGrads batch_gradients(const EmbedModel& model, const ClassifierHead* head,
                           const RealMatrix& features,
                           const std::vector<ClassId>& labels,
                           const TrainConfig& cfg) {
  const RealMatrix y = model.forward(features);
  EmbeddingBatch zbatch;
  zbatch.embeddings = l2_normalize(y);
  zbatch.labels = labels;

  BatchGrads out;
  RealMatrix dz;
  if (head) {
    const CombinedLossResult loss = combined_loss(
        zbatch, *head,
        CombinedConfig{cfg.loss_kind, cfg.lambda, cfg.tau, cfg.margin});
    out.value = loss.value;
    out.value_id = loss.value_identity;
    out.value_metric = loss.value_metric;
    dz = loss.grad_embeddings;
    out.head_weights = loss.grad_weights;
    out.head_bias = loss.grad_bias;
  } else {
    const LossResult loss =
        metric_loss(zbatch, cfg.loss_kind, cfg.tau, cfg.margin);
    out.value = loss.value;
    out.value_metric = loss.value;
    dz = loss.grad;
  }

  const ModelGrads mg = backward(model, features, y, zbatch.embeddings, dz);
  out.w1 = mg.w1;
  out.b1 = mg.b1;
  out.w2 = mg.w2;
  out.b2 = mg.b2;
  return out;
}

RealMatrix embed_dataset(const EmbedModel& model, const RealMatrix& features) {
  return l2_normalize(model.forward(features));
}

TrainResult train(const LabeledDataset& dataset, const TrainConfig& cfg) {
  cfg.validate();
  const Index d_in = dataset.dim();

  EmbedModel model = init_model(cfg.model, d_in, cfg.embed_dim, cfg.hidden_dim,
                                derive_seed(cfg.seed, "train.model"));

  ClassId max_label = 0;
  for (const ClassId label : dataset.labels) max_label = std::max(max_label, label);
  const Index n_classes = static_cast<Index>(max_label) + 1;

  ClassifierHead head;
  if (cfg.use_identity) {
    Rng rng(derive_seed(cfg.seed, "train.head"));
    head.weights.resize(n_classes, cfg.embed_dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
    for (Index r = 0; r < n_classes; ++r)
      for (Index c = 0; c < cfg.embed_dim; ++c)
        head.weights(r, c) = scale * rng.gaussian();
    head.bias = RealVector::Zero(n_classes);
  }

  PkSampler sampler(dataset, cfg.batch_k, cfg.batch_n,
                    derive_seed(cfg.seed, "train.sampler"));
  const Index batches_per_epoch = std::max<Index>(1, sampler.batches_per_epoch());
  const long long total_steps =
      static_cast<long long>(cfg.epochs) * batches_per_epoch;

  AdamState opt = make_adam_state(
      tensor_sizes(model, cfg.use_identity ? &head : nullptr));

  TrainResult result;
  long long step = 0;
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    double sum_total = 0.0, sum_id = 0.0, sum_metric = 0.0;
    for (Index b = 0; b < batches_per_epoch; ++b, ++step) {
      const EmbeddingBatch features = sampler.next();
      const BatchGrads g =
          batch_gradients(model, cfg.use_identity ? &head : nullptr,
                          features.embeddings, features.labels, cfg);
      sum_total += g.value;
      sum_id += g.value_id;
      sum_metric += g.value_metric;

      std::vector<TensorRef> tensors{
          {model.w1.data(), g.w1.data(), model.w1.size()},
          {model.b1.data(), g.b1.data(), model.b1.size()}};
      if (model.kind == ModelKind::OneHidden) {
        tensors.push_back({model.w2.data(), g.w2.data(), model.w2.size()});
        tensors.push_back({model.b2.data(), g.b2.data(), model.b2.size()});
      }
      if (cfg.use_identity) {
        tensors.push_back(
            {head.weights.data(), g.head_weights.data(), head.weights.size()});
        tensors.push_back(
            {head.bias.data(), g.head_bias.data(), head.bias.size()});
      }
      adam_step(tensors, opt, lr_schedule(step, total_steps, cfg),
                cfg.weight_decay);
    }

    const RealMatrix z_all = embed_dataset(model, dataset.points);
    const RetrievalMetrics metrics = evaluate_self(z_all, dataset.labels, 5);

    EpochMetrics row;
    row.epoch = epoch;
    const double inv = 1.0 / static_cast<double>(batches_per_epoch);
    row.loss_total = sum_total * inv;
    row.loss_id = sum_id * inv;
    row.loss_metric = sum_metric * inv;
    row.map = metrics.map;
    row.cmc1 = metrics.cmc_at(1);
    row.cmc5 = metrics.cmc_at(5);
    result.log.push_back(row);
  }

  result.checkpoint.model = std::move(model);
  result.checkpoint.head = std::move(head);
  result.checkpoint.opt = std::move(opt);
  result.checkpoint.epoch = cfg.epochs;
  result.checkpoint.config_hash = config_hash(cfg);
  return result;
}

// --- Persistence --------------------------------------------------------------

std::uint64_t config_hash(const TrainConfig& cfg) {
  char buf[512];
  std::snprintf(
      buf, sizeof(buf),
      "epochs=%lld;k=%lld;n=%lld;lr=%.17g;warmup=%.17g;decay=%.17g;tau=%.17g;"
      "lambda=%.17g;loss=%d;id=%d;seed=%llu;dim=%lld;margin=%.17g;model=%d;"
      "hidden=%lld",
      static_cast<long long>(cfg.epochs), static_cast<long long>(cfg.batch_k),
      static_cast<long long>(cfg.batch_n), cfg.lr_base, cfg.warmup_fraction,
      cfg.weight_decay, cfg.tau, cfg.lambda, static_cast<int>(cfg.loss_kind),
      cfg.use_identity ? 1 : 0,
      static_cast<unsigned long long>(cfg.seed),
      static_cast<long long>(cfg.embed_dim), cfg.margin,
      static_cast<int>(cfg.model), static_cast<long long>(cfg.hidden_dim));
  return fnv1a64(buf);
}

namespace {
constexpr char kCheckpointMagic[5] = {'S', 'P', 'C', 'K', '1'};
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  using detail::write_matrix;
  using detail::write_raw;
  using detail::write_vector;
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for write: " + path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_raw(os, static_cast<std::uint32_t>(ck.model.kind));
  write_raw(os, static_cast<std::uint32_t>(ck.epoch));
  write_raw(os, ck.config_hash);
  write_matrix(os, ck.model.w1);
  write_vector(os, ck.model.b1);
  const bool hidden = ck.model.kind == ModelKind::OneHidden;
  if (hidden) {
    write_matrix(os, ck.model.w2);
    write_vector(os, ck.model.b2);
  }
  const bool has_head = ck.head.weights.size() > 0;
  write_raw(os, static_cast<std::uint8_t>(has_head ? 1 : 0));
  if (has_head) {
    write_matrix(os, ck.head.weights);
    write_vector(os, ck.head.bias);
  }
  write_raw(os, static_cast<std::uint64_t>(ck.opt.step));
  write_raw(os, static_cast<std::uint32_t>(ck.opt.m.size()));
  for (std::size_t i = 0; i < ck.opt.m.size(); ++i) {
    write_vector(os, ck.opt.m[i]);
    write_vector(os, ck.opt.v[i]);
  }
  if (!os) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  using detail::read_matrix;
  using detail::read_raw;
  using detail::read_vector;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for read: " + path);
  char magic[5];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw FormatError("bad magic in " + path);

  Checkpoint ck;
  ck.model.kind = static_cast<ModelKind>(read_raw<std::uint32_t>(is));
  ck.epoch = static_cast<Index>(read_raw<std::uint32_t>(is));
  ck.config_hash = read_raw<std::uint64_t>(is);
  ck.model.w1 = read_matrix(is);
  ck.model.b1 = read_vector(is);
  if (ck.model.kind == ModelKind::OneHidden) {
    ck.model.w2 = read_matrix(is);
    ck.model.b2 = read_vector(is);
  }
  if (read_raw<std::uint8_t>(is) != 0) {
    ck.head.weights = read_matrix(is);
    ck.head.bias = read_vector(is);
  }
  ck.opt.step = static_cast<long long>(read_raw<std::uint64_t>(is));
  const auto n_tensors = read_raw<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    ck.opt.m.push_back(read_vector(is));
    ck.opt.v.push_back(read_vector(is));
  }
  return ck;
}

const char* metric_kind_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::SPHard: return "sph";
    case MetricKind::SPLeastHard: return "splh";
    case MetricKind::AdaSP: return "adasp";
    case MetricKind::TripletBH: return "bh";
    case MetricKind::EPTriplet: return "ep";
  }
  return "?";
}

MetricKind metric_kind_from_name(const std::string& name) {
  if (name == "sph") return MetricKind::SPHard;
  if (name == "splh") return MetricKind::SPLeastHard;
  if (name == "adasp") return MetricKind::AdaSP;
  if (name == "bh" || name == "tripletbh") return MetricKind::TripletBH;
  if (name == "ep") return MetricKind::EPTriplet;
  throw Error("unknown loss kind: " + name);
}

// --- Robustness sweep ----------------------------------------------------------

double RobustnessReport::median_drop(MetricKind loss, Index n) const {
  std::vector<double> drops;
  for (const auto& cell : cells)
    if (cell.loss == loss && cell.n_per_class == n)
      drops.push_back(cell.rel_drop);
  if (drops.empty()) throw EmptyInputError("median_drop: no matching cells");
  std::sort(drops.begin(), drops.end());
  const std::size_t mid = drops.size() / 2;
  return drops.size() % 2 == 1 ? drops[mid]
                               : 0.5 * (drops[mid - 1] + drops[mid]);
}

RobustnessReport robustness_sweep(const LabeledDataset& dataset,
                                  const std::vector<MetricKind>& losses,
                                  const std::vector<Index>& ns,
                                  const std::vector<std::uint64_t>& seeds,
                                  const TrainConfig& base_cfg) {
  if (ns.empty() || losses.empty() || seeds.empty())
    throw EmptyInputError("robustness_sweep: empty grid");
  RobustnessReport report;
  for (const MetricKind loss : losses) {
    for (const std::uint64_t seed : seeds) {
      double base_map = 0.0;
      for (std::size_t ni = 0; ni < ns.size(); ++ni) {
        TrainConfig cfg = base_cfg;
        cfg.loss_kind = loss;
        cfg.batch_n = ns[ni];
        cfg.seed = seed;
        const TrainResult res = train(dataset, cfg);

        RobustnessCell cell;
        cell.loss = loss;
        cell.n_per_class = ns[ni];
        cell.seed = seed;
        cell.map = res.final_metrics().map;
        cell.cmc1 = res.final_metrics().cmc1;
        cell.cmc5 = res.final_metrics().cmc5;
        if (ni == 0) base_map = cell.map;
        cell.rel_drop = base_map > 0.0 ? (base_map - cell.map) / base_map : 0.0;
        report.cells.push_back(cell);
      }
    }
  }
  return report;
}

}  // namespace sparsepair
