// Command-line front-end: dataset generation, training, gradient checking,
// the harmful-pair simulator, hyper-parameter sweeps, and retrieval
// evaluation. Every file-producing run writes a JSON manifest before its
// outputs; all randomness derives from --seed via tagged sub-seeds.
#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "sparsepair/batch.hpp"
#include "sparsepair/eval.hpp"
#include "sparsepair/mining.hpp"
#include "sparsepair/numerics.hpp"
#include "sparsepair/rng.hpp"
#include "sparsepair/sp_loss.hpp"
#include "sparsepair/synth.hpp"
#include "sparsepair/trainer.hpp"

using json = nlohmann::json;
using namespace sparsepair;

namespace {

constexpr const char* kVersion = "0.1.0";

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitIoError = 3;

int log_level() {
  const char* env = std::getenv("SPARSEPAIR_LOG");
  if (!env) return 0;
  const std::string v(env);
  if (v == "debug") return 2;
  if (v == "info") return 1;
  return 0;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[info] " << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[debug] " << msg << "\n";
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for write: " + path);
  os << text;
  if (!os) throw IoError("write failed: " + path);
}

void write_manifest(const std::string& subcommand, std::uint64_t seed,
                    const json& config, const json& outputs,
                    const std::string& path) {
  json m;
  m["subcommand"] = subcommand;
  m["seed"] = seed;
  m["toolkit_version"] = kVersion;
  m["config"] = config;
  m["outputs"] = outputs;
  m["drop_last_incomplete_batch"] = true;
  write_text(path, m.dump(2) + "\n");
  log_debug("manifest written: " + path);
}

// --- train config <-> json ----------------------------------------------------

json config_to_json(const TrainConfig& cfg) {
  json j;
  j["epochs"] = cfg.epochs;
  j["batch_K"] = cfg.batch_k;
  j["batch_N"] = cfg.batch_n;
  j["lr_base"] = cfg.lr_base;
  j["warmup_fraction"] = cfg.warmup_fraction;
  j["weight_decay"] = cfg.weight_decay;
  j["tau"] = cfg.tau;
  j["lambda"] = cfg.lambda;
  j["loss_kind"] = metric_kind_name(cfg.loss_kind);
  j["use_identity"] = cfg.use_identity;
  j["seed"] = cfg.seed;
  j["embed_dim"] = cfg.embed_dim;
  j["margin"] = cfg.margin;
  j["model"] = cfg.model == ModelKind::Linear ? "linear" : "one_hidden";
  j["hidden_dim"] = cfg.hidden_dim;
  return j;
}

void config_from_json(const json& j, TrainConfig& cfg) {
  if (j.contains("epochs")) cfg.epochs = j["epochs"].get<Index>();
  if (j.contains("batch_K")) cfg.batch_k = j["batch_K"].get<Index>();
  if (j.contains("batch_N")) cfg.batch_n = j["batch_N"].get<Index>();
  if (j.contains("lr_base")) cfg.lr_base = j["lr_base"].get<double>();
  if (j.contains("warmup_fraction"))
    cfg.warmup_fraction = j["warmup_fraction"].get<double>();
  if (j.contains("weight_decay"))
    cfg.weight_decay = j["weight_decay"].get<double>();
  if (j.contains("tau")) cfg.tau = j["tau"].get<double>();
  if (j.contains("lambda")) cfg.lambda = j["lambda"].get<double>();
  if (j.contains("loss_kind"))
    cfg.loss_kind = metric_kind_from_name(j["loss_kind"].get<std::string>());
  if (j.contains("use_identity"))
    cfg.use_identity = j["use_identity"].get<bool>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("embed_dim")) cfg.embed_dim = j["embed_dim"].get<Index>();
  if (j.contains("margin")) cfg.margin = j["margin"].get<double>();
  if (j.contains("model"))
    cfg.model = j["model"].get<std::string>() == "one_hidden"
                    ? ModelKind::OneHidden
                    : ModelKind::Linear;
  if (j.contains("hidden_dim")) cfg.hidden_dim = j["hidden_dim"].get<Index>();
}

// accepts either a bare config object or a previously written manifest
json load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  json j;
  is >> j;
  if (j.contains("config")) return j["config"];
  return j;
}

std::string metrics_csv(const std::vector<EpochMetrics>& log) {
  std::string csv = "epoch,loss_total,loss_id,loss_metric,mAP,cmc1,cmc5\n";
  for (const auto& row : log) {
    csv += std::to_string(row.epoch) + "," + fmt(row.loss_total) + "," +
           fmt(row.loss_id) + "," + fmt(row.loss_metric) + "," + fmt(row.map) +
           "," + fmt(row.cmc1) + "," + fmt(row.cmc5) + "\n";
  }
  return csv;
}

EmbeddingBatch random_unit_batch(Index k, Index n, Index dim,
                                 std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingBatch batch;
  batch.embeddings.resize(k * n, dim);
  for (Index r = 0; r < k * n; ++r) {
    double norm = 0.0;
    do {
      for (Index c = 0; c < dim; ++c) batch.embeddings(r, c) = rng.gaussian();
      norm = batch.embeddings.row(r).norm();
    } while (norm <= 1e-12);
    batch.embeddings.row(r) /= norm;
  }
  batch.num_classes = k;
  batch.instances_per_class = n;
  for (Index c = 0; c < k; ++c)
    for (Index i = 0; i < n; ++i)
      batch.labels.push_back(static_cast<ClassId>(c));
  return batch;
}

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) {
      out.push_back(s.substr(pos));
      break;
    }
    out.push_back(s.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

// --- subcommand payloads -------------------------------------------------------

struct GenArgs {
  SyntheticSpec spec;
  std::string out;
  std::string json_out;
};

int run_gen(const GenArgs& args) {
  json cfg;
  cfg["classes"] = args.spec.num_classes;
  cfg["per_class"] = args.spec.per_class;
  cfg["dim"] = args.spec.dim;
  cfg["concentration"] = args.spec.concentration;
  cfg["outlier_fraction"] = args.spec.outlier_fraction;
  cfg["outlier_spread"] = args.spec.outlier_spread;
  json outputs;
  outputs["dataset"] = args.out;
  if (!args.json_out.empty()) outputs["json"] = args.json_out;
  write_manifest("gen", args.spec.rng_seed, cfg, outputs,
                 args.out + ".manifest.json");

  const LabeledDataset ds = generate(args.spec);
  save(ds, args.out);
  if (!args.json_out.empty()) save_json(ds, args.json_out);
  log_info("wrote " + std::to_string(ds.size()) + " rows to " + args.out);
  return kExitOk;
}

struct TrainArgs {
  TrainConfig cfg;
  std::string data;
  std::string out_prefix = "run";
};

int run_train(const TrainArgs& args) {
  const LabeledDataset ds = load(args.data);
  args.cfg.validate();

  json outputs;
  outputs["metrics_csv"] = args.out_prefix + ".metrics.csv";
  outputs["checkpoint"] = args.out_prefix + ".ckpt";
  json cfg = config_to_json(args.cfg);
  cfg["data"] = args.data;
  write_manifest("train", args.cfg.seed, cfg, outputs,
                 args.out_prefix + ".manifest.json");

  const TrainResult result = train(ds, args.cfg);
  write_text(args.out_prefix + ".metrics.csv", metrics_csv(result.log));
  save_checkpoint(result.checkpoint, args.out_prefix + ".ckpt");
  log_info("final mAP " + fmt(result.final_metrics().map) + ", cmc1 " +
           fmt(result.final_metrics().cmc1));
  return kExitOk;
}

struct GradcheckArgs {
  Index k = 3;
  Index n = 4;
  Index dim = 8;
  double tau = 0.04;
  std::string variant = "adasp";
  std::uint64_t seed = 1;
  Index batches = 20;
  double tolerance = 1e-5;
  std::string data;
};

int run_gradcheck(const GradcheckArgs& args) {
  SPVariant variant;
  if (args.variant == "sph") variant = SPVariant::Hard;
  else if (args.variant == "splh") variant = SPVariant::LeastHard;
  else if (args.variant == "adasp") variant = SPVariant::Adaptive;
  else throw Error("unknown variant: " + args.variant);

  std::vector<EmbeddingBatch> batches;
  if (!args.data.empty()) {
    const LabeledDataset ds = load(args.data);
    if (!ds.points.allFinite()) {
      std::cerr << "gradcheck: dataset contains non-finite values\n";
      return kExitConfigError;
    }
    batches.push_back(
        pk_sample(ds, args.k, args.n, derive_seed(args.seed, "gradcheck")));
  } else {
    for (Index b = 0; b < args.batches; ++b)
      batches.push_back(random_unit_batch(
          args.k, args.n, args.dim,
          derive_seed(args.seed, "gradcheck." + std::to_string(b))));
  }

  const SPConfig cfg{args.tau, variant};
  double worst = 0.0;
  for (const auto& batch : batches) {
    const LossResult result = sp_loss(batch, cfg);
    std::vector<double> alphas;
    for (const auto& d : result.diagnostics) alphas.push_back(d.alpha);

    const double step = 1e-6;
    EmbeddingBatch probe = batch;
    RealMatrix fd(batch.size(), batch.dim());
    for (Index r = 0; r < batch.size(); ++r)
      for (Index c = 0; c < batch.dim(); ++c) {
        probe.embeddings(r, c) = batch.embeddings(r, c) + step;
        const double up =
            sp_loss(probe, cfg,
                    variant == SPVariant::Adaptive ? &alphas : nullptr)
                .value;
        probe.embeddings(r, c) = batch.embeddings(r, c) - step;
        const double down =
            sp_loss(probe, cfg,
                    variant == SPVariant::Adaptive ? &alphas : nullptr)
                .value;
        probe.embeddings(r, c) = batch.embeddings(r, c);
        fd(r, c) = (up - down) / (2.0 * step);
      }
    // relative error at the gradient's scale; per-coordinate ratios drown in
    // the |f|*eps/step round-off of the central differences
    const double scale = std::max(
        {fd.cwiseAbs().maxCoeff(), result.grad.cwiseAbs().maxCoeff(), 1e-12});
    worst = std::max(worst,
                     (fd - result.grad).cwiseAbs().maxCoeff() / scale);
  }

  std::cout << "gradcheck " << args.variant << " tau=" << fmt(args.tau)
            << " batches=" << batches.size() << " max_rel_error=" << fmt(worst)
            << (worst < args.tolerance ? " PASS" : " FAIL") << "\n";
  return worst < args.tolerance ? kExitOk : kExitCheckFailed;
}

struct MinesimArgs {
  HarmfulSimConfig cfg;
  std::string kh_list = "2";
  std::string out;
};

int run_minesim(MinesimArgs& args) {
  args.cfg.harmful_per_id.clear();
  for (const auto& tok : split_csv_list(args.kh_list))
    args.cfg.harmful_per_id.push_back(static_cast<Index>(std::stoll(tok)));

  json cfg;
  cfg["ids"] = args.cfg.num_ids;
  cfg["m"] = args.cfg.instances;
  cfg["kh"] = args.cfg.harmful_per_id;
  cfg["trials"] = args.cfg.trials;
  cfg["workers"] = args.cfg.workers;
  json outputs;
  outputs["result"] = args.out;
  write_manifest("minesim", args.cfg.rng_seed, cfg, outputs,
                 args.out + ".manifest.json");

  const HarmfulSimResult result = run_harmful_sim(args.cfg);
  json j;
  j["config"] = cfg;
  j["config"]["seed"] = args.cfg.rng_seed;
  j["p_sp"] = result.p_sp;
  j["p_dense"] = result.p_dense;
  j["situation1_sp_hits"] = result.situation1_sp_hits;
  json trials = json::array();
  for (const auto& rec : result.trials) {
    json t;
    t["seed"] = rec.seed;
    t["sp_hits"] = rec.sp_hits;
    t["dense_hits"] = rec.dense_hits;
    trials.push_back(std::move(t));
  }
  j["trials"] = std::move(trials);
  write_text(args.out, j.dump(2) + "\n");
  std::cout << "p_sp=" << fmt(result.p_sp) << " p_dense=" << fmt(result.p_dense)
            << " situation1_sp_hits=" << result.situation1_sp_hits << "\n";
  return kExitOk;
}

struct SweepArgs {
  std::string grid = "tau";
  std::string data;
  std::string out;
  std::string json_out;
  std::string values;
  std::string losses = "sph,splh,adasp,bh";
  std::string seeds = "1,2,3,4,5";
  TrainConfig base;
};

int run_sweep(const SweepArgs& args) {
  const LabeledDataset ds = load(args.data);

  json cfg = config_to_json(args.base);
  cfg["grid"] = args.grid;
  cfg["data"] = args.data;
  json outputs;
  outputs["csv"] = args.out;
  write_manifest("sweep", args.base.seed, cfg, outputs,
                 args.out + ".manifest.json");

  std::string csv;
  if (args.grid == "tau" || args.grid == "lambda") {
    std::vector<double> values;
    if (!args.values.empty()) {
      for (const auto& tok : split_csv_list(args.values))
        values.push_back(std::stod(tok));
    } else if (args.grid == "tau") {
      values = {0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08, 0.09};
    } else {
      values = {0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
    }
    csv = "param,value,seed,mAP,cmc1,cmc5\n";
    for (const double v : values) {
      TrainConfig run_cfg = args.base;
      if (args.grid == "tau") run_cfg.tau = v;
      else run_cfg.lambda = v;
      run_cfg.validate();
      const TrainResult result = train(ds, run_cfg);
      csv += args.grid + "," + fmt(v) + "," + std::to_string(run_cfg.seed) +
             "," + fmt(result.final_metrics().map) + "," +
             fmt(result.final_metrics().cmc1) + "," +
             fmt(result.final_metrics().cmc5) + "\n";
      log_info(args.grid + "=" + fmt(v) + " mAP=" +
               fmt(result.final_metrics().map));
    }
  } else if (args.grid == "n") {
    std::vector<Index> ns;
    if (!args.values.empty()) {
      for (const auto& tok : split_csv_list(args.values))
        ns.push_back(static_cast<Index>(std::stoll(tok)));
    } else {
      ns = {8, 16, 32};
    }
    std::vector<MetricKind> losses;
    for (const auto& tok : split_csv_list(args.losses))
      losses.push_back(metric_kind_from_name(tok));
    std::vector<std::uint64_t> seeds;
    for (const auto& tok : split_csv_list(args.seeds))
      seeds.push_back(std::stoull(tok));

    const RobustnessReport report =
        robustness_sweep(ds, losses, ns, seeds, args.base);
    csv = "loss,N,seed,mAP,cmc1,cmc5,rel_drop\n";
    for (const auto& cell : report.cells) {
      csv += std::string(metric_kind_name(cell.loss)) + "," +
             std::to_string(cell.n_per_class) + "," +
             std::to_string(cell.seed) + "," + fmt(cell.metrics.map) + "," +
             fmt(cell.metrics.cmc[0]) + "," + fmt(cell.metrics.cmc[4]) + "," +
             fmt(cell.rel_drop) + "\n";
    }
  } else {
    throw Error("unknown grid: " + args.grid);
  }

  write_text(args.out, csv);
  return kExitOk;
}

struct EvalArgs {
  std::string data;
  std::string ckpt;
  std::string out;
};

int run_eval(const EvalArgs& args) {
  const LabeledDataset ds = load(args.data);
  const Checkpoint ck = load_checkpoint(args.ckpt);
  const RealMatrix z = embed_dataset(ck.model, ds.points);
  const RetrievalMetrics metrics = evaluate_self(z, ds.labels, 5);

  json j;
  j["mAP"] = metrics.map;
  j["cmc1"] = metrics.cmc_at(1);
  j["cmc5"] = metrics.cmc_at(5);
  j["skipped_queries"] = metrics.skipped_queries;
  if (!args.out.empty()) {
    json cfg;
    cfg["data"] = args.data;
    cfg["checkpoint"] = args.ckpt;
    json outputs;
    outputs["result"] = args.out;
    write_manifest("eval", 0, cfg, outputs, args.out + ".manifest.json");
    write_text(args.out, j.dump(2) + "\n");
  }
  std::cout << j.dump() << "\n";
  return kExitOk;
}

void add_train_flags(CLI::App* cmd, TrainConfig& cfg) {
  cmd->add_option("--epochs", cfg.epochs);
  cmd->add_option("--k", cfg.batch_k, "classes per batch");
  cmd->add_option("--n", cfg.batch_n, "instances per class");
  cmd->add_option("--lr", cfg.lr_base);
  cmd->add_option("--warmup-fraction", cfg.warmup_fraction);
  cmd->add_option("--weight-decay", cfg.weight_decay);
  cmd->add_option("--tau", cfg.tau);
  cmd->add_option("--lambda", cfg.lambda);
  cmd->add_option("--margin", cfg.margin);
  cmd->add_option("--seed", cfg.seed);
  cmd->add_option("--embed-dim", cfg.embed_dim);
  cmd->add_option("--hidden-dim", cfg.hidden_dim);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sparse pairwise metric-learning toolkit"};
  app.require_subcommand(1);

  // gen ------------------------------------------------------------------
  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
  gen_cmd->add_option("--classes", gen_args.spec.num_classes)
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--per-class", gen_args.spec.per_class)
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--dim", gen_args.spec.dim)->check(CLI::Range(2, 4096));
  gen_cmd->add_option("--concentration", gen_args.spec.concentration)
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--outlier-fraction", gen_args.spec.outlier_fraction)
      ->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_option("--outlier-spread", gen_args.spec.outlier_spread)
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--seed", gen_args.spec.rng_seed);
  gen_cmd->add_option("--out", gen_args.out)->required();
  gen_cmd->add_option("--json-out", gen_args.json_out);

  // train ----------------------------------------------------------------
  TrainArgs train_args;
  std::string train_config_path;
  auto* train_cmd = app.add_subcommand("train", "train an embedder");
  train_cmd->add_option("--data", train_args.data)->required();
  train_cmd->add_option("--config", train_config_path,
                        "JSON config or manifest; flags override");
  std::string train_loss = "adasp";
  train_cmd->add_option("--loss", train_loss, "sph|splh|adasp|bh|ep");
  bool no_identity = false;
  train_cmd->add_flag("--no-identity", no_identity,
                      "train on the metric loss alone");
  std::string train_model = "linear";
  train_cmd->add_option("--model", train_model, "linear|one_hidden");
  add_train_flags(train_cmd, train_args.cfg);
  train_cmd->add_option("--out-prefix", train_args.out_prefix);

  // gradcheck --------------------------------------------------------------
  GradcheckArgs gc_args;
  auto* gc_cmd =
      app.add_subcommand("gradcheck", "verify analytic gradients against "
                                      "central finite differences");
  gc_cmd->add_option("--k", gc_args.k)->check(CLI::Range(2, 64));
  gc_cmd->add_option("--n", gc_args.n)->check(CLI::Range(2, 64));
  gc_cmd->add_option("--dim", gc_args.dim)->check(CLI::Range(2, 512));
  gc_cmd->add_option("--tau", gc_args.tau)->check(CLI::PositiveNumber);
  gc_cmd->add_option("--variant", gc_args.variant, "sph|splh|adasp");
  gc_cmd->add_option("--seed", gc_args.seed);
  gc_cmd->add_option("--batches", gc_args.batches)->check(CLI::PositiveNumber);
  gc_cmd->add_option("--tolerance", gc_args.tolerance);
  gc_cmd->add_option("--data", gc_args.data, "check on a stored dataset");

  // minesim ---------------------------------------------------------------
  MinesimArgs ms_args;
  auto* ms_cmd = app.add_subcommand(
      "minesim", "Monte Carlo harmful-pair sampling simulator");
  ms_cmd->add_option("--ids", ms_args.cfg.num_ids)->check(CLI::PositiveNumber);
  ms_cmd->add_option("--m", ms_args.cfg.instances)->check(CLI::Range(2, 1024));
  ms_cmd->add_option("--kh", ms_args.kh_list,
                     "harmful slots per id (single value or per-id list)");
  ms_cmd->add_option("--trials", ms_args.cfg.trials)
      ->check(CLI::PositiveNumber);
  ms_cmd->add_option("--seed", ms_args.cfg.rng_seed);
  ms_cmd->add_option("--workers", ms_args.cfg.workers)->check(CLI::Range(1, 64));
  ms_cmd->add_option("--out", ms_args.out)->required();

  // sweep -----------------------------------------------------------------
  SweepArgs sweep_args;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "grid runs over tau, lambda, or N");
  sweep_cmd->add_option("--grid", sweep_args.grid, "tau|lambda|n")->required();
  sweep_cmd->add_option("--data", sweep_args.data)->required();
  sweep_cmd->add_option("--out", sweep_args.out)->required();
  sweep_cmd->add_option("--values", sweep_args.values, "comma-separated grid");
  sweep_cmd->add_option("--losses", sweep_args.losses);
  sweep_cmd->add_option("--seeds", sweep_args.seeds);
  std::string sweep_loss = "adasp";
  sweep_cmd->add_option("--loss", sweep_loss, "loss for tau/lambda grids");
  bool sweep_no_identity = false;
  sweep_cmd->add_flag("--no-identity", sweep_no_identity);
  add_train_flags(sweep_cmd, sweep_args.base);

  // eval ------------------------------------------------------------------
  EvalArgs eval_args;
  auto* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--data", eval_args.data)->required();
  eval_cmd->add_option("--ckpt", eval_args.ckpt)->required();
  eval_cmd->add_option("--out", eval_args.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n" << app.help();
    return kExitConfigError;
  }

  try {
    if (*gen_cmd) return run_gen(gen_args);
    if (*train_cmd) {
      // config file forms the base; explicitly passed flags override it
      if (!train_config_path.empty()) {
        const TrainConfig flag_values = train_args.cfg;  // post-parse values
        train_args.cfg = TrainConfig{};
        config_from_json(load_config_file(train_config_path), train_args.cfg);
        const auto overridden = [&](const char* name) {
          return train_cmd->count(name) > 0;
        };
        if (overridden("--epochs")) train_args.cfg.epochs = flag_values.epochs;
        if (overridden("--k")) train_args.cfg.batch_k = flag_values.batch_k;
        if (overridden("--n")) train_args.cfg.batch_n = flag_values.batch_n;
        if (overridden("--lr")) train_args.cfg.lr_base = flag_values.lr_base;
        if (overridden("--warmup-fraction"))
          train_args.cfg.warmup_fraction = flag_values.warmup_fraction;
        if (overridden("--weight-decay"))
          train_args.cfg.weight_decay = flag_values.weight_decay;
        if (overridden("--tau")) train_args.cfg.tau = flag_values.tau;
        if (overridden("--lambda")) train_args.cfg.lambda = flag_values.lambda;
        if (overridden("--margin")) train_args.cfg.margin = flag_values.margin;
        if (overridden("--seed")) train_args.cfg.seed = flag_values.seed;
        if (overridden("--embed-dim"))
          train_args.cfg.embed_dim = flag_values.embed_dim;
        if (overridden("--hidden-dim"))
          train_args.cfg.hidden_dim = flag_values.hidden_dim;
      }
      if (train_cmd->count("--loss") || train_config_path.empty())
        train_args.cfg.loss_kind = metric_kind_from_name(train_loss);
      if (no_identity) train_args.cfg.use_identity = false;
      if (train_cmd->count("--model") || train_config_path.empty())
        train_args.cfg.model = train_model == "one_hidden"
                                   ? ModelKind::OneHidden
                                   : ModelKind::Linear;
      return run_train(train_args);
    }
    if (*gc_cmd) return run_gradcheck(gc_args);
    if (*ms_cmd) return run_minesim(ms_args);
    if (*sweep_cmd) {
      sweep_args.base.loss_kind = metric_kind_from_name(sweep_loss);
      if (sweep_no_identity) sweep_args.base.use_identity = false;
      return run_sweep(sweep_args);
    }
    if (*eval_cmd) return run_eval(eval_args);
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
  return kExitConfigError;
}
