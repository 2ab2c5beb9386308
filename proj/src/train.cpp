#include "gclrec/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "gclrec/errors.hpp"

namespace gclrec {

Method parse_method(const std::string& name) {
  if (name == "lightgcn") return Method::kLightGcn;
  if (name == "sgl-ed") return Method::kSglEd;
  if (name == "sgl-nd") return Method::kSglNd;
  if (name == "sgl-rw") return Method::kSglRw;
  if (name == "sgl-wa") return Method::kSglWa;
  if (name == "simgcl") return Method::kSimGcl;
  if (name == "xsimgcl") return Method::kXSimGcl;
  throw ConfigError("unknown method '" + name + "'");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::kLightGcn: return "lightgcn";
    case Method::kSglEd: return "sgl-ed";
    case Method::kSglNd: return "sgl-nd";
    case Method::kSglRw: return "sgl-rw";
    case Method::kSglWa: return "sgl-wa";
    case Method::kSimGcl: return "simgcl";
    case Method::kXSimGcl: return "xsimgcl";
  }
  return "unknown";
}

bool uses_contrast(Method method) { return method != Method::kLightGcn; }
bool uses_noise(Method method) { return method == Method::kSimGcl || method == Method::kXSimGcl; }
bool uses_augmentation(Method method) {
  return method == Method::kSglEd || method == Method::kSglNd || method == Method::kSglRw;
}

std::vector<std::string> validate_config(const TrainConfig& c,
                                         const std::set<std::string>& given_keys) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError(key + ": " + why);
  };
  if (c.layers < 1) fail("layers", "must be >= 1");
  if (c.dim == 0) fail("dim", "must be positive");
  if (!(c.lr > 0.0)) fail("lr", "must be positive");
  if (c.reg < 0.0) fail("reg", "must be non-negative");
  if (c.batch_size == 0) fail("batch_size", "must be positive");
  if (c.lambda < 0.0) fail("lambda", "must be non-negative");
  if (c.epsilon < 0.0) fail("epsilon", "must be non-negative");
  if (!(c.tau > 0.0)) fail("tau", "must be positive");
  if (!c.random_contrast_layer && (c.contrast_layer < 1 || c.contrast_layer > c.layers)) {
    fail("contrast_layer", "must lie in [1, layers] or be 'random'");
  }
  if (c.anchor_layer < 0 || c.anchor_layer > c.layers) {
    fail("anchor_layer", "must lie in [0, layers]");
  }
  if (!(c.keep_rate > 0.0 && c.keep_rate <= 1.0)) fail("keep_rate", "must lie in (0, 1]");
  if (c.max_epochs < 1) fail("max_epochs", "must be >= 1");
  if (c.patience < 0) fail("patience", "must be >= 0");
  if (c.eval_interval < 1) fail("eval_interval", "must be >= 1");
  if (c.top_k == 0) fail("topk", "must be positive");

  std::vector<std::string> warnings;
  auto ignored = [&](const char* key) {
    if (given_keys.count(key)) {
      warnings.push_back(std::string(key) + " is ignored by method " + to_string(c.method));
    }
  };
  if (!uses_contrast(c.method)) {
    ignored("lambda");
    ignored("tau");
  }
  if (!uses_noise(c.method)) {
    ignored("epsilon");
    ignored("noise");
  }
  if (c.method != Method::kXSimGcl) {
    ignored("contrast_layer");
    ignored("anchor_layer");
  }
  if (!uses_augmentation(c.method)) ignored("keep_rate");
  return warnings;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  // splitmix64 finalizer applied to a running combination.
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  h = mix(h ^ a);
  h = mix(h ^ b);
  return mix(h ^ c);
}

std::vector<Batch> sample_batches(const InteractionDataset& dataset, std::size_t batch_size,
                                  std::uint64_t seed, int epoch) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  const auto& train = dataset.train();
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(epoch), 0xba7c));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::uniform_int_distribution<std::size_t> any_item(0, dataset.num_items() - 1);
  std::vector<Batch> batches;
  batches.reserve((order.size() + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::vector<Triple> triples;
    triples.reserve(end - start);
    for (std::size_t k = start; k < end; ++k) {
      const Interaction& p = train[order[k]];
      if (dataset.train_items(p.user).size() >= dataset.num_items()) {
        throw DataError("user " + std::to_string(p.user) + " has no unobserved item to sample");
      }
      std::size_t neg = any_item(rng);
      while (dataset.has_train(p.user, neg)) neg = any_item(rng);
      triples.push_back({p.user, p.item, neg});
    }
    batches.push_back(make_batch(dataset.num_users(), std::move(triples)));
  }
  return batches;
}

AdamOptimizer::AdamOptimizer(std::size_t rows, std::size_t cols, double lr, double beta1,
                             double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(rows, cols), v_(rows, cols) {}

void AdamOptimizer::step(Matrix& params, const Matrix& grad) {
  if (!params.same_shape(grad) || !params.same_shape(m_)) {
    throw std::invalid_argument("adam: shape mismatch");
  }
  if (!all_finite(grad)) throw NumericalError("non-finite gradient");
  ++t_;
  const double correction1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t r = 0; r < grad.rows(); ++r) {
    auto g = grad.row(r);
    if (std::all_of(g.begin(), g.end(), [](double x) { return x == 0.0; })) continue;
    auto p = params.row(r);
    auto m = m_.row(r);
    auto v = v_.row(r);
    for (std::size_t c = 0; c < g.size(); ++c) {
      m[c] = beta1_ * m[c] + (1.0 - beta1_) * g[c];
      v[c] = beta2_ * v[c] + (1.0 - beta2_) * g[c] * g[c];
      const double m_hat = m[c] / correction1;
      const double v_hat = v[c] / correction2;
      p[c] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
    }
  }
}

Trainer::Trainer(const TrainConfig& config, const InteractionDataset& dataset)
    : config_(config),
      dataset_(&dataset),
      adj_(build_adjacency(dataset)),
      plain_(adj_, config.layers),
      e0_(init_embeddings(dataset.num_nodes(), config.dim, derive_seed(config.seed, 0x1e0))),
      optimizer_(dataset.num_nodes(), config.dim, config.lr) {
  validate_config(config_);
}

void Trainer::begin_epoch(int epoch) {
  if (!uses_augmentation(config_.method)) return;
  const auto start = std::chrono::steady_clock::now();
  const std::size_t per_view =
      config_.method == Method::kSglRw ? static_cast<std::size_t>(config_.layers) : 1;
  view_a_.reset();
  view_b_.reset();
  augmented_.clear();
  augmented_.reserve(2 * per_view);
  for (std::size_t k = 0; k < 2 * per_view; ++k) {
    const std::uint64_t seed = derive_seed(config_.seed, static_cast<std::uint64_t>(epoch), 0xa06, k);
    augmented_.push_back(config_.method == Method::kSglNd
                             ? node_dropout(adj_, config_.keep_rate, seed)
                             : edge_dropout(adj_, config_.keep_rate, seed));
  }
  auto views = [&](std::size_t offset) {
    std::vector<const SparseAdjacency*> layers;
    for (int l = 0; l < config_.layers; ++l) {
      layers.push_back(&augmented_[offset + (per_view == 1 ? 0 : static_cast<std::size_t>(l))]);
    }
    return std::make_unique<LayerGraphs>(std::move(layers));
  };
  view_a_ = views(0);
  view_b_ = views(per_view);
  augmentation_seconds_ =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int Trainer::contrast_layer_for(std::uint64_t noise_seed) const {
  if (!config_.random_contrast_layer) return config_.contrast_layer;
  Rng rng(noise_seed);
  std::uniform_int_distribution<int> pick(1, config_.layers);
  return pick(rng);
}

JointResult Trainer::compute(const Batch& batch, std::uint64_t noise_seed) const {
  Rng rng(noise_seed);
  const NoiseSpec noise{config_.epsilon, config_.noise};
  switch (config_.method) {
    case Method::kLightGcn:
      return joint_loss_lightgcn(e0_, plain_, batch, config_.reg);
    case Method::kSglEd:
    case Method::kSglNd:
    case Method::kSglRw:
    case Method::kSglWa: {
      SglParams params{config_.lambda, config_.tau, config_.reg, SglVariant::kWithoutAugmentation};
      if (config_.method == Method::kSglEd) params.variant = SglVariant::kEdgeDropout;
      if (config_.method == Method::kSglNd) params.variant = SglVariant::kNodeDropout;
      if (config_.method == Method::kSglRw) params.variant = SglVariant::kRandomWalk;
      if (params.variant != SglVariant::kWithoutAugmentation && !view_a_) {
        throw std::logic_error("begin_epoch must run before compute for SGL augmentations");
      }
      return joint_loss_sgl(e0_, plain_, view_a_.get(), view_b_.get(), batch, params);
    }
    case Method::kSimGcl: {
      const SimGclParams params{config_.lambda, config_.tau, config_.reg, noise};
      return joint_loss_simgcl(e0_, plain_, batch, params, rng);
    }
    case Method::kXSimGcl: {
      XSimGclParams params{config_.lambda, config_.tau, config_.reg, config_.contrast_layer,
                           config_.anchor_layer};
      if (config_.random_contrast_layer) {
        std::uniform_int_distribution<int> pick(1, config_.layers);
        params.contrast_layer = pick(rng);
      }
      const EmbeddingState state = propagate_perturbed(e0_, plain_, noise, rng);
      return joint_loss_xsimgcl(e0_, state, plain_, batch, params);
    }
  }
  throw std::logic_error("unhandled method");
}

void Trainer::apply(const Matrix& grad) { optimizer_.step(e0_, grad); }

void Trainer::set_parameters(Matrix e0) {
  if (!e0.same_shape(e0_)) throw DataError("parameter table shape mismatch");
  e0_ = std::move(e0);
}

Matrix Trainer::inference_embeddings() const {
  const Aggregation aggregation =
      uses_noise(config_.method) ? Aggregation::kSkipInput : Aggregation::kWithInput;
  return propagate_plain(e0_, plain_, aggregation).final;
}

TrainResult train(const TrainConfig& config, const InteractionDataset& input,
                  const EpochObserver& observer) {
  validate_config(config);
  using Clock = std::chrono::steady_clock;
  const InteractionDataset merged =
      config.merge_validation ? input.merged_train_validation() : InteractionDataset{};
  const InteractionDataset& dataset = config.merge_validation ? merged : input;
  Trainer trainer(config, dataset);
  const UniformitySample sample =
      sample_uniformity_nodes(dataset, config.uniformity_min_item_interactions,
                              config.uniformity_users, derive_seed(config.seed, 0x0f));
  const bool can_measure_uniformity = !sample.user_nodes.empty() && !sample.item_nodes.empty();
  const bool has_validation = !dataset.validation().empty();

  TrainResult result;
  double best_recall = -1.0;
  int stale_evaluations = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto epoch_start = Clock::now();
    trainer.begin_epoch(epoch);
    const auto batches = sample_batches(dataset, config.batch_size, config.seed, epoch);

    EpochRecord record;
    record.epoch = epoch;
    double batch_seconds = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto batch_start = Clock::now();
      const std::uint64_t noise_seed =
          derive_seed(config.seed, static_cast<std::uint64_t>(epoch), b, 0x5eed);
      JointResult step = trainer.compute(batches[b], noise_seed);
      if (!std::isfinite(step.report.total)) {
        throw NumericalError("loss diverged at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(b));
      }
      try {
        trainer.apply(step.grad);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                             ", batch " + std::to_string(b));
      }
      batch_seconds += std::chrono::duration<double>(Clock::now() - batch_start).count();
      record.rec_loss += step.report.rec;
      record.cl_loss += step.report.cl;
      record.reg_loss += step.report.reg;
      record.total_loss += step.report.total;
    }
    const double nb = static_cast<double>(std::max<std::size_t>(batches.size(), 1));
    record.rec_loss /= nb;
    record.cl_loss /= nb;
    record.reg_loss /= nb;
    record.total_loss /= nb;
    record.batch_ms = 1000.0 * batch_seconds / nb;

    const bool evaluate_now = epoch % config.eval_interval == 0 || epoch == config.max_epochs;
    bool stop = false;
    if (evaluate_now) {
      const Matrix emb = trainer.inference_embeddings();
      if (can_measure_uniformity) {
        record.uniformity = uniformity(emb, sample.user_nodes, sample.item_nodes,
                                       {1'000'000, derive_seed(config.seed, 0x0f, 1)});
      }
      if (has_validation) {
        const auto metrics = recall_ndcg(dataset, emb, config.top_k, EvalSplit::kValidation);
        record.val_recall = metrics.recall;
        record.val_ndcg = metrics.ndcg;
        if (metrics.recall > best_recall) {
          best_recall = metrics.recall;
          stale_evaluations = 0;
          result.trace.best_epoch = epoch;
          result.parameters = trainer.parameters();
          result.embeddings = emb;
        } else if (++stale_evaluations > config.patience) {
          stop = true;
        }
      }
    }
    if (!has_validation) {
      result.trace.best_epoch = epoch;
    }
    record.epoch_seconds = std::chrono::duration<double>(Clock::now() - epoch_start).count();
    result.trace.epochs.push_back(record);
    if (observer) observer(record);
    if (stop) break;
  }

  if (!has_validation || result.parameters.empty()) {
    result.parameters = trainer.parameters();
    result.embeddings = trainer.inference_embeddings();
    if (result.trace.best_epoch == 0) result.trace.best_epoch = config.max_epochs;
  }
  return result;
}

std::string SweepCell::key() const {
  std::ostringstream out;
  out << "lambda=" << lambda << ";epsilon=" << epsilon << ";anchor=" << anchor_layer
      << ";contrast=" << (random_layer ? std::string("random") : std::to_string(contrast_layer));
  return out.str();
}

std::vector<SweepCell> sweep_cells(const TrainConfig& config, const SweepGrid& grid) {
  std::vector<SweepCell> cells;
  if (grid.kind == SweepGrid::Kind::kLambdaEpsilon) {
    const std::vector<double> lambdas =
        grid.lambdas.empty() ? std::vector<double>{config.lambda} : grid.lambdas;
    const std::vector<double> epsilons =
        grid.epsilons.empty() ? std::vector<double>{config.epsilon} : grid.epsilons;
    for (double lambda : lambdas) {
      for (double epsilon : epsilons) {
        cells.push_back({lambda, epsilon, config.anchor_layer, config.contrast_layer,
                         config.random_contrast_layer});
      }
    }
    return cells;
  }
  for (int a = 1; a <= config.layers; ++a) {
    for (int b = 1; b <= a; ++b) {
      cells.push_back({config.lambda, config.epsilon, a == config.layers ? 0 : a, b, false});
    }
  }
  cells.push_back({config.lambda, config.epsilon, 0, 1, true});
  return cells;
}

std::vector<SweepRow> sweep(const TrainConfig& config, const InteractionDataset& dataset,
                            const SweepGrid& grid, const std::set<std::string>& completed,
                            const std::function<void(const SweepRow&)>& on_row) {
  std::vector<SweepRow> rows;
  for (const SweepCell& cell : sweep_cells(config, grid)) {
    if (completed.count(cell.key())) continue;
    SweepRow row;
    row.cell = cell;
    try {
      TrainConfig cell_config = config;
      cell_config.lambda = cell.lambda;
      cell_config.epsilon = cell.epsilon;
      cell_config.anchor_layer = cell.anchor_layer;
      cell_config.contrast_layer = cell.contrast_layer;
      cell_config.random_contrast_layer = cell.random_layer;
      const TrainResult trained = train(cell_config, dataset);
      row.best_epoch = trained.trace.best_epoch;
      for (const auto& e : trained.trace.epochs) {
        if (e.epoch == row.best_epoch) {
          row.val_recall = e.val_recall.value_or(0.0);
          row.val_ndcg = e.val_ndcg.value_or(0.0);
        }
      }
      const auto test = recall_ndcg(dataset, trained.embeddings, config.top_k, EvalSplit::kTest);
      row.test_recall = test.recall;
      row.test_ndcg = test.ndcg;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
      warn("sweep cell " + cell.key() + " failed: " + row.error);
    }
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace gclrec
