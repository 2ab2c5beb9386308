#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gclrec/data.hpp"
#include "gclrec/eval.hpp"
#include "gclrec/graph.hpp"
#include "gclrec/loss.hpp"
#include "gclrec/model.hpp"

namespace gclrec {

enum class Method { kLightGcn, kSglEd, kSglNd, kSglRw, kSglWa, kSimGcl, kXSimGcl };

Method parse_method(const std::string& name);
std::string to_string(Method method);
bool uses_contrast(Method method);
bool uses_noise(Method method);
bool uses_augmentation(Method method);

struct TrainConfig {
  Method method = Method::kXSimGcl;
  int layers = 2;
  std::size_t dim = 64;
  double lr = 0.001;
  double reg = 1e-4;
  std::size_t batch_size = 2048;
  double lambda = 0.2;
  double epsilon = 0.2;
  double tau = 0.2;
  int contrast_layer = 1;
  bool random_contrast_layer = false;
  // 0 contrasts the final representation; see XSimGclParams.
  int anchor_layer = 0;
  double keep_rate = 0.9;
  NoiseKind noise = NoiseKind::kSignedUniform;
  int max_epochs = 300;
  int patience = 10;
  std::uint64_t seed = 0;
  int eval_interval = 1;
  std::size_t top_k = 20;
  bool merge_validation = false;
  std::size_t uniformity_min_item_interactions = 200;
  std::size_t uniformity_users = 5000;
};

// Throws ConfigError on invalid values. Returns warnings for keys in
// `given_keys` that the chosen method ignores.
std::vector<std::string> validate_config(const TrainConfig& config,
                                         const std::set<std::string>& given_keys = {});

// Deterministic 64-bit seed derived from a base seed and a few stream ids.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

// One epoch of mini-batches: training pairs shuffled, cut into chunks of
// batch_size, one uniformly drawn unobserved negative per positive.
std::vector<Batch> sample_batches(const InteractionDataset& dataset, std::size_t batch_size,
                                  std::uint64_t seed, int epoch);

// Bias-corrected Adam that only touches rows with a nonzero gradient.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t rows, std::size_t cols, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  // Throws NumericalError on a non-finite gradient without touching params.
  void step(Matrix& params, const Matrix& grad);
  long long steps() const { return t_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long long t_ = 0;
  Matrix m_;
  Matrix v_;
};

// Owns the parameters and per-epoch graph augmentations of one model and
// computes method-specific losses and gradients.
class Trainer {
 public:
  Trainer(const TrainConfig& config, const InteractionDataset& dataset);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  // Rebuilds dropout augmentations for SGL-ED/ND/RW; no-op otherwise.
  void begin_epoch(int epoch);
  // Forward and backward pass for one batch; `noise_seed` drives all noise
  // and the random contrast layer, so identical seeds replay identically.
  JointResult compute(const Batch& batch, std::uint64_t noise_seed) const;
  void apply(const Matrix& grad);

  // Noise-free representation used for ranking.
  Matrix inference_embeddings() const;

  const Matrix& parameters() const { return e0_; }
  void set_parameters(Matrix e0);
  const SparseAdjacency& adjacency() const { return adj_; }
  double last_augmentation_seconds() const { return augmentation_seconds_; }
  // Contrast layer actually used for a batch with this noise seed.
  int contrast_layer_for(std::uint64_t noise_seed) const;

 private:
  TrainConfig config_;
  const InteractionDataset* dataset_;
  SparseAdjacency adj_;
  LayerGraphs plain_;
  std::vector<SparseAdjacency> augmented_;
  std::unique_ptr<LayerGraphs> view_a_;
  std::unique_ptr<LayerGraphs> view_b_;
  Matrix e0_;
  AdamOptimizer optimizer_;
  double augmentation_seconds_ = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  // Loss terms averaged over the epoch's batches.
  double rec_loss = 0.0;
  double cl_loss = 0.0;
  double reg_loss = 0.0;
  double total_loss = 0.0;
  std::optional<double> val_recall;
  std::optional<double> val_ndcg;
  std::optional<double> uniformity;
  double batch_ms = 0.0;
  double epoch_seconds = 0.0;
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
};

struct TrainResult {
  Matrix parameters;
  Matrix embeddings;
  TrainTrace trace;
};

using EpochObserver = std::function<void(const EpochRecord&)>;

// Epoch loop with validation-based early stopping. Returns the parameters
// of the best validation epoch (the last epoch when there is no validation
// split). Throws NumericalError on divergence.
TrainResult train(const TrainConfig& config, const InteractionDataset& dataset,
                  const EpochObserver& observer = {});

struct SweepGrid {
  enum class Kind { kLambdaEpsilon, kLayerPairs };
  Kind kind = Kind::kLambdaEpsilon;
  std::vector<double> lambdas;
  std::vector<double> epsilons;
};

struct SweepCell {
  double lambda = 0.0;
  double epsilon = 0.0;
  int anchor_layer = 0;
  int contrast_layer = 1;
  bool random_layer = false;

  std::string key() const;
};

// Cells in output order. Layer-pair grids enumerate the lower triangle
// (anchor a >= contrasted b, a = L meaning the final representation), then
// the random-layer mode.
std::vector<SweepCell> sweep_cells(const TrainConfig& config, const SweepGrid& grid);

struct SweepRow {
  SweepCell cell;
  bool ok = false;
  std::string error;
  int best_epoch = 0;
  double val_recall = 0.0;
  double val_ndcg = 0.0;
  double test_recall = 0.0;
  double test_ndcg = 0.0;
};

// Trains one model per cell; failing cells are recorded and skipped. Cells
// whose key is in `completed` are not run.
std::vector<SweepRow> sweep(const TrainConfig& config, const InteractionDataset& dataset,
                            const SweepGrid& grid, const std::set<std::string>& completed = {},
                            const std::function<void(const SweepRow&)>& on_row = {});

}  // namespace gclrec
