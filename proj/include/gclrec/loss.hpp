#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gclrec/matrix.hpp"
#include "gclrec/model.hpp"

namespace gclrec {

// (user, positive item, negative item) with item indices, not node ids.
struct Triple {
  std::size_t user = 0;
  std::size_t pos = 0;
  std::size_t neg = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

struct Batch {
  std::size_t num_users = 0;
  std::vector<Triple> triples;
  // Unique node ids touched by the batch, ascending.
  std::vector<std::size_t> user_nodes;
  std::vector<std::size_t> item_nodes;

  std::size_t item_node(std::size_t item) const { return num_users + item; }
};

Batch make_batch(std::size_t num_users, std::vector<Triple> triples);

struct LossReport {
  double rec = 0.0;
  double cl = 0.0;
  double reg = 0.0;
  double total = 0.0;
};

// BPR: sum over triples of -log sigmoid(e_u.e_i - e_u.e_j) on the given
// representations. Gradient rows are accumulated into *grad when non-null.
double bpr_loss_and_grad(const Matrix& emb, const Batch& batch, Matrix* grad);

// Two-view InfoNCE over `nodes` with in-batch negatives drawn from the same
// node list. Views are raw (un-normalized) rows; normalization and its
// Jacobian are handled here. Rows with norm below 1e-12 in either view are
// left out of the pool. Gradients are accumulated into *grad_a / *grad_b.
double infonce_loss_and_grad(const Matrix& view_a, const Matrix& view_b,
                             std::span<const std::size_t> nodes, double tau, Matrix* grad_a,
                             Matrix* grad_b);

// Contrastive loss without augmentation: the positive term is the constant
// exp(1/tau) and the denominator runs over the whole pool, i included.
double sgl_wa_loss(const Matrix& view, std::span<const std::size_t> nodes, double tau);
double sgl_wa_loss_and_grad(const Matrix& view, std::span<const std::size_t> nodes, double tau,
                            Matrix* grad);

// coefficient * sum of squared norms of E0 rows for the batch's unique users
// and items.
double l2_reg_and_grad(const Matrix& e0, const Batch& batch, double coefficient, Matrix* grad);

// Loss value plus gradient with respect to E0.
struct JointResult {
  LossReport report;
  Matrix grad;
};

// Plain LightGCN: BPR on with-input aggregation plus L2.
JointResult joint_loss_lightgcn(const Matrix& e0, const LayerGraphs& graphs, const Batch& batch,
                                double reg);

struct XSimGclParams {
  double lambda = 0.2;
  double tau = 0.2;
  double reg = 1e-4;
  // Layer l* whose output is contrasted, in [1, L].
  int contrast_layer = 1;
  // 0 contrasts the aggregated final representation (the standard model);
  // a value in [1, L] contrasts that layer's output instead.
  int anchor_layer = 0;
};

// Single perturbed forward pass: BPR on the perturbed final rows, InfoNCE
// between the final rows and layer l*, users and items pooled separately.
JointResult joint_loss_xsimgcl(const Matrix& e0, const EmbeddingState& perturbed,
                               const LayerGraphs& graphs, const Batch& batch,
                               const XSimGclParams& params);

struct SimGclParams {
  double lambda = 0.5;
  double tau = 0.2;
  double reg = 1e-4;
  NoiseSpec noise{0.1, NoiseKind::kSignedUniform};
};

// Three passes: plain skip-input encoder for BPR and two independently
// perturbed encoders for InfoNCE. Noise is drawn from rng, pass one first.
JointResult joint_loss_simgcl(const Matrix& e0, const LayerGraphs& graphs, const Batch& batch,
                              const SimGclParams& params, Rng& rng);

enum class SglVariant { kEdgeDropout, kNodeDropout, kRandomWalk, kWithoutAugmentation };

struct SglParams {
  double lambda = 0.1;
  double tau = 0.2;
  double reg = 1e-4;
  SglVariant variant = SglVariant::kEdgeDropout;
};

// BPR on the plain with-input encoder; InfoNCE between two augmented
// encoders (view_a, view_b), or the closed-form WA loss on the plain
// encoder when the variant is kWithoutAugmentation (views may be null).
JointResult joint_loss_sgl(const Matrix& e0, const LayerGraphs& plain, const LayerGraphs* view_a,
                           const LayerGraphs* view_b, const Batch& batch, const SglParams& params);

}  // namespace gclrec
