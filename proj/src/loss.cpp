#include "gclrec/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "gclrec/errors.hpp"

namespace gclrec {
namespace {

constexpr double kMinContrastNorm = 1e-12;

// log(1 + exp(-x)) without overflow.
double softplus_neg(double x) {
  return x > 0.0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Normalized copies of the selected rows of one view.
struct Pool {
  std::vector<std::size_t> nodes;
  Matrix z;
  std::vector<double> norms;
};

Pool gather_normalized(const Matrix& view, std::span<const std::size_t> nodes) {
  Pool pool;
  pool.nodes.assign(nodes.begin(), nodes.end());
  pool.z = Matrix(nodes.size(), view.cols());
  pool.norms.resize(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    auto src = view.row(nodes[k]);
    const double norm = std::sqrt(dot(src, src));
    pool.norms[k] = norm;
    auto dst = pool.z.row(k);
    for (std::size_t c = 0; c < src.size(); ++c) dst[c] = src[c] / norm;
  }
  return pool;
}

// Nodes whose rows are usable in every given view.
std::vector<std::size_t> contrastable(std::span<const std::size_t> nodes,
                                      std::initializer_list<const Matrix*> views) {
  std::vector<std::size_t> kept;
  kept.reserve(nodes.size());
  for (std::size_t node : nodes) {
    bool ok = true;
    for (const Matrix* v : views) {
      auto row = v->row(node);
      if (std::sqrt(dot(row, row)) < kMinContrastNorm) ok = false;
    }
    if (ok) {
      kept.push_back(node);
    } else {
      warn("node " + std::to_string(node) + " has a zero-norm row; dropped from contrast");
    }
  }
  return kept;
}

void check_tau(double tau) {
  if (!(tau > 0.0)) throw ConfigError("temperature must be positive");
}

// Row-wise softmax of logits in place; returns sum over rows of logsumexp.
double softmax_rows(Matrix& logits) {
  double total_lse = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
    total_lse += mx + std::log(sum);
  }
  return total_lse;
}

// Adds the gradient w.r.t. raw row e (with z = e / |e|) given dL/dz.
void chain_normalization(std::span<const double> z, double norm, std::span<const double> dz,
                         std::span<double> out) {
  const double proj = dot(z, dz);
  for (std::size_t c = 0; c < z.size(); ++c) out[c] += (dz[c] - z[c] * proj) / norm;
}

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajor>;
using ConstMatMap = Eigen::Map<const RowMajor>;

ConstMatMap view_of(const Matrix& m) {
  return ConstMatMap(m.values().data(), static_cast<Eigen::Index>(m.rows()),
                     static_cast<Eigen::Index>(m.cols()));
}

MatMap view_of(Matrix& m) {
  return MatMap(m.values().data(), static_cast<Eigen::Index>(m.rows()),
                static_cast<Eigen::Index>(m.cols()));
}

Matrix logits_of(const Matrix& za, const Matrix& zb, double tau) {
  Matrix logits(za.rows(), zb.rows());
  view_of(logits).noalias() = (view_of(za) * view_of(zb).transpose()) / tau;
  return logits;
}

}  // namespace

Batch make_batch(std::size_t num_users, std::vector<Triple> triples) {
  Batch batch;
  batch.num_users = num_users;
  batch.triples = std::move(triples);
  for (const auto& t : batch.triples) {
    batch.user_nodes.push_back(t.user);
    batch.item_nodes.push_back(num_users + t.pos);
    batch.item_nodes.push_back(num_users + t.neg);
  }
  for (auto* v : {&batch.user_nodes, &batch.item_nodes}) {
    std::sort(v->begin(), v->end());
    v->erase(std::unique(v->begin(), v->end()), v->end());
  }
  return batch;
}

double bpr_loss_and_grad(const Matrix& emb, const Batch& batch, Matrix* grad) {
  double loss = 0.0;
  for (const auto& t : batch.triples) {
    auto eu = emb.row(t.user);
    auto ei = emb.row(batch.item_node(t.pos));
    auto ej = emb.row(batch.item_node(t.neg));
    const double x = dot(eu, ei) - dot(eu, ej);
    loss += softplus_neg(x);
    if (grad == nullptr) continue;
    const double g = -sigmoid(-x);  // dloss/dx
    auto gu = grad->row(t.user);
    auto gi = grad->row(batch.item_node(t.pos));
    auto gj = grad->row(batch.item_node(t.neg));
    for (std::size_t c = 0; c < eu.size(); ++c) {
      gu[c] += g * (ei[c] - ej[c]);
      gi[c] += g * eu[c];
      gj[c] -= g * eu[c];
    }
  }
  return loss;
}

double infonce_loss_and_grad(const Matrix& view_a, const Matrix& view_b,
                             std::span<const std::size_t> nodes, double tau, Matrix* grad_a,
                             Matrix* grad_b) {
  check_tau(tau);
  if (!view_a.same_shape(view_b)) throw std::invalid_argument("infonce: view shapes differ");
  const auto kept = contrastable(nodes, {&view_a, &view_b});
  const std::size_t m = kept.size();
  if (m == 0) return 0.0;

  const Pool a = gather_normalized(view_a, kept);
  const Pool b = gather_normalized(view_b, kept);
  Matrix probs = logits_of(a.z, b.z, tau);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) loss -= probs(i, i);
  loss += softmax_rows(probs);
  if (grad_a == nullptr && grad_b == nullptr) return loss;

  // dL/dlogit_ij = p_ij - [i == j]; logits carry a 1/tau factor.
  for (std::size_t i = 0; i < m; ++i) probs(i, i) -= 1.0;
  const std::size_t d = view_a.cols();
  Matrix dza(m, d);
  Matrix dzb(m, d);
  view_of(dza).noalias() = (view_of(probs) * view_of(b.z)) / tau;
  view_of(dzb).noalias() = (view_of(probs).transpose() * view_of(a.z)) / tau;
  for (std::size_t k = 0; k < m; ++k) {
    if (grad_a != nullptr) chain_normalization(a.z.row(k), a.norms[k], dza.row(k), grad_a->row(kept[k]));
    if (grad_b != nullptr) chain_normalization(b.z.row(k), b.norms[k], dzb.row(k), grad_b->row(kept[k]));
  }
  return loss;
}

double sgl_wa_loss(const Matrix& view, std::span<const std::size_t> nodes, double tau) {
  return sgl_wa_loss_and_grad(view, nodes, tau, nullptr);
}

double sgl_wa_loss_and_grad(const Matrix& view, std::span<const std::size_t> nodes, double tau,
                            Matrix* grad) {
  check_tau(tau);
  const auto kept = contrastable(nodes, {&view});
  const std::size_t m = kept.size();
  if (m == 0) return 0.0;

  const Pool pool = gather_normalized(view, kept);
  Matrix probs = logits_of(pool.z, pool.z, tau);
  const double loss = softmax_rows(probs) - static_cast<double>(m) / tau;
  if (grad == nullptr) return loss;

  // The numerator is constant; each similarity z_i.z_j appears in row i and
  // in row j of the softmax.
  Matrix dz(m, view.cols());
  const RowMajor sym = view_of(probs) + view_of(probs).transpose();
  view_of(dz).noalias() = (sym * view_of(pool.z)) / tau;
  for (std::size_t k = 0; k < m; ++k) {
    chain_normalization(pool.z.row(k), pool.norms[k], dz.row(k), grad->row(kept[k]));
  }
  return loss;
}

double l2_reg_and_grad(const Matrix& e0, const Batch& batch, double coefficient, Matrix* grad) {
  double sum = 0.0;
  for (const auto* nodes : {&batch.user_nodes, &batch.item_nodes}) {
    for (std::size_t node : *nodes) {
      auto row = e0.row(node);
      sum += dot(row, row);
      if (grad != nullptr) axpy(2.0 * coefficient, row, grad->row(node));
    }
  }
  return coefficient * sum;
}

namespace {

void finish(JointResult& result, double lambda) {
  result.report.total = result.report.rec + lambda * result.report.cl + result.report.reg;
}

// Both pools: users against users, items against items.
double contrast_pools(const Matrix& view_a, const Matrix& view_b, const Batch& batch, double tau,
                      Matrix* grad_a, Matrix* grad_b) {
  return infonce_loss_and_grad(view_a, view_b, batch.user_nodes, tau, grad_a, grad_b) +
         infonce_loss_and_grad(view_a, view_b, batch.item_nodes, tau, grad_a, grad_b);
}

void scale(Matrix& m, double alpha) {
  for (double& v : m.values()) v *= alpha;
}

}  // namespace

JointResult joint_loss_lightgcn(const Matrix& e0, const LayerGraphs& graphs, const Batch& batch,
                                double reg) {
  const EmbeddingState state = propagate_plain(e0, graphs, Aggregation::kWithInput);
  Matrix grad_final(e0.rows(), e0.cols());
  JointResult result;
  result.report.rec = bpr_loss_and_grad(state.final, batch, &grad_final);
  result.grad = backpropagate(graphs, Aggregation::kWithInput, grad_final);
  result.report.reg = l2_reg_and_grad(e0, batch, reg, &result.grad);
  finish(result, 0.0);
  return result;
}

JointResult joint_loss_xsimgcl(const Matrix& e0, const EmbeddingState& perturbed,
                               const LayerGraphs& graphs, const Batch& batch,
                               const XSimGclParams& params) {
  const int num_layers = perturbed.num_layers();
  if (num_layers != graphs.num_layers()) {
    throw std::invalid_argument("xsimgcl: state and graphs disagree on layer count");
  }
  if (params.contrast_layer < 1 || params.contrast_layer > num_layers) {
    throw ConfigError("contrast layer " + std::to_string(params.contrast_layer) +
                      " outside [1, " + std::to_string(num_layers) + "]");
  }
  if (params.anchor_layer < 0 || params.anchor_layer > num_layers) {
    throw ConfigError("anchor layer " + std::to_string(params.anchor_layer) + " outside [0, " +
                      std::to_string(num_layers) + "]");
  }

  const std::size_t n = e0.rows();
  const std::size_t d = e0.cols();
  JointResult result;
  Matrix grad_final(n, d);
  result.report.rec = bpr_loss_and_grad(perturbed.final, batch, &grad_final);

  std::vector<Matrix> grad_layers(static_cast<std::size_t>(num_layers) + 1);
  if (params.lambda != 0.0) {
    const Matrix& anchor =
        params.anchor_layer == 0 ? perturbed.final : perturbed.layer(params.anchor_layer);
    const Matrix& other = perturbed.layer(params.contrast_layer);
    Matrix grad_anchor(n, d);
    Matrix grad_other(n, d);
    result.report.cl = contrast_pools(anchor, other, batch, params.tau, &grad_anchor, &grad_other);

    if (params.anchor_layer == 0) {
      add_scaled(grad_final, grad_anchor, params.lambda);
    } else {
      auto& slot = grad_layers[static_cast<std::size_t>(params.anchor_layer)];
      scale(grad_anchor, params.lambda);
      slot = std::move(grad_anchor);
    }
    auto& slot = grad_layers[static_cast<std::size_t>(params.contrast_layer)];
    scale(grad_other, params.lambda);
    if (slot.empty()) {
      slot = std::move(grad_other);
    } else {
      add_scaled(slot, grad_other, 1.0);
    }
  }

  result.grad = backpropagate(graphs, Aggregation::kSkipInput, grad_final, grad_layers);
  result.report.reg = l2_reg_and_grad(e0, batch, params.reg, &result.grad);
  finish(result, params.lambda);
  return result;
}

JointResult joint_loss_simgcl(const Matrix& e0, const LayerGraphs& graphs, const Batch& batch,
                              const SimGclParams& params, Rng& rng) {
  const std::size_t n = e0.rows();
  const std::size_t d = e0.cols();
  JointResult result;

  const EmbeddingState plain = propagate_plain(e0, graphs, Aggregation::kSkipInput);
  Matrix grad_plain(n, d);
  result.report.rec = bpr_loss_and_grad(plain.final, batch, &grad_plain);
  result.grad = backpropagate(graphs, Aggregation::kSkipInput, grad_plain);

  if (params.lambda != 0.0) {
    const EmbeddingState view_a = propagate_perturbed(e0, graphs, params.noise, rng);
    const EmbeddingState view_b = propagate_perturbed(e0, graphs, params.noise, rng);
    Matrix grad_a(n, d);
    Matrix grad_b(n, d);
    result.report.cl =
        contrast_pools(view_a.final, view_b.final, batch, params.tau, &grad_a, &grad_b);
    scale(grad_a, params.lambda);
    scale(grad_b, params.lambda);
    add_scaled(result.grad, backpropagate(graphs, Aggregation::kSkipInput, grad_a), 1.0);
    add_scaled(result.grad, backpropagate(graphs, Aggregation::kSkipInput, grad_b), 1.0);
  }

  result.report.reg = l2_reg_and_grad(e0, batch, params.reg, &result.grad);
  finish(result, params.lambda);
  return result;
}

JointResult joint_loss_sgl(const Matrix& e0, const LayerGraphs& plain, const LayerGraphs* view_a,
                           const LayerGraphs* view_b, const Batch& batch, const SglParams& params) {
  const std::size_t n = e0.rows();
  const std::size_t d = e0.cols();
  JointResult result;

  const EmbeddingState state = propagate_plain(e0, plain, Aggregation::kWithInput);
  Matrix grad_final(n, d);
  result.report.rec = bpr_loss_and_grad(state.final, batch, &grad_final);

  if (params.variant == SglVariant::kWithoutAugmentation) {
    if (params.lambda != 0.0) {
      Matrix grad_cl(n, d);
      result.report.cl = sgl_wa_loss_and_grad(state.final, batch.user_nodes, params.tau, &grad_cl) +
                         sgl_wa_loss_and_grad(state.final, batch.item_nodes, params.tau, &grad_cl);
      add_scaled(grad_final, grad_cl, params.lambda);
    }
    result.grad = backpropagate(plain, Aggregation::kWithInput, grad_final);
  } else {
    if (view_a == nullptr || view_b == nullptr) {
      throw std::invalid_argument("sgl: augmented graphs required for this variant");
    }
    result.grad = backpropagate(plain, Aggregation::kWithInput, grad_final);
    if (params.lambda != 0.0) {
      const EmbeddingState a = propagate_plain(e0, *view_a, Aggregation::kWithInput);
      const EmbeddingState b = propagate_plain(e0, *view_b, Aggregation::kWithInput);
      Matrix grad_a(n, d);
      Matrix grad_b(n, d);
      result.report.cl = contrast_pools(a.final, b.final, batch, params.tau, &grad_a, &grad_b);
      scale(grad_a, params.lambda);
      scale(grad_b, params.lambda);
      add_scaled(result.grad, backpropagate(*view_a, Aggregation::kWithInput, grad_a), 1.0);
      add_scaled(result.grad, backpropagate(*view_b, Aggregation::kWithInput, grad_b), 1.0);
    }
  }

  result.report.reg = l2_reg_and_grad(e0, batch, params.reg, &result.grad);
  finish(result, params.lambda);
  return result;
}

}  // namespace gclrec
