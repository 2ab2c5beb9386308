#include "gclrec/graph.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <random>
#include <string>

#include "gclrec/errors.hpp"
#include "gclrec/parallel.hpp"

namespace gclrec {
namespace {

std::atomic<unsigned> g_threads{1};

void check_keep_rate(double keep_rate) {
  if (!(keep_rate > 0.0 && keep_rate <= 1.0)) {
    throw ConfigError("keep rate must lie in (0, 1], got " + std::to_string(keep_rate));
  }
}

double inv_sqrt_degree(std::size_t degree) {
  return degree == 0 ? 0.0 : 1.0 / std::sqrt(static_cast<double>(degree));
}

}  // namespace

SparseAdjacency SparseAdjacency::from_edges(std::size_t num_users, std::size_t num_items,
                                            std::span<const Interaction> edges) {
  SparseAdjacency adj;
  adj.num_users_ = num_users;
  adj.num_items_ = num_items;
  const std::size_t n = num_users + num_items;

  adj.degrees_.assign(n, 0);
  for (const auto& e : edges) {
    if (e.user >= num_users || e.item >= num_items) {
      throw DataError("adjacency edge out of range");
    }
    ++adj.degrees_[e.user];
    ++adj.degrees_[num_users + e.item];
  }

  adj.row_ptr_.assign(n + 1, 0);
  for (std::size_t a = 0; a < n; ++a) adj.row_ptr_[a + 1] = adj.row_ptr_[a] + adj.degrees_[a];
  adj.col_idx_.resize(adj.row_ptr_[n]);
  std::vector<std::size_t> cursor(adj.row_ptr_.begin(), adj.row_ptr_.end() - 1);
  for (const auto& e : edges) {
    const std::size_t item_node = num_users + e.item;
    adj.col_idx_[cursor[e.user]++] = item_node;
    adj.col_idx_[cursor[item_node]++] = e.user;
  }

  std::vector<double> scale(n);
  for (std::size_t a = 0; a < n; ++a) scale[a] = inv_sqrt_degree(adj.degrees_[a]);

  adj.values_.resize(adj.col_idx_.size());
  for (std::size_t a = 0; a < n; ++a) {
    auto first = adj.col_idx_.begin() + static_cast<std::ptrdiff_t>(adj.row_ptr_[a]);
    auto last = adj.col_idx_.begin() + static_cast<std::ptrdiff_t>(adj.row_ptr_[a + 1]);
    std::sort(first, last);
    if (std::adjacent_find(first, last) != last) {
      throw DataError("duplicate edge at node " + std::to_string(a));
    }
    for (std::size_t k = adj.row_ptr_[a]; k < adj.row_ptr_[a + 1]; ++k) {
      adj.values_[k] = scale[a] * scale[adj.col_idx_[k]];
    }
  }
  return adj;
}

std::vector<Interaction> SparseAdjacency::edges() const {
  std::vector<Interaction> out;
  out.reserve(num_edges());
  for (std::size_t u = 0; u < num_users_; ++u) {
    for (std::size_t k = row_ptr_[u]; k < row_ptr_[u + 1]; ++k) {
      out.push_back({u, col_idx_[k] - num_users_});
    }
  }
  return out;
}

void SparseAdjacency::dump(std::ostream& out) const {
  for (std::size_t a = 0; a + 1 < row_ptr_.size(); ++a) {
    for (std::size_t k = row_ptr_[a]; k < row_ptr_[a + 1]; ++k) {
      out << a << '\t' << col_idx_[k] << '\t' << values_[k] << '\n';
    }
  }
}

SparseAdjacency build_adjacency(const InteractionDataset& dataset) {
  if (dataset.train().empty()) throw DataError("cannot build adjacency: train split is empty");
  return SparseAdjacency::from_edges(dataset.num_users(), dataset.num_items(), dataset.train());
}

SparseAdjacency edge_dropout(const SparseAdjacency& adj, double keep_rate, std::uint64_t seed) {
  check_keep_rate(keep_rate);
  auto edges = adj.edges();
  if (keep_rate < 1.0) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution keep(keep_rate);
    std::erase_if(edges, [&](const Interaction&) { return !keep(rng); });
  }
  return SparseAdjacency::from_edges(adj.num_users(), adj.num_items(), edges);
}

SparseAdjacency node_dropout(const SparseAdjacency& adj, double keep_rate, std::uint64_t seed) {
  check_keep_rate(keep_rate);
  auto edges = adj.edges();
  if (keep_rate < 1.0) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution keep(keep_rate);
    std::vector<char> kept(adj.num_nodes());
    for (auto& k : kept) k = keep(rng) ? 1 : 0;
    const std::size_t users = adj.num_users();
    std::erase_if(edges, [&](const Interaction& e) {
      return !kept[e.user] || !kept[users + e.item];
    });
  }
  return SparseAdjacency::from_edges(adj.num_users(), adj.num_items(), edges);
}

void multiply(const SparseAdjacency& adj, const Matrix& in, Matrix& out) {
  if (in.rows() != adj.num_nodes()) {
    throw std::invalid_argument("multiply: embedding rows (" + std::to_string(in.rows()) +
                                ") != adjacency nodes (" + std::to_string(adj.num_nodes()) + ")");
  }
  if (&out == &in) throw std::invalid_argument("multiply: output aliases input");
  if (!out.same_shape(in)) out = Matrix(in.rows(), in.cols());
  const auto row_ptr = adj.row_ptr();
  const auto col_idx = adj.col_idx();
  const auto values = adj.values();
  const std::size_t d = in.cols();
  parallel_for(in.rows(), g_threads.load(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      double* dst = out.row(r).data();
      std::fill(dst, dst + d, 0.0);
      for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
        const double w = values[k];
        const double* src = in.row(col_idx[k]).data();
        for (std::size_t c = 0; c < d; ++c) dst[c] += w * src[c];
      }
    }
  });
}

Matrix multiply(const SparseAdjacency& adj, const Matrix& in) {
  Matrix out(in.rows(), in.cols());
  multiply(adj, in, out);
  return out;
}

void set_num_threads(unsigned threads) { g_threads.store(std::max(threads, 1u)); }
unsigned num_threads() { return g_threads.load(); }

}  // namespace gclrec
