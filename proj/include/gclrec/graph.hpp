#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "gclrec/data.hpp"
#include "gclrec/matrix.hpp"

namespace gclrec {

// Symmetric, degree-normalized adjacency of the user-item bipartite graph in
// row-compressed form. Node u < num_users is user u; node num_users + i is
// item i. Entry (a, b) = 1 / sqrt(deg(a) * deg(b)); columns within a row are
// strictly ascending.
class SparseAdjacency {
 public:
  SparseAdjacency() = default;

  // Builds the normalized adjacency from undirected user-item edges.
  // Degrees are taken from `edges` themselves.
  static SparseAdjacency from_edges(std::size_t num_users, std::size_t num_items,
                                    std::span<const Interaction> edges);

  std::size_t num_users() const { return num_users_; }
  std::size_t num_items() const { return num_items_; }
  std::size_t num_nodes() const { return num_users_ + num_items_; }
  std::size_t nonzeros() const { return col_idx_.size(); }
  std::size_t num_edges() const { return col_idx_.size() / 2; }

  std::span<const std::size_t> row_ptr() const { return row_ptr_; }
  std::span<const std::size_t> col_idx() const { return col_idx_; }
  std::span<const double> values() const { return values_; }
  std::span<const std::size_t> degrees() const { return degrees_; }

  // Undirected edges, ordered by user then item.
  std::vector<Interaction> edges() const;

  // Coordinate-list dump: "row<TAB>col<TAB>value" per stored entry.
  void dump(std::ostream& out) const;

 private:
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::vector<std::size_t> row_ptr_{0};
  std::vector<std::size_t> col_idx_;
  std::vector<double> values_;
  std::vector<std::size_t> degrees_;
};

SparseAdjacency build_adjacency(const InteractionDataset& dataset);

// Keeps each undirected edge with probability keep_rate; the kept graph is
// renormalized with its own degrees.
SparseAdjacency edge_dropout(const SparseAdjacency& adj, double keep_rate, std::uint64_t seed);

// Drops each node with probability 1 - keep_rate together with its edges.
SparseAdjacency node_dropout(const SparseAdjacency& adj, double keep_rate, std::uint64_t seed);

// out = adj * in. Rows are summed in ascending column order, so results are
// reproducible regardless of thread count.
void multiply(const SparseAdjacency& adj, const Matrix& in, Matrix& out);
Matrix multiply(const SparseAdjacency& adj, const Matrix& in);

// Thread count used by multiply and full-ranking evaluation. Defaults to 1.
void set_num_threads(unsigned threads);
unsigned num_threads();

}  // namespace gclrec
