#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gclrec/graph.hpp"
#include "gclrec/matrix.hpp"

namespace gclrec {

using Rng = std::mt19937_64;

enum class NoiseKind { kNone, kSignedUniform, kPositiveUniform, kGaussian };

struct NoiseSpec {
  double epsilon = 0.0;
  NoiseKind kind = NoiseKind::kSignedUniform;
};

NoiseKind parse_noise_kind(const std::string& name);
std::string to_string(NoiseKind kind);

// How the final representation is formed from the layer outputs.
//   kWithInput: (E0 + H1 + ... + HL) / (1 + L)    -- LightGCN / SGL
//   kSkipInput: (H1 + ... + HL) / L               -- SimGCL / XSimGCL
enum class Aggregation { kWithInput, kSkipInput };

// Output of one forward pass. layers[l - 1] holds the output of layer l
// (after its noise, if any); the input table E0 is owned by the caller.
struct EmbeddingState {
  std::vector<Matrix> layers;
  Matrix final;
  Aggregation aggregation = Aggregation::kWithInput;

  int num_layers() const { return static_cast<int>(layers.size()); }
  const Matrix& layer(int l) const { return layers.at(static_cast<std::size_t>(l - 1)); }
};

// One adjacency per propagation layer. A single shared adjacency is the
// common case; per-layer dropout graphs give the random-walk augmentation.
class LayerGraphs {
 public:
  LayerGraphs(const SparseAdjacency& adj, int num_layers);
  explicit LayerGraphs(std::vector<const SparseAdjacency*> per_layer);

  int num_layers() const { return static_cast<int>(graphs_.size()); }
  const SparseAdjacency& at(int layer) const { return *graphs_.at(static_cast<std::size_t>(layer - 1)); }
  std::size_t num_nodes() const { return graphs_.front()->num_nodes(); }

 private:
  std::vector<const SparseAdjacency*> graphs_;
};

// Xavier-uniform table: entries ~ U(-b, b), b = sqrt(6 / (n + d)).
Matrix init_embeddings(std::size_t n, std::size_t d, std::uint64_t seed);

// Writes a radius-epsilon noise vector into `out`. Signed-uniform noise
// lies in the anchor's hyperoctant; zero anchor components count as +1.
void sample_noise(std::span<const double> anchor, const NoiseSpec& spec, Rng& rng,
                  std::span<double> out);

EmbeddingState propagate_plain(const Matrix& e0, const LayerGraphs& graphs,
                               Aggregation aggregation = Aggregation::kWithInput);
EmbeddingState propagate_plain(const Matrix& e0, const SparseAdjacency& adj, int num_layers,
                               Aggregation aggregation = Aggregation::kWithInput);

// H_l = A H_{l-1} + Delta_l with one fresh noise vector per node per layer,
// anchored at that node's pre-noise output. Always skip-input aggregation.
EmbeddingState propagate_perturbed(const Matrix& e0, const LayerGraphs& graphs,
                                   const NoiseSpec& spec, Rng& rng);
EmbeddingState propagate_perturbed(const Matrix& e0, const SparseAdjacency& adj, int num_layers,
                                   const NoiseSpec& spec, Rng& rng);

// Reverse-mode pass through propagation. grad_final is dL/d(final);
// grad_layers, when non-empty, holds L + 1 matrices where entry l is a
// direct gradient on layer l's output (entry 0 targets E0). Empty matrices
// stand for zero. Returns dL/dE0. Noise terms carry no parameter gradient,
// and A is symmetric, so the transpose product reuses multiply.
Matrix backpropagate(const LayerGraphs& graphs, Aggregation aggregation,
                     const Matrix& grad_final, const std::vector<Matrix>& grad_layers = {});

struct NormalizedRows {
  Matrix rows;
  // Indices of rows whose norm was zero; those rows stay zero.
  std::vector<std::size_t> zero_rows;
};

NormalizedRows l2_normalize(const Matrix& rows);

// Text export: "token<TAB>v1 ... vd" per row.
void write_embeddings_text(std::ostream& out, const Matrix& rows,
                           std::span<const std::string> tokens);

// Binary export: u64 rows, u64 cols, u32 endianness tag 0x01020304, then
// row-major doubles, all in the writer's byte order.
void write_embeddings_binary(const std::filesystem::path& path, const Matrix& rows);
Matrix read_embeddings_binary(const std::filesystem::path& path);

}  // namespace gclrec
