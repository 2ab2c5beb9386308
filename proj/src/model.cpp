#include "gclrec/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "gclrec/errors.hpp"

namespace gclrec {

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "signed-uniform" || name == "uniform") return NoiseKind::kSignedUniform;
  if (name == "positive-uniform") return NoiseKind::kPositiveUniform;
  if (name == "gaussian") return NoiseKind::kGaussian;
  if (name == "none") return NoiseKind::kNone;
  throw ConfigError("unknown noise kind '" + name + "'");
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kNone: return "none";
    case NoiseKind::kSignedUniform: return "signed-uniform";
    case NoiseKind::kPositiveUniform: return "positive-uniform";
    case NoiseKind::kGaussian: return "gaussian";
  }
  return "unknown";
}

LayerGraphs::LayerGraphs(const SparseAdjacency& adj, int num_layers) {
  if (num_layers < 1) throw ConfigError("number of layers must be at least 1");
  graphs_.assign(static_cast<std::size_t>(num_layers), &adj);
}

LayerGraphs::LayerGraphs(std::vector<const SparseAdjacency*> per_layer)
    : graphs_(std::move(per_layer)) {
  if (graphs_.empty()) throw ConfigError("number of layers must be at least 1");
  for (const auto* g : graphs_) {
    if (g == nullptr || g->num_nodes() != graphs_.front()->num_nodes()) {
      throw std::invalid_argument("per-layer graphs must share one node set");
    }
  }
}

Matrix init_embeddings(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n == 0 || d == 0) throw ConfigError("embedding table needs n > 0 and d > 0");
  const double bound = std::sqrt(6.0 / static_cast<double>(n + d));
  Rng rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix table(n, d);
  for (double& v : table.values()) v = dist(rng);
  return table;
}

void sample_noise(std::span<const double> anchor, const NoiseSpec& spec, Rng& rng,
                  std::span<double> out) {
  if (spec.epsilon < 0.0) throw ConfigError("noise radius must be non-negative");
  if (spec.kind == NoiseKind::kNone || spec.epsilon == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::normal_distribution<double> gaussian(0.0, 1.0);
  double norm_sq = 0.0;
  // A draw of exactly zero norm has probability zero; retry if it happens.
  while (norm_sq == 0.0) {
    for (std::size_t k = 0; k < out.size(); ++k) {
      double x = spec.kind == NoiseKind::kGaussian ? gaussian(rng) : uniform(rng);
      if (spec.kind == NoiseKind::kSignedUniform && anchor[k] < 0.0) x = -x;
      out[k] = x;
    }
    norm_sq = dot(out, out);
  }
  const double scale = spec.epsilon / std::sqrt(norm_sq);
  for (double& v : out) v *= scale;
}

namespace {

double layer_weight(Aggregation aggregation, int num_layers) {
  return aggregation == Aggregation::kWithInput ? 1.0 / (1.0 + num_layers)
                                                : 1.0 / static_cast<double>(num_layers);
}

void check_rows(const Matrix& e0, const LayerGraphs& graphs) {
  if (e0.rows() != graphs.num_nodes()) {
    throw std::invalid_argument("embedding table has " + std::to_string(e0.rows()) +
                                " rows, graph has " + std::to_string(graphs.num_nodes()) +
                                " nodes");
  }
}

EmbeddingState propagate(const Matrix& e0, const LayerGraphs& graphs, Aggregation aggregation,
                         const NoiseSpec* noise, Rng* rng) {
  check_rows(e0, graphs);
  const int num_layers = graphs.num_layers();
  const double w = layer_weight(aggregation, num_layers);

  EmbeddingState state;
  state.aggregation = aggregation;
  state.layers.reserve(static_cast<std::size_t>(num_layers));
  state.final = Matrix(e0.rows(), e0.cols());
  if (aggregation == Aggregation::kWithInput) add_scaled(state.final, e0, w);

  std::vector<double> delta(e0.cols());
  const Matrix* previous = &e0;
  for (int l = 1; l <= num_layers; ++l) {
    Matrix out = multiply(graphs.at(l), *previous);
    if (noise != nullptr) {
      for (std::size_t r = 0; r < out.rows(); ++r) {
        auto row = out.row(r);
        sample_noise(row, *noise, *rng, delta);
        axpy(1.0, delta, row);
      }
    }
    add_scaled(state.final, out, w);
    state.layers.push_back(std::move(out));
    previous = &state.layers.back();
  }
  return state;
}

}  // namespace

EmbeddingState propagate_plain(const Matrix& e0, const LayerGraphs& graphs,
                               Aggregation aggregation) {
  return propagate(e0, graphs, aggregation, nullptr, nullptr);
}

EmbeddingState propagate_plain(const Matrix& e0, const SparseAdjacency& adj, int num_layers,
                               Aggregation aggregation) {
  return propagate_plain(e0, LayerGraphs(adj, num_layers), aggregation);
}

EmbeddingState propagate_perturbed(const Matrix& e0, const LayerGraphs& graphs,
                                   const NoiseSpec& spec, Rng& rng) {
  return propagate(e0, graphs, Aggregation::kSkipInput, &spec, &rng);
}

EmbeddingState propagate_perturbed(const Matrix& e0, const SparseAdjacency& adj, int num_layers,
                                   const NoiseSpec& spec, Rng& rng) {
  return propagate_perturbed(e0, LayerGraphs(adj, num_layers), spec, rng);
}

Matrix backpropagate(const LayerGraphs& graphs, Aggregation aggregation,
                     const Matrix& grad_final, const std::vector<Matrix>& grad_layers) {
  const int num_layers = graphs.num_layers();
  if (grad_final.rows() != graphs.num_nodes()) {
    throw std::invalid_argument("backpropagate: gradient rows do not match graph nodes");
  }
  if (!grad_layers.empty() && grad_layers.size() != static_cast<std::size_t>(num_layers) + 1) {
    throw std::invalid_argument("backpropagate: expected L + 1 layer gradients");
  }
  const double w = layer_weight(aggregation, num_layers);
  auto add_direct = [&](Matrix& g, int l) {
    if (grad_layers.empty()) return;
    const Matrix& direct = grad_layers[static_cast<std::size_t>(l)];
    if (!direct.empty()) add_scaled(g, direct, 1.0);
  };

  // Gradient flowing into layer L's output.
  Matrix upstream(grad_final.rows(), grad_final.cols());
  add_scaled(upstream, grad_final, w);
  add_direct(upstream, num_layers);

  Matrix below;
  for (int l = num_layers; l >= 1; --l) {
    multiply(graphs.at(l), upstream, below);
    if (l > 1 || aggregation == Aggregation::kWithInput) add_scaled(below, grad_final, w);
    add_direct(below, l - 1);
    std::swap(upstream, below);
  }
  return upstream;
}

NormalizedRows l2_normalize(const Matrix& rows) {
  NormalizedRows out{rows, {}};
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    auto row = out.rows.row(r);
    const double norm = std::sqrt(dot(row, row));
    if (norm == 0.0) {
      out.zero_rows.push_back(r);
      continue;
    }
    for (double& v : row) v /= norm;
  }
  return out;
}

void write_embeddings_text(std::ostream& out, const Matrix& rows,
                           std::span<const std::string> tokens) {
  if (tokens.size() != rows.rows()) {
    throw DataError("embedding export: " + std::to_string(tokens.size()) + " tokens for " +
                    std::to_string(rows.rows()) + " rows");
  }
  out << std::setprecision(17);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    out << tokens[r] << '\t';
    auto row = rows.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? " " : "") << row[c];
    out << '\n';
  }
}

namespace {
constexpr std::uint32_t kEndianTag = 0x01020304u;

std::uint32_t byteswap(std::uint32_t v) { return __builtin_bswap32(v); }
std::uint64_t byteswap(std::uint64_t v) { return __builtin_bswap64(v); }
}  // namespace

void write_embeddings_binary(const std::filesystem::path& path, const Matrix& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const std::uint64_t n = rows.rows();
  const std::uint64_t d = rows.cols();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(reinterpret_cast<const char*>(&d), sizeof d);
  out.write(reinterpret_cast<const char*>(&kEndianTag), sizeof kEndianTag);
  auto values = rows.values();
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw DataError("failed writing " + path.string());
}

Matrix read_embeddings_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::uint64_t n = 0;
  std::uint64_t d = 0;
  std::uint32_t tag = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  in.read(reinterpret_cast<char*>(&d), sizeof d);
  in.read(reinterpret_cast<char*>(&tag), sizeof tag);
  if (!in) throw DataError(path.string() + ": truncated header");
  const bool swapped = tag == byteswap(kEndianTag);
  if (!swapped && tag != kEndianTag) throw DataError(path.string() + ": bad endianness tag");
  if (swapped) {
    n = byteswap(n);
    d = byteswap(d);
  }
  if (n == 0 || d == 0 || n > (1ULL << 32) || d > (1ULL << 20)) {
    throw DataError(path.string() + ": implausible shape");
  }
  Matrix rows(n, d);
  auto values = rows.values();
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!in) throw DataError(path.string() + ": truncated payload");
  if (swapped) {
    for (double& v : values) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      bits = byteswap(bits);
      std::memcpy(&v, &bits, sizeof bits);
    }
  }
  return rows;
}

}  // namespace gclrec
