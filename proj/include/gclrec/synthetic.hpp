#pragma once

#include <cstddef>
#include <cstdint>

#include "gclrec/data.hpp"

namespace gclrec {

// Clustered latent-factor generator for implicit feedback with a long-tail
// item popularity. Defaults are sized like MovieLens-100k.
struct SyntheticSpec {
  std::size_t num_users = 943;
  std::size_t num_items = 1682;
  std::size_t clusters = 12;
  std::size_t latent_dim = 16;
  std::size_t min_interactions = 20;
  double mean_extra_interactions = 80.0;
  // Item weight ~ rank^-exponent before affinity is applied.
  double popularity_exponent = 0.8;
  // Scale of the user-item affinity term in the sampling logit.
  double affinity = 2.5;
  double cluster_spread = 0.6;
};

RawInteractions generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Uniform random bipartite graph with exactly `num_edges` distinct edges.
RawInteractions random_bipartite(std::size_t num_users, std::size_t num_items,
                                 std::size_t num_edges, std::uint64_t seed);

}  // namespace gclrec
