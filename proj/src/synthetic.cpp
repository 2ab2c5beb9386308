#include "gclrec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "gclrec/errors.hpp"

namespace gclrec {
namespace {

std::vector<std::string> tokens(char prefix, std::size_t n) {
  std::vector<std::string> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = prefix + std::to_string(k);
  return out;
}

}  // namespace

RawInteractions generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.num_users == 0 || spec.num_items == 0 || spec.clusters == 0 || spec.latent_dim == 0) {
    throw ConfigError("synthetic spec needs positive sizes");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_cluster(0, spec.clusters - 1);

  const std::size_t k = spec.latent_dim;
  std::vector<std::vector<double>> centers(spec.clusters, std::vector<double>(k));
  for (auto& c : centers) {
    double norm = 0.0;
    for (double& v : c) {
      v = normal(rng);
      norm += v * v;
    }
    for (double& v : c) v /= std::sqrt(norm);
  }
  auto latent = [&](std::size_t cluster) {
    std::vector<double> x(centers[cluster]);
    for (double& v : x) v += spec.cluster_spread * normal(rng) / std::sqrt(static_cast<double>(k));
    return x;
  };

  std::vector<std::vector<double>> items(spec.num_items);
  for (auto& it : items) it = latent(pick_cluster(rng));
  std::vector<std::size_t> rank(spec.num_items);
  std::iota(rank.begin(), rank.end(), 1);
  std::shuffle(rank.begin(), rank.end(), rng);
  std::vector<double> log_pop(spec.num_items);
  for (std::size_t i = 0; i < spec.num_items; ++i) {
    log_pop[i] = -spec.popularity_exponent * std::log(static_cast<double>(rank[i]));
  }

  std::geometric_distribution<std::size_t> extra(
      1.0 / (1.0 + std::max(spec.mean_extra_interactions, 0.0)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  RawInteractions raw;
  raw.user_tokens = tokens('u', spec.num_users);
  raw.item_tokens = tokens('i', spec.num_items);
  std::vector<std::pair<double, std::size_t>> keys(spec.num_items);
  for (std::size_t u = 0; u < spec.num_users; ++u) {
    const auto pref = latent(pick_cluster(rng));
    const std::size_t count =
        std::min(spec.num_items - 1, spec.min_interactions + extra(rng));
    // Weighted sampling without replacement: keep the largest log(U)/w keys.
    for (std::size_t i = 0; i < spec.num_items; ++i) {
      double score = 0.0;
      for (std::size_t c = 0; c < k; ++c) score += pref[c] * items[i][c];
      const double log_w = log_pop[i] + spec.affinity * score;
      keys[i] = {std::log(std::max(unit(rng), 1e-300)) * std::exp(-log_w), i};
    }
    std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(count), keys.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; r < count; ++r) raw.pairs.push_back({u, keys[r].second});
  }
  return raw;
}

RawInteractions random_bipartite(std::size_t num_users, std::size_t num_items,
                                 std::size_t num_edges, std::uint64_t seed) {
  if (num_edges > num_users * num_items) throw ConfigError("too many edges requested");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> user(0, num_users - 1);
  std::uniform_int_distribution<std::size_t> item(0, num_items - 1);
  RawInteractions raw;
  raw.user_tokens = tokens('u', num_users);
  raw.item_tokens = tokens('i', num_items);
  std::unordered_set<std::size_t> seen;
  // Every user gets one edge first so no user row is empty.
  for (std::size_t u = 0; u < num_users && raw.pairs.size() < num_edges; ++u) {
    const std::size_t i = item(rng);
    seen.insert(u * num_items + i);
    raw.pairs.push_back({u, i});
  }
  while (raw.pairs.size() < num_edges) {
    const std::size_t u = user(rng);
    const std::size_t i = item(rng);
    if (seen.insert(u * num_items + i).second) raw.pairs.push_back({u, i});
  }
  return raw;
}

}  // namespace gclrec
