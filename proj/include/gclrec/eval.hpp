#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "gclrec/data.hpp"
#include "gclrec/matrix.hpp"
#include "gclrec/model.hpp"

namespace gclrec {

// Top-k items for `user` by e_u . e_i over all items, skipping the sorted
// `exclusions`. Ties go to the smaller item index.
std::vector<std::size_t> rank_items(const Matrix& emb, std::size_t num_users, std::size_t user,
                                    std::span<const std::size_t> exclusions, std::size_t k);

enum class EvalSplit { kValidation, kTest };

// Ranked lists for every user with at least one target item in the split.
// Validation ranking excludes train items; test ranking excludes train and
// validation items.
struct TopKLists {
  std::size_t k = 0;
  EvalSplit split = EvalSplit::kTest;
  std::vector<std::size_t> users;
  std::vector<std::vector<std::size_t>> items;
};

TopKLists compute_top_k(const InteractionDataset& dataset, const Matrix& emb, std::size_t k,
                        EvalSplit split = EvalSplit::kTest);

struct RankingMetrics {
  double recall = 0.0;
  double ndcg = 0.0;
  std::size_t num_users = 0;
};

RankingMetrics recall_ndcg(const InteractionDataset& dataset, const TopKLists& lists);
RankingMetrics recall_ndcg(const InteractionDataset& dataset, const Matrix& emb, std::size_t k,
                           EvalSplit split = EvalSplit::kTest);

struct GroupRecall {
  // Index g - 1 holds group g. Absent when no user has a target in g.
  std::array<std::optional<double>, kNumPopularityGroups> recall{};
  std::array<std::size_t, kNumPopularityGroups> hits{};
  std::size_t total_hits = 0;
};

GroupRecall group_recall(const InteractionDataset& dataset, const PopularityGroups& groups,
                         const TopKLists& lists);
GroupRecall group_recall(const InteractionDataset& dataset, const Matrix& emb,
                         const PopularityGroups& groups, std::size_t k);

struct UniformityOptions {
  // Above this many candidate pairs, pairs are drawn i.i.d. instead.
  std::size_t max_pairs = 1'000'000;
  std::uint64_t seed = 0;
};

// log of the mean of exp(-2 |z_u - z_v|^2) over pairs of L2-normalized
// rows. Pairs are all cross pairs between `first` and `second`.
double uniformity(const Matrix& emb, std::span<const std::size_t> first,
                  std::span<const std::size_t> second, const UniformityOptions& options = {});
// Pairs are all distinct unordered pairs within `nodes`.
double uniformity(const Matrix& emb, std::span<const std::size_t> nodes,
                  const UniformityOptions& options = {});

struct UniformitySample {
  std::vector<std::size_t> user_nodes;
  std::vector<std::size_t> item_nodes;
};

// Items with more than `min_item_interactions` training interactions, and
// up to `max_users` users drawn without replacement.
UniformitySample sample_uniformity_nodes(const InteractionDataset& dataset,
                                         std::size_t min_item_interactions = 200,
                                         std::size_t max_users = 5000, std::uint64_t seed = 0);

struct EvalReport {
  std::size_t k = 20;
  double recall_at_k = 0.0;
  double ndcg_at_k = 0.0;
  std::array<std::optional<double>, kNumPopularityGroups> per_group_recall{};
  std::optional<double> uniformity;
  std::size_t num_eval_users = 0;
};

EvalReport evaluate(const InteractionDataset& dataset, const Matrix& emb,
                    const PopularityGroups* groups, std::size_t k,
                    const UniformitySample* uniformity_sample = nullptr,
                    const UniformityOptions& options = {});

}  // namespace gclrec
