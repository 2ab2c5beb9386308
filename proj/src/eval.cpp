#include "gclrec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gclrec/errors.hpp"
#include "gclrec/parallel.hpp"

namespace gclrec {

std::vector<std::size_t> rank_items(const Matrix& emb, std::size_t num_users, std::size_t user,
                                    std::span<const std::size_t> exclusions, std::size_t k) {
  const std::size_t num_items = emb.rows() - num_users;
  auto eu = emb.row(user);
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(num_items);
  auto excl = exclusions.begin();
  for (std::size_t i = 0; i < num_items; ++i) {
    while (excl != exclusions.end() && *excl < i) ++excl;
    if (excl != exclusions.end() && *excl == i) continue;
    scored.emplace_back(dot(eu, emb.row(num_users + i)), i);
  }
  const std::size_t top = std::min(k, scored.size());
  auto better = [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(top),
                    scored.end(), better);
  std::vector<std::size_t> out(top);
  for (std::size_t r = 0; r < top; ++r) out[r] = scored[r].second;
  return out;
}

namespace {

std::span<const std::size_t> targets_of(const InteractionDataset& dataset, EvalSplit split,
                                        std::size_t u) {
  return split == EvalSplit::kTest ? dataset.test_items(u) : dataset.validation_items(u);
}

std::vector<std::size_t> exclusions_of(const InteractionDataset& dataset, EvalSplit split,
                                       std::size_t u) {
  auto train = dataset.train_items(u);
  std::vector<std::size_t> out(train.begin(), train.end());
  if (split == EvalSplit::kTest) {
    auto valid = dataset.validation_items(u);
    std::vector<std::size_t> merged;
    merged.reserve(out.size() + valid.size());
    std::merge(out.begin(), out.end(), valid.begin(), valid.end(), std::back_inserter(merged));
    out = std::move(merged);
  }
  return out;
}

bool contains(std::span<const std::size_t> sorted, std::size_t v) {
  return std::binary_search(sorted.begin(), sorted.end(), v);
}

}  // namespace

TopKLists compute_top_k(const InteractionDataset& dataset, const Matrix& emb, std::size_t k,
                        EvalSplit split) {
  if (emb.rows() != dataset.num_nodes()) {
    throw DataError("embedding rows (" + std::to_string(emb.rows()) + ") != dataset nodes (" +
                    std::to_string(dataset.num_nodes()) + ")");
  }
  TopKLists lists;
  lists.k = k;
  lists.split = split;
  for (std::size_t u = 0; u < dataset.num_users(); ++u) {
    if (!targets_of(dataset, split, u).empty()) lists.users.push_back(u);
  }
  lists.items.resize(lists.users.size());
  parallel_for(lists.users.size(), num_threads(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      const std::size_t u = lists.users[r];
      lists.items[r] = rank_items(emb, dataset.num_users(), u, exclusions_of(dataset, split, u), k);
    }
  });
  return lists;
}

RankingMetrics recall_ndcg(const InteractionDataset& dataset, const TopKLists& lists) {
  RankingMetrics m;
  for (std::size_t r = 0; r < lists.users.size(); ++r) {
    auto targets = targets_of(dataset, lists.split, lists.users[r]);
    const auto& ranked = lists.items[r];
    std::size_t hits = 0;
    double dcg = 0.0;
    for (std::size_t pos = 0; pos < ranked.size(); ++pos) {
      if (contains(targets, ranked[pos])) {
        ++hits;
        dcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
      }
    }
    double idcg = 0.0;
    const std::size_t ideal = std::min(targets.size(), lists.k);
    for (std::size_t pos = 0; pos < ideal; ++pos) idcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
    m.recall += static_cast<double>(hits) / static_cast<double>(targets.size());
    m.ndcg += idcg > 0.0 ? dcg / idcg : 0.0;
  }
  m.num_users = lists.users.size();
  if (m.num_users > 0) {
    m.recall /= static_cast<double>(m.num_users);
    m.ndcg /= static_cast<double>(m.num_users);
  }
  return m;
}

RankingMetrics recall_ndcg(const InteractionDataset& dataset, const Matrix& emb, std::size_t k,
                           EvalSplit split) {
  return recall_ndcg(dataset, compute_top_k(dataset, emb, k, split));
}

GroupRecall group_recall(const InteractionDataset& dataset, const PopularityGroups& groups,
                         const TopKLists& lists) {
  GroupRecall out;
  std::array<double, kNumPopularityGroups> sums{};
  std::array<std::size_t, kNumPopularityGroups> users{};
  for (std::size_t r = 0; r < lists.users.size(); ++r) {
    auto targets = targets_of(dataset, lists.split, lists.users[r]);
    std::array<std::size_t, kNumPopularityGroups> in_group{};
    for (std::size_t item : targets) ++in_group[static_cast<std::size_t>(groups.group_of_item[item] - 1)];
    std::array<std::size_t, kNumPopularityGroups> hit{};
    for (std::size_t item : lists.items[r]) {
      if (contains(targets, item)) ++hit[static_cast<std::size_t>(groups.group_of_item[item] - 1)];
    }
    for (std::size_t g = 0; g < kNumPopularityGroups; ++g) {
      out.hits[g] += hit[g];
      out.total_hits += hit[g];
      if (in_group[g] == 0) continue;
      sums[g] += static_cast<double>(hit[g]) / static_cast<double>(in_group[g]);
      ++users[g];
    }
  }
  for (std::size_t g = 0; g < kNumPopularityGroups; ++g) {
    if (users[g] > 0) out.recall[g] = sums[g] / static_cast<double>(users[g]);
  }
  return out;
}

GroupRecall group_recall(const InteractionDataset& dataset, const Matrix& emb,
                         const PopularityGroups& groups, std::size_t k) {
  return group_recall(dataset, groups, compute_top_k(dataset, emb, k, EvalSplit::kTest));
}

namespace {

// Normalized copies of the listed rows; zero rows are dropped.
std::vector<std::vector<double>> normalized_rows(const Matrix& emb,
                                                 std::span<const std::size_t> nodes) {
  std::vector<std::vector<double>> out;
  out.reserve(nodes.size());
  for (std::size_t node : nodes) {
    auto row = emb.row(node);
    const double norm = std::sqrt(dot(row, row));
    if (norm == 0.0) continue;
    std::vector<double> z(row.begin(), row.end());
    for (double& v : z) v /= norm;
    out.push_back(std::move(z));
  }
  return out;
}

double potential(const std::vector<double>& a, const std::vector<double>& b) {
  double dist_sq = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    const double diff = a[c] - b[c];
    dist_sq += diff * diff;
  }
  return std::exp(-2.0 * dist_sq);
}

}  // namespace

double uniformity(const Matrix& emb, std::span<const std::size_t> first,
                  std::span<const std::size_t> second, const UniformityOptions& options) {
  const auto a = normalized_rows(emb, first);
  const auto b = normalized_rows(emb, second);
  if (a.empty() || b.empty() || a.size() + b.size() < 2) {
    throw DataError("uniformity needs at least one valid row on each side");
  }
  double sum = 0.0;
  std::size_t count = 0;
  if (a.size() * b.size() <= options.max_pairs) {
    for (const auto& x : a) {
      for (const auto& y : b) sum += potential(x, y);
    }
    count = a.size() * b.size();
  } else {
    Rng rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick_a(0, a.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_b(0, b.size() - 1);
    for (; count < options.max_pairs; ++count) sum += potential(a[pick_a(rng)], b[pick_b(rng)]);
  }
  return std::log(sum / static_cast<double>(count));
}

double uniformity(const Matrix& emb, std::span<const std::size_t> nodes,
                  const UniformityOptions& options) {
  const auto z = normalized_rows(emb, nodes);
  const std::size_t m = z.size();
  if (m < 2) throw DataError("uniformity needs at least two valid rows");
  double sum = 0.0;
  std::size_t count = 0;
  if (m * (m - 1) / 2 <= options.max_pairs) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) sum += potential(z[i], z[j]);
    }
    count = m * (m - 1) / 2;
  } else {
    Rng rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick(0, m - 1);
    while (count < options.max_pairs) {
      const std::size_t i = pick(rng);
      const std::size_t j = pick(rng);
      if (i == j) continue;
      sum += potential(z[i], z[j]);
      ++count;
    }
  }
  return std::log(sum / static_cast<double>(count));
}

UniformitySample sample_uniformity_nodes(const InteractionDataset& dataset,
                                         std::size_t min_item_interactions, std::size_t max_users,
                                         std::uint64_t seed) {
  UniformitySample sample;
  const auto& popularity = dataset.item_popularity();
  for (std::size_t i = 0; i < dataset.num_items(); ++i) {
    if (popularity[i] > min_item_interactions) sample.item_nodes.push_back(dataset.num_users() + i);
  }
  std::vector<std::size_t> users(dataset.num_users());
  std::iota(users.begin(), users.end(), 0);
  if (users.size() > max_users) {
    Rng rng(seed);
    std::shuffle(users.begin(), users.end(), rng);
    users.resize(max_users);
    std::sort(users.begin(), users.end());
  }
  sample.user_nodes = std::move(users);
  return sample;
}

EvalReport evaluate(const InteractionDataset& dataset, const Matrix& emb,
                    const PopularityGroups* groups, std::size_t k,
                    const UniformitySample* uniformity_sample, const UniformityOptions& options) {
  EvalReport report;
  report.k = k;
  const TopKLists lists = compute_top_k(dataset, emb, k, EvalSplit::kTest);
  const RankingMetrics metrics = recall_ndcg(dataset, lists);
  report.recall_at_k = metrics.recall;
  report.ndcg_at_k = metrics.ndcg;
  report.num_eval_users = metrics.num_users;
  if (groups != nullptr) report.per_group_recall = group_recall(dataset, *groups, lists).recall;
  if (uniformity_sample != nullptr) {
    report.uniformity =
        uniformity(emb, uniformity_sample->user_nodes, uniformity_sample->item_nodes, options);
  }
  return report;
}

}  // namespace gclrec
