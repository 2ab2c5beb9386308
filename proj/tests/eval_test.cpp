#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "gclrec/eval.hpp"
#include "gclrec/synthetic.hpp"
#include "oracle.hpp"

using namespace gclrec;

namespace {

// Full sort of all non-excluded items by descending score, ties by index.
std::vector<std::size_t> sorted_items(const Matrix& emb, std::size_t num_users,
                                      std::size_t num_items, std::size_t user,
                                      const std::vector<std::size_t>& excluded) {
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < num_items; ++i) {
    if (std::find(excluded.begin(), excluded.end(), i) != excluded.end()) continue;
    double s = 0.0;
    for (std::size_t c = 0; c < emb.cols(); ++c) s += emb(user, c) * emb(num_users + i, c);
    scored.push_back({-s, i});
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::size_t> out;
  for (const auto& [neg, i] : scored) out.push_back(i);
  return out;
}

struct Toy {
  InteractionDataset dataset;
  Matrix emb;
};

// 20 users over 30 items with random train/validation/test memberships.
Toy toy(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t users = 20, items = 30;
  std::vector<Interaction> train, valid, test;
  for (std::size_t u = 0; u < users; ++u) {
    for (std::size_t i = 0; i < items; ++i) {
      const auto r = rng() % 10;
      if (r < 3) train.push_back({u, i});
      else if (r == 3) valid.push_back({u, i});
      else if (r == 4 && u % 7 != 0) test.push_back({u, i});  // some users get no test items
    }
  }
  return {InteractionDataset(users, items, train, valid, test),
          oracle::random_matrix(users + items, 4, seed + 100)};
}

double log_potential_mean(const std::vector<std::vector<double>>& pts) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t a = 0; a < pts.size(); ++a) {
    for (std::size_t b = a + 1; b < pts.size(); ++b) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < pts[a].size(); ++c) d2 += std::pow(pts[a][c] - pts[b][c], 2);
      sum += std::exp(-2.0 * d2);
      ++n;
    }
  }
  return std::log(sum / static_cast<double>(n));
}

Matrix rows_matrix(const std::vector<std::vector<double>>& pts) {
  Matrix m(pts.size(), pts[0].size());
  for (std::size_t r = 0; r < pts.size(); ++r) {
    for (std::size_t c = 0; c < pts[0].size(); ++c) m(r, c) = pts[r][c];
  }
  return m;
}

std::vector<std::size_t> iota(std::size_t n, std::size_t from = 0) {
  std::vector<std::size_t> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = from + k;
  return v;
}

}  // namespace

TEST(Ranking, MatchesFullSortOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix emb = oracle::random_matrix(5 + 40, 6, seed);
    std::mt19937_64 rng(seed);
    for (std::size_t u = 0; u < 5; ++u) {
      std::vector<std::size_t> excluded;
      for (std::size_t i = 0; i < 40; ++i) {
        if (rng() % 4 == 0) excluded.push_back(i);
      }
      const auto full = sorted_items(emb, 5, 40, u, excluded);
      for (std::size_t k : {1u, 5u, 20u, 100u}) {
        const auto top = rank_items(emb, 5, u, excluded, k);
        const std::vector<std::size_t> expected(full.begin(),
                                                full.begin() + std::min(k, full.size()));
        EXPECT_EQ(top, expected);
      }
    }
  }
}

TEST(Ranking, TiesGoToSmallerIndex) {
  Matrix emb(1 + 4, 1, 1.0);
  const auto top = rank_items(emb, 1, 0, std::vector<std::size_t>{1}, 2);
  EXPECT_EQ(top, (std::vector<std::size_t>{0, 2}));
}

TEST(Metrics, NdcgSingleRelevantAtRankTwo) {
  // Item 1 scores highest, the only test item 0 is second.
  const InteractionDataset ds(1, 3, {}, {}, {{0, 0}});
  Matrix emb(4, 1);
  emb(0, 0) = 1.0;
  emb(1, 0) = 2.0;
  emb(2, 0) = 3.0;
  emb(3, 0) = -1.0;
  const auto m = recall_ndcg(ds, emb, 2);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_NEAR(m.ndcg, 0.6309, 1e-4);
  EXPECT_NEAR(m.ndcg, 1.0 / std::log2(3.0), 1e-15);
  EXPECT_DOUBLE_EQ(recall_ndcg(ds, emb, 1).recall, 0.0);
}

TEST(Metrics, MatchBruteForceOnTwentyUsers) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto t = toy(seed);
    const auto& ds = t.dataset;
    for (const auto split : {EvalSplit::kValidation, EvalSplit::kTest}) {
      for (std::size_t k : {3u, 10u}) {
        double recall = 0.0, ndcg = 0.0;
        std::size_t counted = 0;
        for (std::size_t u = 0; u < 20; ++u) {
          std::vector<std::size_t> targets, excluded;
          for (const auto& p : split == EvalSplit::kTest ? ds.test() : ds.validation()) {
            if (p.user == u) targets.push_back(p.item);
          }
          if (targets.empty()) continue;
          for (const auto& p : ds.train()) {
            if (p.user == u) excluded.push_back(p.item);
          }
          if (split == EvalSplit::kTest) {
            for (const auto& p : ds.validation()) {
              if (p.user == u) excluded.push_back(p.item);
            }
          }
          auto ranked = sorted_items(t.emb, 20, 30, u, excluded);
          ranked.resize(std::min(k, ranked.size()));
          double hits = 0.0, dcg = 0.0, idcg = 0.0;
          for (std::size_t r = 0; r < ranked.size(); ++r) {
            if (std::find(targets.begin(), targets.end(), ranked[r]) != targets.end()) {
              hits += 1.0;
              dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
            }
          }
          for (std::size_t r = 0; r < std::min(k, targets.size()); ++r) {
            idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
          }
          recall += hits / static_cast<double>(targets.size());
          ndcg += dcg / idcg;
          ++counted;
        }
        const auto m = recall_ndcg(ds, t.emb, k, split);
        EXPECT_EQ(m.num_users, counted);
        EXPECT_NEAR(m.recall, recall / static_cast<double>(counted), 1e-12);
        EXPECT_NEAR(m.ndcg, ndcg / static_cast<double>(counted), 1e-12);
        EXPECT_GE(m.recall, 0.0);
        EXPECT_LE(m.ndcg, 1.0);
      }
    }
  }
}

TEST(Metrics, UsersWithoutTargetsSkipped) {
  const auto t = toy(1);
  const auto lists = compute_top_k(t.dataset, t.emb, 5);
  for (std::size_t u : lists.users) EXPECT_FALSE(t.dataset.test_items(u).empty());
  EXPECT_EQ(std::find(lists.users.begin(), lists.users.end(), 0u), lists.users.end());
}

TEST(GroupRecall, HitsPartitionTotal) {
  const auto raw = generate_synthetic({.num_users = 120, .num_items = 200}, 3);
  const auto ds = split_dataset(raw, {}, 3);
  const Matrix emb = oracle::random_matrix(ds.num_nodes(), 8, 5);
  const auto groups = build_popularity_groups(ds);
  const auto lists = compute_top_k(ds, emb, 20);
  const auto gr = group_recall(ds, groups, lists);
  std::size_t sum = 0;
  for (std::size_t g = 0; g < kNumPopularityGroups; ++g) {
    sum += gr.hits[g];
    if (gr.recall[g]) {
      EXPECT_GE(*gr.recall[g], 0.0);
      EXPECT_LE(*gr.recall[g], 1.0);
    }
  }
  EXPECT_EQ(sum, gr.total_hits);

  // Total hits agree with a direct count over the ranked lists.
  std::size_t direct = 0;
  for (std::size_t n = 0; n < lists.users.size(); ++n) {
    const auto targets = ds.test_items(lists.users[n]);
    for (std::size_t i : lists.items[n]) {
      direct += std::binary_search(targets.begin(), targets.end(), i) ? 1 : 0;
    }
  }
  EXPECT_EQ(gr.total_hits, direct);
}

TEST(GroupRecall, MatchesPerGroupBruteForce) {
  const auto t = toy(2);
  const auto groups = build_popularity_groups(t.dataset);
  const auto lists = compute_top_k(t.dataset, t.emb, 10);
  const auto gr = group_recall(t.dataset, groups, lists);
  for (int g = 1; g <= 10; ++g) {
    double sum = 0.0;
    std::size_t users = 0;
    for (std::size_t n = 0; n < lists.users.size(); ++n) {
      std::size_t in_group = 0, hits = 0;
      for (std::size_t i : t.dataset.test_items(lists.users[n])) {
        if (groups.group_of_item[i] != g) continue;
        ++in_group;
        const auto& top = lists.items[n];
        hits += std::find(top.begin(), top.end(), i) != top.end() ? 1 : 0;
      }
      if (in_group == 0) continue;
      sum += static_cast<double>(hits) / static_cast<double>(in_group);
      ++users;
    }
    const auto& got = gr.recall[static_cast<std::size_t>(g - 1)];
    if (users == 0) {
      EXPECT_FALSE(got.has_value());
    } else {
      ASSERT_TRUE(got.has_value());
      EXPECT_NEAR(*got, sum / static_cast<double>(users), 1e-12);
    }
  }
}

TEST(Uniformity, IdenticalRowsGiveZero) {
  Matrix m(5, 3);
  for (std::size_t r = 0; r < 5; ++r) {
    m(r, 0) = 0.5 * static_cast<double>(r + 1);
    m(r, 1) = static_cast<double>(r + 1);
  }
  EXPECT_NEAR(uniformity(m, iota(5)), 0.0, 1e-12);
}

TEST(Uniformity, AntipodalPairGivesMinusEight) {
  Matrix m(2, 2);
  m(0, 0) = 1.0;
  m(1, 0) = -3.0;
  EXPECT_NEAR(uniformity(m, iota(2)), -8.0, 1e-12);
  EXPECT_NEAR(uniformity(m, iota(1), iota(1, 1)), -8.0, 1e-12);
}

TEST(Uniformity, CircleMatchesQuadrature) {
  // Mean of exp(-4 (1 - cos t)) over the circle by the trapezoid rule.
  const int steps = 100'000;
  double integral = 0.0;
  for (int s = 0; s < steps; ++s) {
    const double t = 2.0 * std::numbers::pi * s / steps;
    integral += std::exp(-4.0 * (1.0 - std::cos(t)));
  }
  const double expected = std::log(integral / steps);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::vector<std::vector<double>> pts(1000);
  for (auto& p : pts) {
    const double t = angle(rng);
    p = {std::cos(t), std::sin(t)};
  }
  const double got = uniformity(rows_matrix(pts), iota(1000));
  EXPECT_NEAR(got, log_potential_mean(pts), 1e-10);
  EXPECT_NEAR(got, expected, 0.03);
}

TEST(Uniformity, SphereBeatsConcentratedClusterAcrossSeeds) {
  const std::size_t n = 300, d = 16;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> spread(n, std::vector<double>(d));
    std::vector<std::vector<double>> cluster(n, std::vector<double>(d));
    std::vector<double> mu(d);
    for (double& v : mu) v = normal(rng);
    const double mu_norm = std::sqrt(oracle::dot(mu, mu));
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < d; ++c) {
        spread[r][c] = normal(rng);
        // Tangent Gaussian around mu with concentration about 50.
        cluster[r][c] = mu[c] / mu_norm + normal(rng) / std::sqrt(50.0);
      }
    }
    const double u_spread = uniformity(rows_matrix(spread), iota(n));
    const double u_cluster = uniformity(rows_matrix(cluster), iota(n));
    EXPECT_LT(u_spread, u_cluster) << "seed " << seed;
  }
}

TEST(Uniformity, RotationAndScaleInvariant) {
  const Matrix m = oracle::random_matrix(40, 3, 4);
  const double base = uniformity(m, iota(20), iota(20, 20));
  Matrix rotated(40, 3);
  const double a = 0.7, b = -1.3;
  for (std::size_t r = 0; r < 40; ++r) {
    // Rotation about z, then about x.
    const double x = std::cos(a) * m(r, 0) - std::sin(a) * m(r, 1);
    const double y = std::sin(a) * m(r, 0) + std::cos(a) * m(r, 1);
    rotated(r, 0) = x;
    rotated(r, 1) = std::cos(b) * y - std::sin(b) * m(r, 2);
    rotated(r, 2) = std::sin(b) * y + std::cos(b) * m(r, 2);
  }
  EXPECT_NEAR(uniformity(rotated, iota(20), iota(20, 20)), base, 1e-12);
  Matrix scaled = m;
  for (std::size_t r = 0; r < 40; ++r) {
    for (double& v : scaled.row(r)) v *= 0.1 + static_cast<double>(r);
  }
  EXPECT_NEAR(uniformity(scaled, iota(20), iota(20, 20)), base, 1e-12);
}

TEST(Uniformity, CrossPairsMatchBruteForceAndSamplingIsClose) {
  const Matrix m = oracle::random_matrix(60, 4, 8);
  double sum = 0.0;
  for (std::size_t u = 0; u < 20; ++u) {
    for (std::size_t v = 20; v < 60; ++v) {
      const auto zu = oracle::unit({m.row(u).begin(), m.row(u).end()});
      const auto zv = oracle::unit({m.row(v).begin(), m.row(v).end()});
      double d2 = 0.0;
      for (std::size_t c = 0; c < 4; ++c) d2 += std::pow(zu[c] - zv[c], 2);
      sum += std::exp(-2.0 * d2);
    }
  }
  const double exact = std::log(sum / 800.0);
  EXPECT_NEAR(uniformity(m, iota(20), iota(40, 20)), exact, 1e-12);
  const double sampled = uniformity(m, iota(20), iota(40, 20), {.max_pairs = 500, .seed = 3});
  EXPECT_LE(sampled, 0.0);
  EXPECT_NEAR(sampled, exact, 0.15);
  EXPECT_EQ(sampled, uniformity(m, iota(20), iota(40, 20), {.max_pairs = 500, .seed = 3}));
}

TEST(Uniformity, SampleSelectsPopularItemsAndCapsUsers) {
  const auto raw = generate_synthetic({.num_users = 120, .num_items = 200}, 9);
  const auto ds = split_dataset(raw, {}, 9);
  const auto s = sample_uniformity_nodes(ds, 30, 50, 1);
  EXPECT_EQ(s.user_nodes.size(), 50u);
  EXPECT_TRUE(std::is_sorted(s.user_nodes.begin(), s.user_nodes.end()));
  std::size_t popular = 0;
  for (std::size_t i = 0; i < ds.num_items(); ++i) popular += ds.item_popularity()[i] > 30 ? 1 : 0;
  EXPECT_EQ(s.item_nodes.size(), popular);
  for (std::size_t node : s.item_nodes) {
    ASSERT_GE(node, ds.num_users());
    EXPECT_GT(ds.item_popularity()[node - ds.num_users()], 30u);
  }
  EXPECT_EQ(sample_uniformity_nodes(ds, 30, 50, 1).user_nodes, s.user_nodes);
  EXPECT_EQ(sample_uniformity_nodes(ds, 30, 500, 1).user_nodes.size(), ds.num_users());
}

TEST(Evaluate, ReportCombinesPieces) {
  const auto raw = generate_synthetic({.num_users = 100, .num_items = 150}, 2);
  const auto ds = split_dataset(raw, {}, 2);
  const Matrix emb = oracle::random_matrix(ds.num_nodes(), 8, 1);
  const auto groups = build_popularity_groups(ds);
  const auto sample = sample_uniformity_nodes(ds, 20, 100, 0);
  const auto report = evaluate(ds, emb, &groups, 20, &sample);
  const auto m = recall_ndcg(ds, emb, 20);
  EXPECT_DOUBLE_EQ(report.recall_at_k, m.recall);
  EXPECT_DOUBLE_EQ(report.ndcg_at_k, m.ndcg);
  EXPECT_EQ(report.num_eval_users, m.num_users);
  ASSERT_TRUE(report.uniformity.has_value());
  EXPECT_LE(*report.uniformity, 0.0);
  EXPECT_FALSE(evaluate(ds, emb, nullptr, 20).uniformity.has_value());
}

TEST(Evaluate, ThreadCountDoesNotChangeLists) {
  const auto t = toy(4);
  set_num_threads(1);
  const auto one = compute_top_k(t.dataset, t.emb, 7);
  set_num_threads(4);
  const auto four = compute_top_k(t.dataset, t.emb, 7);
  set_num_threads(1);
  EXPECT_EQ(one.users, four.users);
  EXPECT_EQ(one.items, four.items);
}
