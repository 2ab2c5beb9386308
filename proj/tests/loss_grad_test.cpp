#include <gtest/gtest.h>

#include <cmath>

#include "gclrec/errors.hpp"
#include "gclrec/graph.hpp"
#include "gclrec/loss.hpp"
#include "gclrec/model.hpp"
#include "oracle.hpp"

using namespace gclrec;

namespace {

constexpr int kSeeds = 20;
constexpr double kGradTol = 1e-5;

struct Fixture {
  oracle::Instance inst;
  SparseAdjacency adj;
  oracle::Dense dense_adj;
  Matrix e0;
};

Fixture make_setup(std::uint64_t seed, std::size_t dim) {
  Fixture s;
  s.inst = oracle::random_instance(seed);
  s.adj = SparseAdjacency::from_edges(s.inst.users, s.inst.items, s.inst.edges);
  s.dense_adj = oracle::adjacency(s.inst.users, s.inst.items, s.inst.edges);
  s.e0 = oracle::random_matrix(s.inst.users + s.inst.items, dim, seed * 7 + 1, 0.5);
  return s;
}


}  // namespace

TEST(Bpr, GradientMatchesFiniteDifferences) {
  double worst = 0.0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const Fixture s = make_setup(seed, 1 + seed % 4);
    Matrix grad(s.e0.rows(), s.e0.cols());
    const double loss = bpr_loss_and_grad(s.e0, s.inst.batch, &grad);
    const auto f = [&](const oracle::Dense& x) { return oracle::bpr(x, s.inst.batch); };
    EXPECT_NEAR(loss, f(oracle::from_matrix(s.e0)), 1e-12);
    worst = std::max(worst, oracle::max_relative_error(
                                grad, oracle::finite_difference(f, oracle::from_matrix(s.e0))));
  }
  EXPECT_LT(worst, kGradTol);
}

TEST(Bpr, StableForLargeMargins) {
  Matrix emb(3, 1);
  emb(0, 0) = 1.0;
  emb(1, 0) = -800.0;  // positive scored far below the negative
  emb(2, 0) = 800.0;
  const Batch batch = make_batch(1, {{0, 0, 1}});
  Matrix grad(3, 1);
  const double loss = bpr_loss_and_grad(emb, batch, &grad);
  EXPECT_NEAR(loss, 1600.0, 1e-9);
  EXPECT_TRUE(all_finite(grad));
}

TEST(InfoNce, GradientMatchesFiniteDifferencesInBothViews) {
  double worst = 0.0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const std::size_t n = 4 + seed % 5;
    const std::size_t d = 1 + seed % 4;
    const Matrix a = oracle::random_matrix(n, d, 100 + seed);
    const Matrix b = oracle::random_matrix(n, d, 200 + seed);
    std::vector<std::size_t> nodes;
    for (std::size_t k = 0; k < n; k += 1 + seed % 2) nodes.push_back(k);
    Matrix ga(n, d), gb(n, d);
    const double loss = infonce_loss_and_grad(a, b, nodes, 0.2, &ga, &gb);
    const auto da = oracle::from_matrix(a);
    const auto db = oracle::from_matrix(b);
    EXPECT_NEAR(loss, oracle::infonce(da, db, nodes, 0.2), 1e-10);
    const auto fa = [&](const oracle::Dense& x) { return oracle::infonce(x, db, nodes, 0.2); };
    const auto fb = [&](const oracle::Dense& x) { return oracle::infonce(da, x, nodes, 0.2); };
    worst = std::max(worst, oracle::max_relative_error(ga, oracle::finite_difference(fa, da)));
    worst = std::max(worst, oracle::max_relative_error(gb, oracle::finite_difference(fb, db)));
  }
  EXPECT_LT(worst, kGradTol);
}

TEST(InfoNce, SameViewEqualsWithoutAugmentationLoss) {
  for (int seed = 0; seed < kSeeds; ++seed) {
    const Matrix v = oracle::random_matrix(9, 4, 300 + seed);
    const std::vector<std::size_t> nodes{0, 2, 3, 5, 8};
    EXPECT_NEAR(infonce_loss_and_grad(v, v, nodes, 0.2, nullptr, nullptr),
                sgl_wa_loss(v, nodes, 0.2), 1e-12);
  }
}

TEST(InfoNce, ZeroNormRowsAreLeftOut) {
  Matrix a = oracle::random_matrix(4, 3, 9);
  Matrix b = oracle::random_matrix(4, 3, 10);
  for (double& x : a.row(2)) x = 0.0;
  set_warnings_enabled(false);
  Matrix ga(4, 3), gb(4, 3);
  const double with_zero = infonce_loss_and_grad(a, b, std::vector<std::size_t>{0, 1, 2, 3}, 0.2, &ga, &gb);
  set_warnings_enabled(true);
  const double without = infonce_loss_and_grad(a, b, std::vector<std::size_t>{0, 1, 3}, 0.2, nullptr, nullptr);
  EXPECT_DOUBLE_EQ(with_zero, without);
  EXPECT_TRUE(all_finite(ga));
  for (double x : ga.row(2)) EXPECT_EQ(x, 0.0);
}

TEST(InfoNce, StableAtTinyTemperature) {
  const Matrix a = oracle::random_matrix(6, 3, 11);
  Matrix ga(6, 3), gb(6, 3);
  const double loss =
      infonce_loss_and_grad(a, a, std::vector<std::size_t>{0, 1, 2, 3, 4, 5}, 1e-3, &ga, &gb);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_TRUE(all_finite(ga));
}

TEST(InfoNce, RejectsNonPositiveTemperature) {
  const Matrix a = oracle::random_matrix(3, 2, 1);
  EXPECT_THROW(infonce_loss_and_grad(a, a, std::vector<std::size_t>{0, 1}, 0.0, nullptr, nullptr),
               ConfigError);
}

TEST(SglWa, TwoOrthogonalRowsMatchClosedForm) {
  Matrix v(2, 2);
  v(0, 0) = 1.0;
  v(1, 1) = 1.0;
  const double expected = 2.0 * (std::log(std::exp(5.0) + 1.0) - 5.0);
  EXPECT_NEAR(sgl_wa_loss(v, std::vector<std::size_t>{0, 1}, 0.2), expected, 1e-12);
}

TEST(SglWa, GradientMatchesFiniteDifferences) {
  double worst = 0.0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const std::size_t n = 3 + seed % 6;
    const std::size_t d = 1 + seed % 4;
    const Matrix v = oracle::random_matrix(n, d, 400 + seed);
    std::vector<std::size_t> nodes;
    for (std::size_t k = 0; k < n; ++k) nodes.push_back(k);
    Matrix g(n, d);
    const double loss = sgl_wa_loss_and_grad(v, nodes, 0.2, &g);
    const auto f = [&](const oracle::Dense& x) { return oracle::sgl_wa(x, nodes, 0.2); };
    EXPECT_NEAR(loss, f(oracle::from_matrix(v)), 1e-10);
    worst = std::max(worst, oracle::max_relative_error(g, oracle::finite_difference(f, oracle::from_matrix(v))));
  }
  EXPECT_LT(worst, kGradTol);
}

TEST(L2Reg, SingleRowValue) {
  Matrix e0(2, 2);
  e0(0, 0) = 3.0;
  e0(0, 1) = 4.0;
  Batch batch;
  batch.num_users = 1;
  batch.user_nodes = {0};
  Matrix grad(2, 2);
  EXPECT_NEAR(l2_reg_and_grad(e0, batch, 1e-4, &grad), 2.5e-3, 1e-15);
  EXPECT_NEAR(grad(0, 0), 6e-4, 1e-15);
  EXPECT_EQ(l2_reg_and_grad(Matrix(2, 2), batch, 1e-4, nullptr), 0.0);
}

TEST(L2Reg, GradientMatchesFiniteDifferences) {
  double worst = 0.0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const Fixture s = make_setup(seed, 3);
    Matrix grad(s.e0.rows(), s.e0.cols());
    l2_reg_and_grad(s.e0, s.inst.batch, 0.01, &grad);
    const auto f = [&](const oracle::Dense& x) { return oracle::l2(x, s.inst.batch, 0.01); };
    worst = std::max(worst, oracle::max_relative_error(
                                grad, oracle::finite_difference(f, oracle::from_matrix(s.e0))));
  }
  EXPECT_LT(worst, kGradTol);
}

TEST(JointLightGcn, GradientMatchesFiniteDifferences) {
  double worst = 0.0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const Fixture s = make_setup(seed, 1 + seed % 4);
    const int layers = 1 + seed % 3;
    const LayerGraphs graphs(s.adj, layers);
    const JointResult r = joint_loss_lightgcn(s.e0, graphs, s.inst.batch, 1e-2);
    const std::vector<oracle::Dense> dense(static_cast<std::size_t>(layers), s.dense_adj);
    const auto f = [&](const oracle::Dense& x) {
      const auto fw = oracle::forward(x, dense, true);
      return oracle::bpr(fw.final, s.inst.batch) + oracle::l2(x, s.inst.batch, 1e-2);
    };
    EXPECT_NEAR(r.report.total, f(oracle::from_matrix(s.e0)), 1e-10);
    worst = std::max(worst, oracle::max_relative_error(
                                r.grad, oracle::finite_difference(f, oracle::from_matrix(s.e0))));
  }
  EXPECT_LT(worst, kGradTol);
}

namespace {

double xsimgcl_oracle(const oracle::Dense& x, const Fixture& s, const XSimGclParams& p,
                      const NoiseSpec& noise, std::uint64_t noise_seed, int layers) {
  return oracle::xsimgcl_total(x, s.dense_adj, s.inst.batch, layers, p.lambda, p.tau, p.reg,
                               p.contrast_layer, p.anchor_layer, noise, noise_seed);
}

}  // namespace

TEST(JointXSimGcl, GradientMatchesFiniteDifferencesWithReplayedNoise) {
  double worst = 0.0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const Fixture s = make_setup(seed, 1 + seed % 4);
    const int layers = 2;
    XSimGclParams p;
    p.lambda = 0.2;
    p.contrast_layer = 1 + seed % 2;
    const NoiseSpec noise{0.1, NoiseKind::kSignedUniform};
    const std::uint64_t noise_seed = 9000 + seed;

    Rng rng(noise_seed);
    const LayerGraphs graphs(s.adj, layers);
    const EmbeddingState state = propagate_perturbed(s.e0, graphs, noise, rng);
    const JointResult r = joint_loss_xsimgcl(s.e0, state, graphs, s.inst.batch, p);

    const auto f = [&](const oracle::Dense& x) {
      return xsimgcl_oracle(x, s, p, noise, noise_seed, layers);
    };
    EXPECT_NEAR(r.report.total, f(oracle::from_matrix(s.e0)), 1e-10);
    worst = std::max(worst, oracle::max_relative_error(
                                r.grad, oracle::finite_difference(f, oracle::from_matrix(s.e0))));
  }
  EXPECT_LT(worst, kGradTol);
}

TEST(JointXSimGcl, IntermediateAnchorLayerGradient) {
  double worst = 0.0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const Fixture s = make_setup(seed, 2);
    XSimGclParams p;
    p.anchor_layer = 2;
    p.contrast_layer = 1;
    const NoiseSpec noise{0.05, NoiseKind::kGaussian};
    Rng rng(seed);
    const LayerGraphs graphs(s.adj, 3);
    const EmbeddingState state = propagate_perturbed(s.e0, graphs, noise, rng);
    const JointResult r = joint_loss_xsimgcl(s.e0, state, graphs, s.inst.batch, p);
    const auto f = [&](const oracle::Dense& x) { return xsimgcl_oracle(x, s, p, noise, seed, 3); };
    worst = std::max(worst, oracle::max_relative_error(
                                r.grad, oracle::finite_difference(f, oracle::from_matrix(s.e0))));
  }
  EXPECT_LT(worst, kGradTol);
}

TEST(JointXSimGcl, RejectsContrastLayerOutsideRange) {
  const Fixture s = make_setup(1, 2);
  const LayerGraphs graphs(s.adj, 2);
  Rng rng(1);
  const EmbeddingState state = propagate_perturbed(s.e0, graphs, {0.1, NoiseKind::kSignedUniform}, rng);
  XSimGclParams p;
  p.contrast_layer = 3;
  EXPECT_THROW(joint_loss_xsimgcl(s.e0, state, graphs, s.inst.batch, p), ConfigError);
}

TEST(JointSimGcl, GradientMatchesFiniteDifferencesWithReplayedNoise) {
  double worst = 0.0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const Fixture s = make_setup(seed, 1 + seed % 4);
    const int layers = 2;
    SimGclParams p;
    p.noise = {0.1, NoiseKind::kSignedUniform};
    const std::uint64_t noise_seed = 500 + seed;
    Rng rng(noise_seed);
    const LayerGraphs graphs(s.adj, layers);
    const JointResult r = joint_loss_simgcl(s.e0, graphs, s.inst.batch, p, rng);

    const auto f = [&](const oracle::Dense& x) {
      return oracle::simgcl_total(x, s.dense_adj, s.inst.batch, layers, p.lambda, p.tau, p.reg,
                                  p.noise, noise_seed);
    };
    EXPECT_NEAR(r.report.total, f(oracle::from_matrix(s.e0)), 1e-10);
    worst = std::max(worst, oracle::max_relative_error(
                                r.grad, oracle::finite_difference(f, oracle::from_matrix(s.e0))));
  }
  EXPECT_LT(worst, kGradTol);
}

TEST(JointSimGcl, ZeroNoiseContrastEqualsWithoutAugmentationLoss) {
  const Fixture s = make_setup(3, 3);
  const LayerGraphs graphs(s.adj, 2);
  SimGclParams p;
  p.noise = {0.0, NoiseKind::kSignedUniform};
  Rng rng(1);
  const JointResult r = joint_loss_simgcl(s.e0, graphs, s.inst.batch, p, rng);
  const EmbeddingState plain = propagate_plain(s.e0, graphs, Aggregation::kSkipInput);
  const double wa = sgl_wa_loss(plain.final, s.inst.batch.user_nodes, p.tau) +
                    sgl_wa_loss(plain.final, s.inst.batch.item_nodes, p.tau);
  EXPECT_NEAR(r.report.cl, wa, 1e-12);
}

TEST(JointSimGcl, ZeroLambdaIsSkipInputBpr) {
  const Fixture s = make_setup(4, 3);
  const LayerGraphs graphs(s.adj, 2);
  SimGclParams p;
  p.lambda = 0.0;
  p.reg = 0.0;
  Rng rng(1);
  const JointResult r = joint_loss_simgcl(s.e0, graphs, s.inst.batch, p, rng);
  const EmbeddingState plain = propagate_plain(s.e0, graphs, Aggregation::kSkipInput);
  EXPECT_NEAR(r.report.total, bpr_loss_and_grad(plain.final, s.inst.batch, nullptr), 1e-12);
}

TEST(JointSgl, EdgeDropoutGradientMatchesFiniteDifferences) {
  double worst = 0.0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const Fixture s = make_setup(seed, 1 + seed % 4);
    const SparseAdjacency va = edge_dropout(s.adj, 0.7, seed);
    const SparseAdjacency vb = edge_dropout(s.adj, 0.7, seed + 1000);
    const LayerGraphs plain(s.adj, 2), ga(va, 2), gb(vb, 2);
    SglParams p;
    set_warnings_enabled(false);
    const JointResult r = joint_loss_sgl(s.e0, plain, &ga, &gb, s.inst.batch, p);
    set_warnings_enabled(true);

    const auto da = oracle::adjacency(s.inst.users, s.inst.items, va.edges());
    const auto db = oracle::adjacency(s.inst.users, s.inst.items, vb.edges());
    const std::vector<oracle::Dense> dp(2, s.dense_adj), dav(2, da), dbv(2, db);
    const auto f = [&](const oracle::Dense& x) {
      const auto fa = oracle::forward(x, dav, true);
      const auto fb = oracle::forward(x, dbv, true);
      const double cl = oracle::infonce(fa.final, fb.final, oracle::batch_users(s.inst.batch), p.tau) +
                        oracle::infonce(fa.final, fb.final, oracle::batch_items(s.inst.batch), p.tau);
      return oracle::bpr(oracle::forward(x, dp, true).final, s.inst.batch) + p.lambda * cl +
             oracle::l2(x, s.inst.batch, p.reg);
    };
    // Dropout can isolate a node; its view row is then zero and the node is
    // dropped from contrast in both implementations.
    EXPECT_NEAR(r.report.total, f(oracle::from_matrix(s.e0)), 1e-10);
    worst = std::max(worst, oracle::max_relative_error(
                                r.grad, oracle::finite_difference(f, oracle::from_matrix(s.e0))));
  }
  EXPECT_LT(worst, kGradTol);
}

TEST(JointSgl, WithoutAugmentationGradientMatchesFiniteDifferences) {
  double worst = 0.0;
  for (int seed = 0; seed < kSeeds; ++seed) {
    const Fixture s = make_setup(seed, 1 + seed % 4);
    const LayerGraphs plain(s.adj, 2);
    SglParams p;
    p.variant = SglVariant::kWithoutAugmentation;
    const JointResult r = joint_loss_sgl(s.e0, plain, nullptr, nullptr, s.inst.batch, p);
    const std::vector<oracle::Dense> dp(2, s.dense_adj);
    const auto f = [&](const oracle::Dense& x) {
      const auto fw = oracle::forward(x, dp, true);
      const double cl = oracle::sgl_wa(fw.final, oracle::batch_users(s.inst.batch), p.tau) +
                        oracle::sgl_wa(fw.final, oracle::batch_items(s.inst.batch), p.tau);
      return oracle::bpr(fw.final, s.inst.batch) + p.lambda * cl + oracle::l2(x, s.inst.batch, p.reg);
    };
    worst = std::max(worst, oracle::max_relative_error(
                                r.grad, oracle::finite_difference(f, oracle::from_matrix(s.e0))));
  }
  EXPECT_LT(worst, kGradTol);
}

TEST(JointSgl, FullKeepRateViewsMatchWithoutAugmentationValue) {
  const Fixture s = make_setup(5, 3);
  const SparseAdjacency kept = edge_dropout(s.adj, 1.0, 3);
  const LayerGraphs plain(s.adj, 2), view(kept, 2);
  SglParams p;
  const JointResult r = joint_loss_sgl(s.e0, plain, &view, &view, s.inst.batch, p);
  const EmbeddingState state = propagate_plain(s.e0, plain, Aggregation::kWithInput);
  EXPECT_NEAR(r.report.cl,
              sgl_wa_loss(state.final, s.inst.batch.user_nodes, p.tau) +
                  sgl_wa_loss(state.final, s.inst.batch.item_nodes, p.tau),
              1e-12);
}

TEST(InfoNce, PushesFreeEmbeddingsApart) {
  // Ten fixed-norm rows starting in a narrow cone; gradient steps on the
  // contrastive loss alone, renormalizing after each step.
  Matrix v = oracle::random_matrix(10, 4, 77, 0.05);
  for (std::size_t r = 0; r < 10; ++r) v(r, 0) += 1.0;
  auto renormalize = [](Matrix& m) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
      auto row = m.row(r);
      const double n = std::sqrt(dot(row, row));
      for (double& x : row) x /= n;
    }
  };
  auto mean_cosine = [](const Matrix& m) {
    double s = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = i + 1; j < m.rows(); ++j, ++count) s += dot(m.row(i), m.row(j));
    }
    return s / count;
  };
  renormalize(v);
  std::vector<std::size_t> nodes(10);
  for (std::size_t k = 0; k < 10; ++k) nodes[k] = k;
  const double before = mean_cosine(v);
  for (int step = 0; step < 200; ++step) {
    Matrix g(10, 4);
    infonce_loss_and_grad(v, v, nodes, 0.2, &g, &g);
    add_scaled(v, g, -0.01);
    renormalize(v);
  }
  EXPECT_LT(mean_cosine(v), before);
}

TEST(JointXSimGcl, SmallStepDecreasesLoss) {
  for (int seed = 0; seed < 5; ++seed) {
    const Fixture s = make_setup(seed, 3);
    const LayerGraphs graphs(s.adj, 2);
    XSimGclParams p;
    const NoiseSpec noise{0.1, NoiseKind::kSignedUniform};
    auto loss_at = [&](const Matrix& e0, Matrix* grad) {
      Rng rng(42);
      const EmbeddingState st = propagate_perturbed(e0, graphs, noise, rng);
      JointResult r = joint_loss_xsimgcl(e0, st, graphs, s.inst.batch, p);
      if (grad) *grad = r.grad;
      return r.report.total;
    };
    Matrix grad;
    const double before = loss_at(s.e0, &grad);
    Matrix stepped = s.e0;
    add_scaled(stepped, grad, -1e-4);
    EXPECT_LT(loss_at(stepped, nullptr), before) << "seed " << seed;
  }
}
