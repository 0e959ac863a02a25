#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gaitgate/identity.hpp"
#include "gaitgate/trainer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace gaitgate {
namespace {

using testing::expect_error;
using testing::random_spec;

using oracle::nt_xent;

std::vector<std::size_t> adjacent_pairs(std::size_t m) {
  std::vector<std::size_t> p(m);
  for (std::size_t i = 0; i < m; ++i) p[i] = i ^ 1U;
  return p;
}

std::vector<std::vector<double>> random_embeddings(std::size_t m, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> z(m, std::vector<double>(d));
  for (auto& row : z) for (auto& v : row) v = rng.normal();
  return z;
}

TEST(CosineSimilarity, KnownCases) {
  const std::vector<float> a{1, 0}, b{0, 1}, c{-2, 0}, d{3, 3};
  EXPECT_DOUBLE_EQ(cosine_similarity(a, a), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(a, b), 0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(a, c), -1.0);
  EXPECT_NEAR(cosine_similarity(a, d), 1.0 / std::sqrt(2.0), 1e-12);
}

TEST(NtXent, ToyValue) {
  const std::vector<std::vector<double>> z{{1, 0}, {1, 0}, {0, 1}, {0, 1}};
  const auto p = adjacent_pairs(4);
  const double loss = nt_xent_loss<double>(z, p, 1.0);
  EXPECT_NEAR(loss, std::log(1.0 + 2.0 / std::exp(1.0)), 1e-12);
  EXPECT_NEAR(loss, 0.5514, 1e-4);
}

TEST(NtXent, MatchesOracleOnRandomBatches) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto z = random_embeddings(8, 5, seed);
    const auto p = adjacent_pairs(8);
    for (double tau : {0.1, 0.5, 1.0}) {
      EXPECT_NEAR(nt_xent_loss<double>(z, p, tau), nt_xent(z, p, tau), 1e-10);
    }
  }
}

TEST(NtXent, NeedsTwoPairs) {
  const std::vector<std::vector<double>> z{{1, 0}, {1, 0}};
  const auto p = adjacent_pairs(2);
  expect_error([&] { nt_xent_loss<double>(z, p, 0.1); }, ErrorKind::kInvalidArgument, "2 positive pairs");
}

TEST(NtXent, RejectsBadPairing) {
  const auto z = random_embeddings(4, 3, 2);
  const std::vector<std::size_t> p{1, 0, 3, 1};
  expect_error([&] { nt_xent_loss<double>(z, p, 0.1); }, ErrorKind::kInvalidArgument, "");
}

TEST(NtXent, ScaleAndPermutationInvariant) {
  auto z = random_embeddings(6, 4, 3);
  const auto p = adjacent_pairs(6);
  const double base = nt_xent_loss<double>(z, p, 0.2);
  auto scaled = z;
  for (auto& row : scaled) for (auto& v : row) v *= 7.5;
  EXPECT_NEAR(nt_xent_loss<double>(scaled, p, 0.2), base, 1e-12);
  // swap pair 0 and pair 2 as whole units
  std::vector<std::vector<double>> perm{z[4], z[5], z[2], z[3], z[0], z[1]};
  EXPECT_NEAR(nt_xent_loss<double>(perm, p, 0.2), base, 1e-12);
}

TEST(NtXent, GradientMatchesFiniteDifferences) {
  const auto z = random_embeddings(6, 4, 4);
  const auto p = adjacent_pairs(6);
  std::vector<std::vector<double>> g;
  nt_xent_loss<double>(z, p, 0.1, &g);
  const double h = 1e-6;
  for (std::size_t i = 0; i < z.size(); ++i) {
    for (std::size_t j = 0; j < z[i].size(); ++j) {
      auto up = z, down = z;
      up[i][j] += h;
      down[i][j] -= h;
      const double num = (nt_xent(up, p, 0.1) - nt_xent(down, p, 0.1)) / (2 * h);
      EXPECT_NEAR(g[i][j], num, 1e-6 * std::max(1.0, std::abs(num)));
    }
  }
}

TEST(NtXent, IdenticalEmbeddingsGiveZeroGradient) {
  const std::vector<std::vector<double>> z(4, std::vector<double>{0.6, 0.8});
  std::vector<std::vector<double>> g;
  const double loss = nt_xent_loss<double>(z, adjacent_pairs(4), 0.1, &g);
  EXPECT_NEAR(loss, std::log(3.0), 1e-12);
  for (const auto& row : g) for (double v : row) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(NtXent, SymmetricInPairOrder) {
  const auto z = random_embeddings(4, 3, 5);
  const std::vector<std::vector<double>> swapped{z[1], z[0], z[3], z[2]};
  const auto p = adjacent_pairs(4);
  EXPECT_NEAR(nt_xent_loss<double>(z, p, 0.3), nt_xent_loss<double>(swapped, p, 0.3), 1e-12);
}

TEST(NtXent, LowerTemperatureSharpensWellSeparatedBatch) {
  const std::vector<std::vector<double>> z{{1, 0.05}, {1, -0.05}, {0.05, 1}, {-0.05, 1}};
  const auto p = adjacent_pairs(4);
  EXPECT_LT(nt_xent_loss<double>(z, p, 0.1), nt_xent_loss<double>(z, p, 1.0));
}

ParameterSet one_tensor(std::vector<float> v) {
  ParameterSet p;
  p.tensors.push_back({"w", {v.size()}, std::move(v)});
  return p;
}

TEST(Adam, ZeroGradientLeavesParams) {
  auto p = one_tensor({1.0f, -2.0f});
  auto state = AdamState::for_params(p);
  TrainConfig cfg;
  for (int i = 0; i < 3; ++i) optimizer_step(p, one_tensor({0.0f, 0.0f}), state, cfg);
  EXPECT_EQ(p, one_tensor({1.0f, -2.0f}));
  EXPECT_EQ(state.step, 3u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = one_tensor({1.0f, -2.0f, 0.5f});
  auto state = AdamState::for_params(p);
  TrainConfig cfg;
  optimizer_step(p, one_tensor({3.0f, -0.01f, 100.0f}), state, cfg);
  // bias-corrected m/sqrt(v) = sign(g) on step 1
  EXPECT_NEAR(p.tensors[0].values[0], 1.0 - 1e-3, 1e-6);
  EXPECT_NEAR(p.tensors[0].values[1], -2.0 + 1e-3, 1e-6);
  EXPECT_NEAR(p.tensors[0].values[2], 0.5 - 1e-3, 1e-6);
}

TEST(Adam, ShapeMismatchIsAnError) {
  auto p = one_tensor({1.0f, 2.0f});
  auto state = AdamState::for_params(p);
  expect_error([&] { optimizer_step(p, one_tensor({1.0f}), state, TrainConfig{}); },
               ErrorKind::kInvalidArgument, "shape mismatch");
}

std::vector<UserSessions> noise_users(std::size_t n, std::size_t samples, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<UserSessions> users;
  for (std::size_t u = 0; u < n; ++u) {
    UserSessions us;
    us.user_id = "u" + std::to_string(u);
    for (std::size_t s = 0; s < 2; ++s) {
      MagnitudeSeries m;
      m.fs = 100.0;
      for (std::size_t i = 0; i < samples; ++i) m.values.push_back(1.0 + 0.1 * rng.normal());
      us.sessions.push_back(m);
      us.session_ids.push_back("s" + std::to_string(s));
    }
    users.push_back(us);
  }
  return users;
}

TEST(SampleBatch, Contracts) {
  const auto users = noise_users(6, 2500, 1);
  TrainConfig cfg;
  cfg.pairs_per_batch = 4;
  Rng rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    const auto b = sample_batch(users, cfg, StftConfig{}, rng);
    ASSERT_EQ(b.specs.size(), 8u);
    ASSERT_EQ(b.pairs(), 4u);
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < 8; i += 2) {
      const auto& a = b.sources[i];
      const auto& c = b.sources[i + 1];
      EXPECT_EQ(b.partner[i], i + 1);
      EXPECT_EQ(b.partner[i + 1], i);
      EXPECT_EQ(a.user, c.user);
      EXPECT_EQ(a.session, c.session);
      EXPECT_EQ(a.length, 1000u);
      EXPECT_TRUE(a.start + a.length <= c.start || c.start + c.length <= a.start);
      EXPECT_LE(std::max(a.start, c.start) + 1000, 2500u);
      EXPECT_TRUE(seen.insert(a.user).second) << "user repeated in batch";
      EXPECT_EQ(b.specs[i].freq_bins, 65u);
      EXPECT_EQ(b.specs[i].frames, 14u);
    }
  }
}

TEST(SampleBatch, TooFewUsers) {
  const auto users = noise_users(3, 2500, 1);
  TrainConfig cfg;
  cfg.pairs_per_batch = 4;
  Rng rng(1);
  expect_error([&] { sample_batch(users, cfg, StftConfig{}, rng); }, ErrorKind::kInvalidArgument,
               "found 3");
}

TEST(SampleBatch, SessionsTooShortAreIneligible) {
  auto users = noise_users(4, 2500, 2);
  users[1] = noise_users(1, 1500, 3)[0];
  EXPECT_EQ(eligible_user_count(users, 10.0), 3u);
}

TEST(SampleBatch, StartPairsCoverTheSession) {
  // With 2100 samples and 1000-sample windows, ordered disjoint start pairs are
  // (a, b) with |a - b| >= 1000 within [0, 1100]; both orders must appear.
  auto users = noise_users(2, 2100, 4);
  TrainConfig cfg;
  cfg.pairs_per_batch = 2;
  Rng rng(3);
  bool first_earlier = false, first_later = false;
  for (int rep = 0; rep < 200; ++rep) {
    const auto b = sample_batch(users, cfg, StftConfig{}, rng);
    first_earlier |= b.sources[0].start < b.sources[1].start;
    first_later |= b.sources[0].start > b.sources[1].start;
  }
  EXPECT_TRUE(first_earlier && first_later);
}

EncoderConfig tiny_encoder() {
  EncoderConfig c;
  c.conv_channels = {4, 4};
  c.embedding_dim = 8;
  c.init_seed = 1;
  return c;
}

TEST(Fit, KeepsBestValidationEpoch) {
  const auto users = noise_users(4, 2500, 5);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batches_per_epoch = 1;
  cfg.pairs_per_batch = 2;
  const std::vector<double> scores{0.5, 0.9, 0.7};
  std::vector<Model> seen;
  const auto r = fit(
      users, tiny_encoder(), cfg, StftConfig{},
      [&](const Model&, std::size_t epoch) { return scores[epoch - 1]; },
      [&](const EpochLog&, const Model& m) { seen.push_back(m); });
  EXPECT_EQ(r.best_epoch, 2u);
  EXPECT_EQ(r.best_val_f1, 0.9);
  ASSERT_EQ(seen.size(), 3u);
  EXPECT_EQ(r.best.params, seen[1].params);
  ASSERT_EQ(r.log.size(), 3u);
  EXPECT_EQ(r.log[2].epoch, 3u);
}

TEST(Fit, DeterministicAcrossThreadCounts) {
  const auto users = noise_users(4, 2500, 6);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batches_per_epoch = 3;
  cfg.pairs_per_batch = 3;
  auto run = [&](std::size_t threads) {
    auto c = cfg;
    c.threads = threads;
    return fit(users, tiny_encoder(), c, StftConfig{}, [](const Model&, std::size_t) { return 0.0; });
  };
  const auto a = run(1), b = run(1), c = run(3);
  EXPECT_EQ(a.best.params, b.best.params);
  EXPECT_EQ(a.best.params, c.best.params);
  EXPECT_EQ(a.log[0].mean_loss, c.log[0].mean_loss);
}

TEST(Fit, LossDecreasesOnSeparableUsers) {
  // Users differ by a pure tone frequency; a few epochs must reduce the loss.
  std::vector<UserSessions> users;
  for (std::size_t u = 0; u < 4; ++u) {
    UserSessions us;
    us.user_id = "u" + std::to_string(u);
    MagnitudeSeries m;
    Rng rng(u + 10);
    for (std::size_t i = 0; i < 3000; ++i) {
      m.values.push_back(1.0 + 0.3 * std::sin(2 * 3.14159265 * (1.0 + 0.6 * u) * i / 100.0) +
                         0.02 * rng.normal());
    }
    us.sessions.push_back(m);
    us.session_ids.push_back("s0");
    users.push_back(us);
  }
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batches_per_epoch = 8;
  cfg.pairs_per_batch = 4;
  cfg.learning_rate = 3e-3;
  const auto r = fit(users, tiny_encoder(), cfg, StftConfig{}, [](const Model&, std::size_t) { return 0.0; });
  EXPECT_LT(r.log.back().mean_loss, r.log.front().mean_loss);
}

TEST(FitSplit, RejectsOverlapAndEmptySets) {
  const auto users = noise_users(4, 2500, 7);
  FoldSpec split;
  split.train = {"u0", "u1"};
  split.val = {"u1"};
  TrainConfig cfg;
  cfg.epochs = 1;
  expect_error([&] { fit_split(users, split, tiny_encoder(), cfg, StftConfig{}, EvalConfig{}); },
               ErrorKind::kInvalidArgument, "");
  split.val = {};
  expect_error([&] { fit_split(users, split, tiny_encoder(), cfg, StftConfig{}, EvalConfig{}); },
               ErrorKind::kInvalidArgument, "validation set is empty");
}

TEST(EpochLog, JsonFields) {
  const auto j = epoch_log_to_json({2, 5, 0.25, 0.75, 10.0});
  EXPECT_EQ(j.dump(), R"({"fold":2,"epoch":5,"mean_loss":0.25,"val_f1":0.75,"wall_ms":10.0})");
}

}  // namespace
}  // namespace gaitgate
