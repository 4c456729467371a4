#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "grad_suite.hpp"
#include "ppgta/explore.hpp"
#include "ppgta/losses.hpp"

using namespace ppgta;
using ppgta::testing::random_vector;

namespace {

PolicyConfig tiny_policy(int frame) {
  PolicyConfig c;
  c.encoder = {frame, frame, {4, 8}, 8};
  c.window = 2;
  c.local_hidden = 4;
  c.global_hidden = 4;
  c.mlp1 = 8;
  c.mlp2 = 6;
  c.dropout = 0.0f;
  return c;
}

// A one-state environment: every transition sees the same window and global input.
Transition fixed_state(const PolicyNet& net) {
  Transition tr;
  tr.window.assign(2, std::vector<float>(8, 0.25f));
  tr.global_prev.assign(net.global_size(), 0.0f);
  return tr;
}

PolicyNet::Output evaluate(const PolicyNet& net, const Transition& tr) {
  std::vector<std::span<const float>> w(tr.window.begin(), tr.window.end());
  return net.forward(w, tr.global_prev, nullptr, nullptr);
}

AdamW trunk_optimizer(PolicyNet& net) {
  ParamRefs trunk;
  net.for_each_trunk_param([&](Parameter& p) { trunk.push_back(&p); });
  return AdamW(trunk, AdamWConfig{});
}

const World& small_world() {
  static const World w = [] {
    WorldSpec s{5};
    s.grid_size = 32;
    s.n_ooi = 10;
    return generate_world(s);
  }();
  return w;
}

ExploreConfig small_explore() {
  ExploreConfig c;
  c.horizon = 24;
  c.novelty.net = {16, {4, 8}, 8, 6};
  c.novelty.ensemble = 3;
  c.novelty.batch = 4;
  c.novelty.buffer = 32;
  c.ppo.minibatch = 8;
  c.ppo.epochs = 1;
  c.seed = 3;
  return c;
}

}  // namespace

TEST(PpoLoss, UnclippedGradientsMatchFiniteDifferences) {
  EXPECT_LE(ppgta::testing::ppo_gradients().worst, 1e-3);
}

TEST(PpoLoss, ClippedSurrogateHasNoGradient) {
  Rng rng = make_stream(2, "t");
  const auto logits = random_vector(kActionCount, rng, 1.5);
  PpoConfig c;
  c.entropy_coef = 0.0;
  const double lp = log_softmax(logits)[2];
  // Positive advantage with ratio 1.5 > 1 + clip: the clipped branch wins.
  const PpoSampleLoss up = ppo_sample_loss(logits, 0.0f, 2, lp - std::log(1.5), 1.0, 0.0, c);
  EXPECT_TRUE(up.clipped);
  EXPECT_NEAR(up.surrogate, 1.2, 1e-6);
  for (float g : up.g_logits) EXPECT_EQ(g, 0.0f);
  // Negative advantage with ratio 0.5 < 1 - clip.
  const PpoSampleLoss down = ppo_sample_loss(logits, 0.0f, 2, lp - std::log(0.5), -1.0, 0.0, c);
  EXPECT_TRUE(down.clipped);
  EXPECT_NEAR(down.surrogate, -0.8, 1e-6);
  for (float g : down.g_logits) EXPECT_EQ(g, 0.0f);
}

TEST(Gae, MatchesHandComputation) {
  const std::vector<double> r{1.0, 0.0, 2.0}, v{0.5, 0.2, 0.1};
  const std::vector<std::uint8_t> done{0, 0, 1};
  const auto adv = gae_advantages(r, v, done, 7.0, 0.9, 0.8);
  // delta_2 = 2 - 0.1 (terminal, bootstrap ignored); delta_1 = 0.9*0.1 - 0.2; delta_0 = 1 + 0.9*0.2 - 0.5
  EXPECT_NEAR(adv[2], 1.9, 1e-12);
  EXPECT_NEAR(adv[1], -0.11 + 0.72 * 1.9, 1e-12);
  EXPECT_NEAR(adv[0], 0.68 + 0.72 * (-0.11 + 0.72 * 1.9), 1e-12);
}

TEST(Gae, EpisodeBoundaryStopsPropagation) {
  const std::vector<double> r{1.0, 5.0}, v{0.0, 0.0};
  const std::vector<std::uint8_t> done{1, 0};
  const auto adv = gae_advantages(r, v, done, 2.0, 0.5, 1.0);
  EXPECT_NEAR(adv[0], 1.0, 1e-12);
  EXPECT_NEAR(adv[1], 5.0 + 0.5 * 2.0, 1e-12);
}

TEST(Advantages, NormalizeToZeroMeanUnitVariance) {
  std::vector<double> a{1.0, 2.0, 4.0, 9.0};
  normalize_advantages(a);
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / 4.0;
  double var = 0.0;
  for (double x : a) var += (x - mean) * (x - mean) / 4.0;
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(var, 1.0, 1e-12);
  std::vector<double> flat(5, 3.0);
  normalize_advantages(flat);
  for (double x : flat) EXPECT_EQ(x, 0.0);
}

TEST(RunLength, RoundTrips) {
  const std::vector<TilePos> tiles{{1, 1}, {1, 1}, {2, 1}, {1, 1}, {1, 1}, {1, 1}};
  const auto runs = run_length_encode(tiles);
  EXPECT_EQ(runs, (std::vector<TileRun>{{{1, 1}, 2}, {{2, 1}, 1}, {{1, 1}, 3}}));
  EXPECT_EQ(run_length_decode(runs), tiles);
  EXPECT_TRUE(run_length_encode({}).empty());
}

TEST(Ppo, LearnsTheRewardedArmOfABandit) {
  Rng rng = make_stream(3, "t");
  PolicyNet net("policy", tiny_policy(8));
  net.init(rng);
  AdamW opt = trunk_optimizer(net);
  PpoConfig c;
  c.lr = 1e-2;
  c.minibatch = 32;
  const Transition base = fixed_state(net);
  Rng act = make_stream(4, "t");
  const double before = softmax(evaluate(net, base).logits)[3];
  for (int iter = 0; iter < 60; ++iter) {
    const PolicyNet::Output out = evaluate(net, base);
    const auto probs = softmax(out.logits);
    RolloutBatch batch;
    for (int s = 0; s < 64; ++s) {
      Transition tr = base;
      tr.action = sample_index(probs, act);
      tr.log_prob = std::log(probs[static_cast<std::size_t>(tr.action)]);
      tr.value = out.value;
      tr.reward = tr.action == 3 ? 1.0 : 0.0;
      tr.done = true;
      batch.steps.push_back(tr);
    }
    prepare_batch(batch, c);
    ppo_update(net, opt, batch, c, rng);
  }
  EXPECT_LT(before, 0.3);
  EXPECT_GT(softmax(evaluate(net, base).logits)[3], 0.8);
}

TEST(Ppo, ValueApproachesDiscountedReturn) {
  Rng rng = make_stream(5, "t");
  PolicyNet net("policy", tiny_policy(8));
  net.init(rng);
  AdamW opt = trunk_optimizer(net);
  PpoConfig c;
  c.gamma = 0.9;
  c.gae_lambda = 1.0;  // returns are plain discounted sums, independent of the value estimates
  c.lr = 3e-2;
  c.max_grad_norm = 0.0;
  c.entropy_coef = 0.0;
  c.minibatch = 100;
  const int n = 400;
  // Constant reward 1, truncated after n steps: the mean return is r/(1-gamma) minus the tail.
  double target = 0.0;
  for (int t = 0; t < n; ++t) target += (1.0 - std::pow(c.gamma, n - t)) / (1.0 - c.gamma) / n;
  const Transition base = fixed_state(net);
  for (int iter = 0; iter < 40; ++iter) {
    const PolicyNet::Output out = evaluate(net, base);
    const auto probs = softmax(out.logits);
    RolloutBatch batch;
    for (int t = 0; t < n; ++t) {
      Transition tr = base;
      tr.action = 0;
      tr.log_prob = std::log(probs[0]);
      tr.value = out.value;
      tr.reward = 1.0;
      tr.done = t + 1 == n;
      batch.steps.push_back(tr);
    }
    prepare_batch(batch, c);
    ppo_update(net, opt, batch, c, rng);
  }
  EXPECT_NEAR(evaluate(net, base).value, target, 0.05 * target);
  EXPECT_GT(target, 9.5);  // close to 1 / (1 - gamma)
}

TEST(ExploreSession, TraceAlphaReplaysExactly) {
  const World& w = small_world();
  const Detector det = Detector::oracle(w);
  Rng rng = make_stream(6, "t");
  PolicyNet actor("policy", tiny_policy(32)), path("policy", tiny_policy(32));
  actor.init(rng);
  path.init(rng);
  ExploreSession s(w, det, actor, path, OrbitTester{}, small_explore());
  RolloutBatch batch;
  const EpisodeReport r = s.run_episode(0, &batch);
  ASSERT_EQ(r.trace.size(), 24u);
  ASSERT_EQ(batch.steps.size(), 24u);
  std::vector<double> r_e;
  for (const auto& row : r.trace) r_e.push_back(row.r_e);
  const auto alpha = replay_alpha(r_e);
  for (std::size_t t = 0; t < r.trace.size(); ++t) {
    EXPECT_EQ(r.trace[t].alpha, alpha[t]) << "t=" << t;
    EXPECT_EQ(r.trace[t].r_c, combined_reward(alpha[t], r.trace[t].r_p, r.trace[t].r_e));
    EXPECT_LE(r.trace[t].r_p, 1e-12);
    EXPECT_GE(r.trace[t].r_e_raw, 0.0);
    EXPECT_EQ(batch.steps[t].reward, r.trace[t].r_c);
  }
  EXPECT_EQ(run_length_decode(r.visited).size(), 24u);
  EXPECT_TRUE(batch.steps.back().done);
}

TEST(ExploreSession, FixedAlphaZeroIsPureNovelty) {
  const World& w = small_world();
  const Detector det = Detector::oracle(w);
  Rng rng = make_stream(7, "t");
  PolicyNet actor("policy", tiny_policy(32));
  actor.init(rng);
  ExploreConfig c = small_explore();
  c.alpha_mode = AlphaMode::Fixed;
  c.fixed_alpha = 0.0;
  ExploreSession s(w, det, actor, actor, OrbitTester{}, c);
  for (const auto& row : s.run_episode(0, nullptr).trace) {
    EXPECT_EQ(row.alpha, 0.0);
    EXPECT_EQ(row.r_c, row.r_e);
  }
}

TEST(ExploreSession, SameSeedSameEpisodes) {
  const World& w = small_world();
  const Detector det = Detector::oracle(w);
  Rng rng = make_stream(8, "t");
  PolicyNet actor("policy", tiny_policy(32));
  actor.init(rng);
  auto run = [&] {
    ExploreSession s(w, det, actor, actor, OrbitTester{}, small_explore());
    train_explorer(s, 2);
    return s.run_episode(5, nullptr);
  };
  const EpisodeReport a = run(), b = run();
  EXPECT_EQ(a.visited, b.visited);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t t = 0; t < a.trace.size(); ++t) EXPECT_EQ(a.trace[t].r_c, b.trace[t].r_c);
}

TEST(ExploreSession, TestsEachOoiOnceAndHandoffIsNotCounted) {
  const World& w = small_world();
  const Detector det = Detector::oracle(w);
  Rng rng = make_stream(9, "t");
  PolicyNet actor("policy", tiny_policy(32));
  actor.init(rng);
  ExploreConfig c = small_explore();
  c.random_actions = true;
  c.horizon = 80;
  OrbitTester tester{&actor, action_histogram(std::vector<int>{0, 1, 2}), 0.1, 6};
  ExploreSession s(w, det, actor, actor, tester, c);
  const auto reports = explore_and_test(s, 6);
  std::set<int> seen;
  std::size_t tests = 0;
  for (const auto& r : reports) {
    EXPECT_EQ(r.trace.size(), 80u);
    const std::size_t steps = run_length_decode(r.visited).size();
    EXPECT_EQ(steps, 80u + r.tests.size() * 6u);  // handoff steps are logged but not part of the horizon
    for (const auto& v : r.tests) {
      EXPECT_TRUE(seen.insert(v.ooi).second) << "ooi " << v.ooi << " tested twice";
      EXPECT_TRUE(w.oois()[static_cast<std::size_t>(v.ooi)].reachable);
    }
    tests += r.tests.size();
  }
  EXPECT_GT(tests, 0u);
}
