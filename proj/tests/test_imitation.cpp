#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "grad_suite.hpp"
#include "ppgta/imitation.hpp"
#include "ppgta/losses.hpp"

using namespace ppgta;
using namespace ppgta::testing;

namespace {

PolicyConfig tiny_policy() { return tiny_student(); }

}  // namespace

TEST(Encoder, GradientsMatchFiniteDifferences) {
  EXPECT_LE(encoder_gradients().worst, 1e-3);
}

TEST(PolicyNet, FullStudentGradientsOnSmallFrames) {
  const FdReport r = student_gradients();
  EXPECT_LE(r.worst_resolved, 1e-3);
  EXPECT_LE(r.worst, 0.1);  // entries sitting on a kink: right sign and rough size
  EXPECT_GE(r.resolved * 4, r.total * 3) << r.resolved << " of " << r.total;
}

TEST(PolicyNet, TrunkParamsExcludeEncoder) {
  PolicyNet net("policy", tiny_policy());
  std::size_t all = 0, trunk = 0, enc = 0;
  net.for_each_param([&](Parameter&) { ++all; });
  net.for_each_trunk_param([&](Parameter&) { ++trunk; });
  net.encoder().for_each_param([&](Parameter&) { ++enc; });
  EXPECT_EQ(all, trunk + enc);
}

TEST(ImitationLoss, LambdaZeroIsPlainCrossEntropy) {
  Rng rng = make_stream(3, "t");
  const auto logits = random_vector(kActionCount, rng, 2.0);
  const auto hc = random_vector(10, rng), teacher = random_vector(10, rng);
  ImitationLossConfig c;
  c.lambda = 0.0;
  for (int a = 0; a < kActionCount; ++a) {
    const ImitationLoss l = imitation_loss(logits, hc, teacher, a, c);
    const XentResult x = softmax_xent(logits, a);
    EXPECT_EQ(l.loss, x.loss);
    EXPECT_EQ(l.g_logits, x.grad);
  }
}

TEST(ImitationLoss, GradientsMatchFiniteDifferences) {
  EXPECT_LE(imitation_loss_gradients().worst, 1e-3);
}

TEST(Window, PadsWithFirstFrame) {
  EXPECT_EQ(window_indices(0, 4), (std::vector<std::size_t>{0, 0, 0, 0}));
  EXPECT_EQ(window_indices(2, 4), (std::vector<std::size_t>{0, 0, 1, 2}));
  EXPECT_EQ(window_indices(9, 4), (std::vector<std::size_t>{6, 7, 8, 9}));
}

TEST(TestExecution, JsAgainstExpertHistogram) {
  const std::vector<int> actions{2, 5, 2, 5, 2, 5};
  const ActionHistogram expert = action_histogram(actions);
  const TestVerdict same = evaluate_test_execution(actions, expert, 0.0);
  EXPECT_NEAR(same.js, 0.0, 1e-12);
  EXPECT_TRUE(same.success);
  const std::vector<int> other{0, 0, 0, 0, 0, 0};
  const TestVerdict diff = evaluate_test_execution(other, expert, 0.01);
  EXPECT_GT(diff.js, 0.01);
  EXPECT_FALSE(diff.success);
}

TEST(Corpus, SplitIsSeventyTenTwentyPerKind) {
  std::vector<Trajectory> corpus(200);
  for (std::size_t i = 0; i < corpus.size(); ++i) corpus[i].kind = i < 150 ? ExpertKind::OrbitTest : ExpertKind::PathFollow;
  const CorpusSplit s = split_corpus(corpus, 3);
  EXPECT_EQ(s.train.size(), 140u);
  EXPECT_EQ(s.val.size(), 20u);
  EXPECT_EQ(s.test.size(), 40u);
  std::set<int> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  EXPECT_EQ(all.size(), 200u);
}

TEST(MaskChoice, FollowsProbability) {
  Rng rng = make_stream(5, "mask");
  int masked = 0, prev = 0;
  for (int i = 0; i < 20000; ++i) {
    const int c = draw_mask_choice(rng, 0.5);
    masked += c >= 0 ? 1 : 0;
    prev += c == 0 ? 1 : 0;
  }
  EXPECT_NEAR(masked / 20000.0, 0.5, 0.02);
  EXPECT_NEAR(prev / static_cast<double>(masked), 0.5, 0.03);
  Rng never = make_stream(6, "mask");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(draw_mask_choice(never, 0.0), -1);
}

TEST(InverseDynamics, PairsSkipTheFinalFrame) {
  const World w = generate_world(WorldSpec{7});
  const auto demos = collect_demonstrations(w, {3, 2, 12}, 11);
  const CorpusSplit s = split_corpus(demos, 3);
  const InvDynDataset d = build_invdyn_dataset(demos, s);
  std::size_t expected = 0;
  for (int i : s.train) expected += demos[static_cast<std::size_t>(i)].frames.size() - 1;
  EXPECT_EQ(d.train.size(), expected);
}
