#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "grad_suite.hpp"
#include "ppgta/losses.hpp"
#include "ppgta/optim.hpp"

using namespace ppgta;
using namespace ppgta::testing;

using ppgta::testing::detail::refs;

TEST(Linear, GradientsMatchFiniteDifferences) {
  EXPECT_LE(linear_gradients().worst, 1e-3);
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  EXPECT_LE(conv_gradients().worst, 1e-3);
}

TEST(Conv2d, OutputExtentIsValidStrideTwo) {
  EXPECT_EQ(Conv2d::output_extent(32), 15u);
  EXPECT_EQ(Conv2d::output_extent(8), 3u);
  EXPECT_EQ(Conv2d::output_extent(3), 1u);
}

TEST(GruCell, StepGradientsMatchFiniteDifferences) {
  EXPECT_LE(gru_gradients().worst, 1e-3);
}

TEST(GruCell, SaturatedUpdateGateKeepsState) {
  GruCell gru("gru", 2, 3);
  // Large negative z bias drives the update gate to 0, so h' = h.
  for (std::size_t i = 0; i < 3; ++i) gru.b_x.value[i] = -60.0f;
  const std::vector<float> x{0.3f, -0.2f}, h{0.5f, -0.25f, 0.125f};
  const auto next = gru.step(x, h);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(next[i], h[i], 1e-6);
}

TEST(LayerNorm, GradientsMatchFiniteDifferences) {
  EXPECT_LE(layernorm_gradients().worst, 1e-3);
}

TEST(Divergence, ClosedFormCases) {
  const std::vector<double> p{0.2, 0.3, 0.5};
  EXPECT_NEAR(kl_divergence(p, p), 0.0, 1e-9);
  EXPECT_NEAR(js_divergence(p, p), 0.0, 1e-9);
  const std::vector<double> a{1.0, 0.0}, b{0.0, 1.0};
  EXPECT_NEAR(js_divergence(a, b), std::log(2.0), 1e-9);
  const std::vector<double> c{0.5, 0.5, 0.0, 0.0}, d{0.0, 0.0, 0.25, 0.75};
  EXPECT_NEAR(js_divergence(c, d), std::log(2.0), 1e-9);
}

TEST(Divergence, KlMatchesHandComputation) {
  const std::vector<double> p{0.5, 0.5}, q{0.25, 0.75};
  EXPECT_NEAR(kl_divergence(p, q), 0.5 * std::log(2.0) + 0.5 * std::log(0.5 / 0.75), 1e-12);
}

TEST(Divergence, RejectsUnnormalizedInputs) {
  const std::vector<double> p{0.5, 0.6}, q{0.5, 0.5};
  EXPECT_THROW(kl_divergence(p, q), ContractViolation);
}

TEST(CrossEntropy, UniformLogitsGiveLogNine) {
  const std::vector<float> logits(9, 0.37f);
  for (int a = 0; a < 9; ++a) EXPECT_NEAR(softmax_xent(logits, a).loss, std::log(9.0), 1e-6);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  const std::vector<float> logits{0.1f, -1.0f, 2.0f};
  const auto r = softmax_xent(logits, 2);
  const auto p = softmax(logits);
  EXPECT_NEAR(r.grad[0], p[0], 1e-7);
  EXPECT_NEAR(r.grad[2], p[2] - 1.0f, 1e-7);
}

TEST(Softmax, TemperatureSharpens) {
  const std::vector<float> logits{1.0f, 0.0f};
  EXPECT_GT(softmax(logits, 0.1f)[0], softmax(logits, 1.0f)[0]);
}

TEST(Optim, ClipGradNormRescalesToMax) {
  Parameter p("p", {2});
  p.grad[0] = 3.0f;
  p.grad[1] = 4.0f;
  const double before = clip_grad_norm({&p}, 1.0);
  EXPECT_NEAR(before, 5.0, 1e-6);
  EXPECT_NEAR(p.grad[0], 0.6f, 1e-6);
  EXPECT_NEAR(p.grad[1], 0.8f, 1e-6);
}

TEST(Optim, AdamFirstStepMovesByLearningRate) {
  Parameter p("p", {1});
  p.value[0] = 1.0f;
  p.grad[0] = 0.5f;
  AdamW opt({&p}, AdamWConfig{0.9, 0.999, 1e-8, 0.0});
  opt.step(0.1);
  EXPECT_NEAR(p.value[0], 0.9f, 1e-5);
}

TEST(Optim, ScheduleWarmsUpThenDecays) {
  LrSchedule s;
  EXPECT_NEAR(s.at(0), 2e-3, 1e-12);
  EXPECT_NEAR(s.at(10), 1e-2, 1e-12);
  EXPECT_NEAR(s.at(40), 1e-4, 1e-12);
  EXPECT_GT(s.at(20), s.at(30));
}

TEST(Optim, EmaUpdateBlends) {
  Parameter t("p", {1}), s("p", {1});
  t.value[0] = 1.0f;
  s.value[0] = 0.0f;
  ema_update({&t}, {&s}, 0.75);
  EXPECT_FLOAT_EQ(t.value[0], 0.75f);
}

TEST(Checkpoint, RoundTripsAndRejectsMissingTensors) {
  Rng rng = make_stream(5, "t");
  Linear a("fc", 3, 2), b("fc", 3, 2), other("other", 3, 2);
  a.init(rng);
  const auto path = std::filesystem::temp_directory_path() / "ppgta_ckpt_test.ckpt";
  ConstParamRefs ca;
  std::as_const(a).for_each_param([&](const Parameter& p) { ca.push_back(&p); });
  save_checkpoint(path, ca);
  load_checkpoint(path, refs(b));
  EXPECT_EQ(a.weight.value, b.weight.value);
  EXPECT_EQ(a.bias.value, b.bias.value);
  EXPECT_THROW(load_checkpoint(path, refs(other)), FormatError);
  std::filesystem::remove(path);
}

TEST(Tensor, CheckFiniteThrowsDivergence) {
  Tensor t({2}, 0.0f);
  t[1] = std::nanf("");
  EXPECT_THROW(t.check_finite("t"), TrainingDivergence);
}
