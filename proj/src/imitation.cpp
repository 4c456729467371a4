#include "ppgta/imitation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ppgta/losses.hpp"

namespace ppgta {

// ------------------------------------------------------------------ policy network

PolicyNet::PolicyNet(const std::string& prefix, const PolicyConfig& c)
    : config_(c),
      encoder_(prefix + ".enc", c.encoder),
      local_fwd_(prefix + ".local_fwd", static_cast<std::size_t>(c.encoder.embedding), static_cast<std::size_t>(c.local_hidden)),
      local_bwd_(prefix + ".local_bwd", static_cast<std::size_t>(c.encoder.embedding), static_cast<std::size_t>(c.local_hidden)),
      global_(prefix + ".global", static_cast<std::size_t>(c.encoder.embedding), static_cast<std::size_t>(c.global_hidden)),
      fc1_(prefix + ".fc1", static_cast<std::size_t>(2 * c.local_hidden + c.global_hidden), static_cast<std::size_t>(c.mlp1)),
      ln1_(prefix + ".ln1", static_cast<std::size_t>(c.mlp1)),
      fc2_(prefix + ".fc2", static_cast<std::size_t>(c.mlp1), static_cast<std::size_t>(c.mlp2)),
      ln2_(prefix + ".ln2", static_cast<std::size_t>(c.mlp2)),
      action_(prefix + ".action", static_cast<std::size_t>(c.mlp2), kActionCount),
      value_(prefix + ".value", static_cast<std::size_t>(c.mlp2), 1) {
  require(c.window >= 1, "PolicyNet: window must be at least 1");
  require(c.dropout >= 0.0f && c.dropout < 1.0f, "PolicyNet: dropout must lie in [0, 1)");
}

void PolicyNet::init(Rng& rng) {
  encoder_.init(rng);
  local_fwd_.init(rng);
  local_bwd_.init(rng);
  global_.init(rng);
  fc1_.init(rng);
  fc2_.init(rng);
  action_.init(rng);
  value_.init(rng);
}

void PolicyNet::zero_init() {
  for_each_param([](Parameter& p) { p.value.fill(0.0f); });
}

PolicyNet::Output PolicyNet::forward(const std::vector<std::span<const float>>& window,
                                     std::span<const float> global_prev, Rng* dropout_rng, Cache* cache) const {
  require(static_cast<int>(window.size()) == config_.window,
          "PolicyNet: window length " + std::to_string(window.size()) + " != K=" + std::to_string(config_.window));
  require(global_prev.size() == global_size(), "PolicyNet: global state width mismatch");
  const auto K = window.size();
  const auto L = static_cast<std::size_t>(config_.local_hidden);
  Cache local_cache;
  Cache& c = cache ? *cache : local_cache;
  c.fwd.resize(K);
  c.bwd.resize(K);

  std::vector<float> hf(L, 0.0f), hb(L, 0.0f);
  for (std::size_t i = 0; i < K; ++i) hf = local_fwd_.step(window[i], hf, &c.fwd[i]);
  for (std::size_t i = 0; i < K; ++i) hb = local_bwd_.step(window[K - 1 - i], hb, &c.bwd[i]);

  Output out;
  out.global = global_.step(window[K - 1], global_prev, &c.global);
  out.hc = hf;
  out.hc.insert(out.hc.end(), hb.begin(), hb.end());
  out.hc.insert(out.hc.end(), out.global.begin(), out.global.end());
  c.hc = out.hc;

  c.z1.assign(static_cast<std::size_t>(config_.mlp1), 0.0f);
  fc1_.forward(c.hc, c.z1);
  c.a1.assign(c.z1.size(), 0.0f);
  ln1_.forward(c.z1, c.a1, &c.ln1);
  relu_inplace(c.a1);
  c.d1 = c.a1;
  c.mask1.clear();
  if (dropout_rng && config_.dropout > 0.0f) {
    c.mask1 = dropout_mask(c.d1.size(), config_.dropout, *dropout_rng);
    for (std::size_t i = 0; i < c.d1.size(); ++i) c.d1[i] *= c.mask1[i];
  }

  c.z2.assign(static_cast<std::size_t>(config_.mlp2), 0.0f);
  fc2_.forward(c.d1, c.z2);
  c.a2.assign(c.z2.size(), 0.0f);
  ln2_.forward(c.z2, c.a2, &c.ln2);
  relu_inplace(c.a2);
  c.d2 = c.a2;
  c.mask2.clear();
  if (dropout_rng && config_.dropout > 0.0f) {
    c.mask2 = dropout_mask(c.d2.size(), config_.dropout, *dropout_rng);
    for (std::size_t i = 0; i < c.d2.size(); ++i) c.d2[i] *= c.mask2[i];
  }

  out.logits.assign(kActionCount, 0.0f);
  action_.forward(c.d2, out.logits);
  float v = 0.0f;
  value_.forward(c.d2, std::span<float>(&v, 1));
  out.value = v;
  return out;
}

void PolicyNet::backward(const Cache& c, std::span<const float> g_logits, std::span<const float> g_hc, float g_value,
                         std::span<const float> g_global_next, InputGrads* grads) {
  const auto K = c.fwd.size();
  const auto L = static_cast<std::size_t>(config_.local_hidden);
  const auto G = global_size();

  std::vector<float> gd2(c.d2.size(), 0.0f);
  if (!g_logits.empty()) action_.backward(c.d2, g_logits, gd2);
  if (g_value != 0.0f) {
    std::vector<float> tmp(c.d2.size());
    value_.backward(c.d2, std::span<const float>(&g_value, 1), tmp);
    for (std::size_t i = 0; i < tmp.size(); ++i) gd2[i] += tmp[i];
  }
  if (!c.mask2.empty()) {
    for (std::size_t i = 0; i < gd2.size(); ++i) gd2[i] *= c.mask2[i];
  }
  relu_backward(c.a2, gd2);
  std::vector<float> gz2(gd2.size());
  ln2_.backward(c.ln2, gd2, gz2);
  std::vector<float> gd1(c.d1.size());
  fc2_.backward(c.d1, gz2, gd1);
  if (!c.mask1.empty()) {
    for (std::size_t i = 0; i < gd1.size(); ++i) gd1[i] *= c.mask1[i];
  }
  relu_backward(c.a1, gd1);
  std::vector<float> gz1(gd1.size());
  ln1_.backward(c.ln1, gd1, gz1);
  std::vector<float> ghc(c.hc.size());
  fc1_.backward(c.hc, gz1, ghc);
  if (!g_hc.empty()) {
    for (std::size_t i = 0; i < ghc.size(); ++i) ghc[i] += g_hc[i];
  }

  std::vector<std::vector<float>> gwin;
  if (grads) gwin.assign(K, std::vector<float>(embedding_size(), 0.0f));
  std::vector<float> gx(embedding_size());

  // Forward-direction local GRU.
  std::vector<float> gh(ghc.begin(), ghc.begin() + static_cast<std::ptrdiff_t>(L));
  std::vector<float> gprev(L);
  for (std::size_t i = K; i-- > 0;) {
    local_fwd_.backward(c.fwd[i], gh, gx, gprev);
    if (grads) {
      for (std::size_t j = 0; j < gx.size(); ++j) gwin[i][j] += gx[j];
    }
    gh = gprev;
  }
  // Backward-direction local GRU consumed window[K-1-i] at step i.
  gh.assign(ghc.begin() + static_cast<std::ptrdiff_t>(L), ghc.begin() + static_cast<std::ptrdiff_t>(2 * L));
  for (std::size_t i = K; i-- > 0;) {
    local_bwd_.backward(c.bwd[i], gh, gx, gprev);
    if (grads) {
      for (std::size_t j = 0; j < gx.size(); ++j) gwin[K - 1 - i][j] += gx[j];
    }
    gh = gprev;
  }
  // Global GRU.
  std::vector<float> gg(ghc.begin() + static_cast<std::ptrdiff_t>(2 * L), ghc.end());
  if (!g_global_next.empty()) {
    for (std::size_t j = 0; j < G; ++j) gg[j] += g_global_next[j];
  }
  std::vector<float> gglobal_prev(G);
  global_.backward(c.global, gg, gx, gglobal_prev);
  if (grads) {
    for (std::size_t j = 0; j < gx.size(); ++j) gwin[K - 1][j] += gx[j];
    grads->window = std::move(gwin);
    grads->global_prev = std::move(gglobal_prev);
  }
}

std::vector<std::size_t> window_indices(std::size_t t, int k) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const long long i = static_cast<long long>(t) - (k - 1) + j;
    idx[static_cast<std::size_t>(j)] = static_cast<std::size_t>(std::max(0LL, i));
  }
  return idx;
}

// ------------------------------------------------------------------ loss

ImitationLoss imitation_loss(std::span<const float> student_logits, std::span<const float> student_hc,
                             std::span<const float> teacher_hc, int expert_action, const ImitationLossConfig& config) {
  require(config.lambda >= 0.0, "imitation_loss: lambda must be non-negative");
  require(config.tau_teacher > 0.0 && config.tau_student > 0.0, "imitation_loss: temperatures must be positive");
  require(student_hc.size() == teacher_hc.size(), "imitation_loss: h^c width mismatch");
  const XentResult xent = softmax_xent(student_logits, expert_action);
  ImitationLoss out;
  out.xent = xent.loss;
  out.g_logits = xent.grad;
  out.g_hc.assign(student_hc.size(), 0.0f);
  if (config.lambda == 0.0) {
    out.loss = out.xent;
    return out;
  }
  const auto pt = softmax(teacher_hc, static_cast<float>(config.tau_teacher));
  const auto ls = log_softmax(student_hc, static_cast<float>(config.tau_student));
  double ce = 0.0;
  for (std::size_t i = 0; i < pt.size(); ++i) ce -= static_cast<double>(pt[i]) * ls[i];
  out.consistency = ce;
  out.loss = out.xent + config.lambda * ce;
  const double scale = config.lambda / config.tau_student;
  for (std::size_t i = 0; i < pt.size(); ++i) {
    out.g_hc[i] = static_cast<float>(scale * (std::exp(static_cast<double>(ls[i])) - pt[i]));
  }
  return out;
}

// ------------------------------------------------------------------ sequence training

Frame student_view(const Detector& detector, const Frame& frame, const AgentPose& pose) {
  return mask_with(frame, detector.detect(frame, pose));
}

TrajectoryViews trajectory_views(const Trajectory& traj, const Detector& detector) {
  TrajectoryViews v;
  v.actions = traj.actions;
  for (std::size_t s = 0; s < traj.frames.size(); ++s) {
    const AgentPose pose = s < traj.poses.size() ? traj.poses[s] : AgentPose{};
    v.masked.push_back(frame_to_input(student_view(detector, traj.frames[s], pose)));
    v.full.push_back(frame_to_input(traj.frames[s]));
  }
  return v;
}

EmbeddedTrajectory embed_views(const TrajectoryViews& views, const Encoder& student_encoder,
                               const Encoder& teacher_encoder) {
  EmbeddedTrajectory e;
  e.actions = views.actions;
  for (std::size_t s = 0; s < views.masked.size(); ++s) {
    e.student.emplace_back(student_encoder.embedding_size());
    student_encoder.forward(views.masked[s], e.student.back(), nullptr);
    e.teacher.emplace_back(teacher_encoder.embedding_size());
    teacher_encoder.forward(views.full[s], e.teacher.back(), nullptr);
  }
  return e;
}

namespace {

std::vector<std::span<const float>> gather(const std::vector<std::vector<float>>& emb, std::size_t t, int k) {
  std::vector<std::span<const float>> w;
  for (std::size_t i : window_indices(t, k)) w.emplace_back(emb[i]);
  return w;
}

}  // namespace

SequenceStats imitation_sequence(PolicyNet& student, const PolicyNet* teacher, const EmbeddedTrajectory& traj,
                                 const ImitationLossConfig& loss_config, Rng* dropout_rng, bool accumulate,
                                 std::vector<std::vector<float>>* g_student_embeddings) {
  const std::size_t T = traj.actions.size();
  require(traj.student.size() >= T, "imitation_sequence: fewer embeddings than actions");
  const int K = student.config().window;
  SequenceStats stats;
  std::vector<PolicyNet::Cache> caches(accumulate ? T : 0);
  std::vector<ImitationLoss> losses(accumulate ? T : 0);
  std::vector<float> hs(student.global_size(), 0.0f), ht(student.global_size(), 0.0f);
  PolicyNet::Cache scratch;
  for (std::size_t t = 0; t < T; ++t) {
    const auto out = student.forward(gather(traj.student, t, K), hs, dropout_rng, accumulate ? &caches[t] : &scratch);
    hs = out.global;
    std::vector<float> teacher_hc;
    ImitationLossConfig lc = loss_config;
    if (teacher) {
      const auto tout = teacher->forward(gather(traj.teacher, t, K), ht, nullptr, nullptr);
      ht = tout.global;
      teacher_hc = tout.hc;
    } else {
      lc.lambda = 0.0;
      teacher_hc.assign(out.hc.size(), 0.0f);
    }
    ImitationLoss l = imitation_loss(out.logits, out.hc, teacher_hc, traj.actions[t], lc);
    if (!std::isfinite(l.loss)) {
      throw TrainingDivergence("imitation: non-finite loss at step " + std::to_string(t));
    }
    stats.loss += l.loss;
    stats.xent += l.xent;
    stats.consistency += l.consistency;
    stats.correct += static_cast<int>(std::max_element(out.logits.begin(), out.logits.end()) - out.logits.begin()) ==
                     traj.actions[t];
    ++stats.steps;
    if (accumulate) losses[t] = std::move(l);
  }
  if (!accumulate) return stats;

  if (g_student_embeddings) {
    g_student_embeddings->assign(traj.student.size(), std::vector<float>(traj.student[0].size(), 0.0f));
  }
  std::vector<float> g_global_next;
  PolicyNet::InputGrads grads;
  for (std::size_t t = T; t-- > 0;) {
    student.backward(caches[t], losses[t].g_logits, losses[t].g_hc, 0.0f, g_global_next, &grads);
    g_global_next = grads.global_prev;
    if (g_student_embeddings) {
      const auto idx = window_indices(t, K);
      for (std::size_t j = 0; j < idx.size(); ++j) {
        auto& dst = (*g_student_embeddings)[idx[j]];
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += grads.window[j][i];
      }
    }
  }
  return stats;
}

// ------------------------------------------------------------------ histograms and verdicts

ActionHistogram action_histogram(std::span<const int> actions, double smoothing) {
  ActionHistogram h;
  h.fill(smoothing);
  for (int a : actions) {
    require(a >= 0 && a < kActionCount, "action_histogram: action id out of range");
    h[static_cast<std::size_t>(a)] += 1.0;
  }
  const double total = std::accumulate(h.begin(), h.end(), 0.0);
  require(total > 0.0, "action_histogram: empty histogram without smoothing");
  for (double& v : h) v /= total;
  return h;
}

ActionHistogram corpus_histogram(const std::vector<Trajectory>& corpus, ExpertKind kind, double smoothing) {
  std::vector<int> all;
  for (const Trajectory& t : corpus) {
    if (t.kind == kind) all.insert(all.end(), t.actions.begin(), t.actions.end());
  }
  return action_histogram(all, smoothing);
}

TestVerdict evaluate_test_execution(std::span<const int> rollout_actions, const ActionHistogram& expert,
                                    double success_threshold) {
  const ActionHistogram h = action_histogram(rollout_actions);
  TestVerdict v;
  v.js = js_divergence(h, expert);
  v.success = v.js <= success_threshold;
  return v;
}

int median_orbit_length(const std::vector<Trajectory>& corpus) {
  std::vector<int> lens;
  for (const Trajectory& t : corpus) {
    if (t.kind == ExpertKind::OrbitTest) lens.push_back(static_cast<int>(t.size()));
  }
  require(!lens.empty(), "median_orbit_length: corpus has no orbit trajectories");
  std::sort(lens.begin(), lens.end());
  const std::size_t m = lens.size() / 2;
  return lens.size() % 2 ? lens[m] : (lens[m - 1] + lens[m]) / 2;
}

int orbit_budget(const std::vector<Trajectory>& corpus) {
  return static_cast<int>(std::lround(1.5 * median_orbit_length(corpus)));
}

// ------------------------------------------------------------------ rollouts

PolicyRunner::PolicyRunner(const PolicyNet& policy, const RolloutContext& ctx) : policy_(policy), ctx_(ctx) { reset(); }

void PolicyRunner::reset() {
  window_.clear();
  global_.assign(policy_.global_size(), 0.0f);
}

std::vector<float> PolicyRunner::observe(const Frame& frame, const AgentPose& pose) {
  require(ctx_.detector != nullptr, "PolicyRunner: context lacks a detector");
  return observe_embedding(policy_.encoder().encode(student_view(*ctx_.detector, frame, pose)));
}

std::vector<float> PolicyRunner::observe_embedding(std::span<const float> embedding) {
  const auto K = static_cast<std::size_t>(policy_.config().window);
  if (window_.empty()) {
    window_.assign(K, std::vector<float>(embedding.begin(), embedding.end()));
  } else {
    window_.pop_front();
    window_.emplace_back(embedding.begin(), embedding.end());
  }
  std::vector<std::span<const float>> w(window_.begin(), window_.end());
  last_ = policy_.forward(w, global_, nullptr, nullptr);
  global_ = last_.global;
  return softmax(last_.logits);
}

int sample_index(std::span<const float> probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

Trajectory rollout_policy(const PolicyNet& policy, const RolloutContext& ctx, const AgentPose& start, int steps,
                          Rng* rng) {
  require(ctx.world && ctx.detector, "rollout_policy: incomplete context");
  Trajectory traj;
  traj.kind = ExpertKind::OrbitTest;
  traj.world_seed = ctx.world->spec().seed;
  traj.start = start;
  PolicyRunner runner(policy, ctx);
  AgentPose pose = start;
  for (int s = 0; s < steps; ++s) {
    Frame frame = render(*ctx.world, pose);
    const auto probs = runner.observe(frame, pose);
    const int a = rng ? sample_index(probs, *rng)
                      : static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    traj.poses.push_back(pose);
    traj.frames.push_back(std::move(frame));
    traj.actions.push_back(a);
    pose = transition(*ctx.world, pose, a);
  }
  return traj;
}

double mean_rollout_js(const PolicyNet& policy, const RolloutContext& ctx, const std::vector<Trajectory>& corpus,
                       const std::vector<int>& members, const ActionHistogram& expert, int budget) {
  require(!members.empty(), "mean_rollout_js: no reference trajectories");
  double sum = 0.0;
  for (int m : members) {
    const Trajectory roll = rollout_policy(policy, ctx, corpus.at(static_cast<std::size_t>(m)).start, budget);
    sum += evaluate_test_execution(roll.actions, expert, 0.0).js;
  }
  return sum / static_cast<double>(members.size());
}

// ------------------------------------------------------------------ training driver

ImitationResult train_imitation(const std::vector<Trajectory>& corpus, const std::vector<int>& train,
                                const std::vector<int>& val, const Encoder& encoder, const RolloutContext& ctx,
                                const PolicyConfig& policy_config, const ImitationConfig& config,
                                const std::vector<int>& threshold_reference) {
  require(!train.empty(), "train_imitation: empty training split");
  require(!val.empty(), "train_imitation: empty validation split");
  require(ctx.detector != nullptr, "train_imitation: context lacks a detector");
  require(config.ema_momentum >= 0.0 && config.ema_momentum < 1.0, "train_imitation: EMA momentum must lie in [0, 1)");

  std::vector<TrajectoryViews> views(corpus.size());
  for (const auto* members : {&train, &val}) {
    for (int m : *members) {
      auto& v = views[static_cast<std::size_t>(m)];
      if (v.actions.empty()) v = trajectory_views(corpus.at(static_cast<std::size_t>(m)), *ctx.detector);
    }
  }

  ImitationResult result;
  result.student = PolicyNet("policy", policy_config);
  Rng init_rng = make_stream(config.seed, "imitation.init");
  result.student.init(init_rng);
  copy_values(params_of(encoder), params_of(result.student.encoder()));
  result.teacher = result.student;
  ParamRefs sparams;
  if (config.finetune_encoder) {
    sparams = params_of(result.student);
  } else {
    result.student.for_each_trunk_param([&](Parameter& p) { sparams.push_back(&p); });
  }
  ParamRefs tparams = params_of(result.teacher);
  AdamW opt(sparams, config.adamw);
  Rng shuffle_rng = make_stream(config.seed, "imitation.shuffle");
  Rng dropout_rng = make_stream(config.seed, "imitation.dropout");

  // With a frozen encoder the embeddings never change.
  std::vector<EmbeddedTrajectory> frozen(corpus.size());
  if (!config.finetune_encoder) {
    for (const auto* members : {&train, &val}) {
      for (int m : *members) {
        frozen[static_cast<std::size_t>(m)] =
            embed_views(views[static_cast<std::size_t>(m)], result.student.encoder(), result.student.encoder());
      }
    }
  }

  PolicyNet best = result.student;
  result.best_val_xent = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<int> order = train;
  std::vector<Encoder::Cache> enc_caches;
  std::vector<std::vector<float>> g_emb;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss = 0.0;
    int steps = 0, pending = 0;
    zero_grad(sparams);
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto m = static_cast<std::size_t>(order[i]);
      SequenceStats st;
      if (config.finetune_encoder) {
        const TrajectoryViews& v = views[m];
        EmbeddedTrajectory et;
        et.actions = v.actions;
        enc_caches.resize(v.masked.size());
        for (std::size_t s = 0; s < v.masked.size(); ++s) {
          et.student.emplace_back(result.student.embedding_size());
          result.student.encoder().forward(v.masked[s], et.student.back(), &enc_caches[s]);
          et.teacher.emplace_back(result.teacher.embedding_size());
          result.teacher.encoder().forward(v.full[s], et.teacher.back(), nullptr);
        }
        st = imitation_sequence(result.student, &result.teacher, et, config.loss, &dropout_rng, true, &g_emb);
        for (std::size_t s = 0; s < v.masked.size(); ++s) result.student.encoder().backward(enc_caches[s], g_emb[s]);
      } else {
        st = imitation_sequence(result.student, &result.teacher, frozen[m], config.loss, &dropout_rng, true);
      }
      loss += st.loss;
      steps += st.steps;
      pending += st.steps;
      if (pending >= config.batch || i + 1 == order.size()) {
        const double frac = static_cast<double>(i + 1) / static_cast<double>(order.size());
        opt.step(config.schedule.at(epoch + frac), 1.0f / static_cast<float>(pending));
        zero_grad(sparams);
        ema_update(tparams, params_of(std::as_const(result.student)), config.ema_momentum);
        pending = 0;
      }
    }
    result.train_loss.push_back(loss / std::max(steps, 1));

    double vx = 0.0;
    int vsteps = 0;
    for (int m : val) {
      const auto mi = static_cast<std::size_t>(m);
      const EmbeddedTrajectory et = config.finetune_encoder
                                        ? embed_views(views[mi], result.student.encoder(), result.student.encoder())
                                        : frozen[mi];
      const SequenceStats st = imitation_sequence(result.student, nullptr, et, config.loss, nullptr, false);
      vx += st.xent;
      vsteps += st.steps;
    }
    vx /= std::max(vsteps, 1);
    result.val_xent.push_back(vx);
    if (vx < result.best_val_xent) {
      result.best_val_xent = vx;
      result.best_epoch = epoch;
      best = result.student;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  result.student = best;

  if (ctx.world) {
    const std::vector<int>& ref = threshold_reference.empty() ? val : threshold_reference;
    const ExpertKind kind = corpus.at(static_cast<std::size_t>(ref.front())).kind;
    const ActionHistogram expert = corpus_histogram(corpus, kind);
    const int budget = kind == ExpertKind::OrbitTest ? orbit_budget(corpus)
                                                     : static_cast<int>(corpus.at(static_cast<std::size_t>(ref.front())).size());
    result.success_threshold = mean_rollout_js(result.student, ctx, corpus, ref, expert, budget);
  }
  return result;
}

}  // namespace ppgta
