#include "ppgta/explore.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ppgta/losses.hpp"

namespace ppgta {

// ------------------------------------------------------------------ PPO maths

PpoSampleLoss ppo_sample_loss(std::span<const float> logits, float value, int action, double old_log_prob,
                              double advantage, double ret, const PpoConfig& config) {
  require(action >= 0 && static_cast<std::size_t>(action) < logits.size(), "ppo_sample_loss: action out of range");
  const std::vector<float> logp = log_softmax(logits);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::exp(static_cast<double>(logp[i]));

  PpoSampleLoss out;
  out.ratio = std::exp(static_cast<double>(logp[static_cast<std::size_t>(action)]) - old_log_prob);
  if (!std::isfinite(out.ratio)) {
    throw TrainingDivergence("ppo: probability ratio is not finite (log-prob " +
                             std::to_string(logp[static_cast<std::size_t>(action)]) + ", old " +
                             std::to_string(old_log_prob) + ")");
  }
  const double clipped_ratio = std::clamp(out.ratio, 1.0 - config.clip, 1.0 + config.clip);
  const double unclipped = out.ratio * advantage;
  const double clipped = clipped_ratio * advantage;
  out.clipped = clipped < unclipped;
  out.surrogate = std::min(unclipped, clipped);

  double entropy = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) entropy -= p[i] * static_cast<double>(logp[i]);
  out.entropy = entropy;
  const double verr = static_cast<double>(value) - ret;
  out.value_loss = verr * verr;
  out.loss = -out.surrogate + config.value_coef * out.value_loss - config.entropy_coef * entropy;

  // d ratio / d logit_j = ratio (1[j=a] - p_j); the clipped branch is constant.
  out.g_logits.assign(logits.size(), 0.0f);
  for (std::size_t j = 0; j < p.size(); ++j) {
    double g = 0.0;
    if (!out.clipped) g -= advantage * out.ratio * ((static_cast<int>(j) == action ? 1.0 : 0.0) - p[j]);
    // d(-c H)/d logit_j = c p_j (log p_j + H)
    g += config.entropy_coef * p[j] * (static_cast<double>(logp[j]) + entropy);
    out.g_logits[j] = static_cast<float>(g);
  }
  out.g_value = static_cast<float>(2.0 * config.value_coef * verr);
  return out;
}

std::vector<double> gae_advantages(std::span<const double> rewards, std::span<const double> values,
                                   std::span<const std::uint8_t> done, double last_value, double gamma,
                                   double lambda) {
  require(rewards.size() == values.size() && rewards.size() == done.size(), "gae_advantages: length mismatch");
  std::vector<double> adv(rewards.size());
  double running = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    const double next_value = t + 1 < rewards.size() ? values[t + 1] : last_value;
    const double nonterminal = done[t] ? 0.0 : 1.0;
    const double delta = rewards[t] + gamma * next_value * nonterminal - values[t];
    running = delta + gamma * lambda * nonterminal * running;
    adv[t] = running;
  }
  return adv;
}

void normalize_advantages(std::vector<double>& adv) {
  if (adv.empty()) return;
  const double n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : adv) a = sd > 1e-12 ? (a - mean) / sd : 0.0;
}

void prepare_batch(RolloutBatch& batch, const PpoConfig& config) {
  std::vector<double> rewards, values;
  std::vector<std::uint8_t> done;
  for (const Transition& tr : batch.steps) {
    rewards.push_back(tr.reward);
    values.push_back(tr.value);
    done.push_back(tr.done ? 1 : 0);
  }
  batch.advantages = gae_advantages(rewards, values, done, 0.0, config.gamma, config.gae_lambda);
  batch.returns.resize(batch.advantages.size());
  for (std::size_t t = 0; t < values.size(); ++t) batch.returns[t] = batch.advantages[t] + values[t];
  normalize_advantages(batch.advantages);
  batch.prepared = true;
}

PpoStats ppo_update(PolicyNet& actor, AdamW& optimizer, RolloutBatch& batch, const PpoConfig& config, Rng& rng) {
  require(batch.prepared, "ppo_update: advantages not prepared");
  PpoStats stats;
  const std::size_t n = batch.steps.size();
  if (n == 0) return stats;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const std::size_t mb = static_cast<std::size_t>(std::max(1, config.minibatch));
  std::size_t samples = 0, clipped = 0;
  PolicyNet::Cache cache;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t end = std::min(n, start + mb);
      zero_grad(optimizer.params());
      for (std::size_t k = start; k < end; ++k) {
        const Transition& tr = batch.steps[order[k]];
        std::vector<std::span<const float>> window(tr.window.begin(), tr.window.end());
        const PolicyNet::Output out = actor.forward(window, tr.global_prev, nullptr, &cache);
        const PpoSampleLoss l = ppo_sample_loss(out.logits, out.value, tr.action, tr.log_prob,
                                                batch.advantages[order[k]], batch.returns[order[k]], config);
        if (!std::isfinite(l.loss)) throw TrainingDivergence("ppo: loss is not finite");
        actor.backward(cache, l.g_logits, {}, l.g_value, {}, nullptr);
        stats.policy_loss -= l.surrogate;
        stats.value_loss += l.value_loss;
        stats.entropy += l.entropy;
        clipped += l.clipped ? 1 : 0;
        ++samples;
      }
      const float scale = 1.0f / static_cast<float>(end - start);
      for (Parameter* p : optimizer.params()) {
        for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] *= scale;
      }
      if (config.max_grad_norm > 0.0) clip_grad_norm(optimizer.params(), config.max_grad_norm);
      optimizer.step(config.lr);
      ++stats.updates;
    }
  }
  const double s = static_cast<double>(samples);
  stats.policy_loss /= s;
  stats.value_loss /= s;
  stats.entropy /= s;
  stats.clip_fraction = static_cast<double>(clipped) / s;
  return stats;
}

// ------------------------------------------------------------------ reports

std::vector<TileRun> run_length_encode(const std::vector<TilePos>& tiles) {
  std::vector<TileRun> runs;
  for (const TilePos& t : tiles) {
    if (!runs.empty() && runs.back().tile == t) {
      ++runs.back().count;
    } else {
      runs.push_back({t, 1});
    }
  }
  return runs;
}

std::vector<TilePos> run_length_decode(const std::vector<TileRun>& runs) {
  std::vector<TilePos> out;
  for (const TileRun& r : runs) out.insert(out.end(), static_cast<std::size_t>(r.count), r.tile);
  return out;
}

int associate_detection(const RenderInfo& info, const BoundingBox& box) {
  int best = -1;
  double best_iou = 0.0;
  for (const VisibleOoi& v : info.visible) {
    const double o = iou(box, BoundingBox{v.x0, v.y0, v.x1, v.y1, 0, 1.0});
    if (o > best_iou) {
      best_iou = o;
      best = v.ooi_index;
    }
  }
  return best;
}

// ------------------------------------------------------------------ session

namespace {

struct Observation {
  Frame frame;
  RenderInfo info;
  DetectionSet detections;
};

Observation observe(const World& world, const Detector& detector, const AgentPose& pose, int frame_id) {
  Observation o;
  o.frame = render(world, pose, &o.info);
  o.detections = detector.detect(o.frame, pose, frame_id);
  return o;
}

std::vector<float> embed(const Encoder& encoder, const Frame& frame) {
  std::vector<float> e(encoder.embedding_size());
  encoder.forward(frame_to_input(frame), e, nullptr);
  return e;
}

// Sliding window of embeddings plus the global recurrent state of one PolicyNet.
struct Memory {
  std::deque<std::vector<float>> window;
  std::vector<float> global;

  void reset(const PolicyNet& net) {
    window.clear();
    global.assign(net.global_size(), 0.0f);
  }
  void push(const PolicyNet& net, std::vector<float> e) {
    const auto K = static_cast<std::size_t>(net.config().window);
    if (window.empty()) {
      window.assign(K, e);
    } else {
      window.pop_front();
      window.push_back(std::move(e));
    }
  }
  PolicyNet::Output step(const PolicyNet& net) {
    std::vector<std::span<const float>> w(window.begin(), window.end());
    PolicyNet::Output out = net.forward(w, global, nullptr, nullptr);
    global = out.global;
    return out;
  }
};

}  // namespace

ExploreSession::ExploreSession(const World& world, const Detector& detector, const PolicyNet& actor_init,
                               const PolicyNet& path_policy, const OrbitTester& tester, const ExploreConfig& config)
    : world_(world),
      detector_(detector),
      actor_(std::make_unique<PolicyNet>(actor_init)),
      path_policy_(path_policy),
      tester_(tester),
      config_(config),
      novelty_(config.novelty),
      alpha_(config.alpha),
      spawn_rng_(make_stream(config.seed, "explore.spawn")),
      action_rng_(make_stream(config.seed, "explore.action")),
      novelty_rng_(make_stream(config.seed, "explore.novelty")),
      ppo_rng_(make_stream(config.seed, "explore.ppo")) {
  require(config.horizon > 0, "ExploreSession: horizon must be positive");
  require(config.novelty_train_every > 0, "ExploreSession: novelty_train_every must be positive");
  require(config.fixed_alpha >= 0.0 && config.fixed_alpha <= 1.0, "ExploreSession: fixed alpha outside [0, 1]");
  require(!world.spawn_tiles().empty(), "ExploreSession: world has no spawn tiles");
  ParamRefs trunk;
  actor_->for_each_trunk_param([&](Parameter& p) { trunk.push_back(&p); });
  optimizer_ = std::make_unique<AdamW>(trunk, AdamWConfig{});
}

int ExploreSession::choose_action(std::span<const float> probs) {
  if (config_.random_actions) return uniform_int(action_rng_, 0, kActionCount - 1);
  return sample_index(probs, action_rng_);
}

void ExploreSession::test_ooi(int ooi, AgentPose& pose, int episode, EpisodeReport& report,
                              std::vector<TilePos>& visited) {
  RolloutContext ctx{&world_, &detector_};
  PolicyRunner runner(*tester_.policy, ctx);
  std::vector<int> actions;
  for (int s = 0; s < tester_.budget; ++s) {
    visited.push_back({pose.x, pose.y});
    const Frame frame = render(world_, pose);
    const std::vector<float> probs = runner.observe(frame, pose);
    const int a = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    actions.push_back(a);
    pose = transition(world_, pose, a);
  }
  const TestVerdict v = evaluate_test_execution(actions, tester_.expert, tester_.success_threshold);
  report.tests.push_back({ooi, v.success, v.js, episode});
  tested_.insert(ooi);
}

EpisodeReport ExploreSession::run_episode(int episode, RolloutBatch* batch) {
  EpisodeReport report;
  report.episode = episode;
  report.world_seed = world_.spec().seed;
  const auto& spawns = world_.spawn_tiles();
  report.spawn = spawns[static_cast<std::size_t>(uniform_int(spawn_rng_, 0, static_cast<int>(spawns.size()) - 1))];
  AgentPose pose{report.spawn.x, report.spawn.y, uniform_int(spawn_rng_, 0, 7), 0};

  alpha_.reset();
  style_.reset();
  Memory actor_mem, pref_mem;
  actor_mem.reset(*actor_);
  pref_mem.reset(path_policy_);
  std::vector<TilePos> visited;
  const double frame_area = 32.0 * 32.0;
  const bool learn_rewards = !config_.random_actions;

  int frame_id = 0;
  Observation obs = observe(world_, detector_, pose, frame_id++);
  for (int t = 0; t < config_.horizon; ++t) {
    // Test trigger: a large enough detection of an untested OOI hands control to the orbit policy.
    if (tester_.policy) {
      std::vector<const BoundingBox*> boxes;
      for (const BoundingBox& b : obs.detections.boxes) boxes.push_back(&b);
      std::stable_sort(boxes.begin(), boxes.end(),
                       [](const BoundingBox* a, const BoundingBox* b) { return a->area() > b->area(); });
      for (const BoundingBox* b : boxes) {
        if (b->area() < config_.trigger_area * frame_area) break;
        const int ooi = associate_detection(obs.info, *b);
        if (ooi < 0 || tested_.count(ooi)) continue;
        AgentPose test_pose = pose;
        test_ooi(ooi, test_pose, episode, report, visited);
        if (!config_.resume_at_trigger) {
          pose = test_pose;
          obs = observe(world_, detector_, pose, frame_id++);
          actor_mem.window.clear();
          pref_mem.window.clear();
        }
        break;
      }
    }

    visited.push_back({pose.x, pose.y});
    const Frame student = mask_with(obs.frame, obs.detections);
    Transition tr;
    std::vector<float> probs_e(kActionCount, 1.0f / kActionCount), probs_p = probs_e;
    PolicyNet::Output out_e;
    if (!config_.random_actions) {
      actor_mem.push(*actor_, embed(actor_->encoder(), student));
      if (batch) {
        for (const auto& e : actor_mem.window) tr.window.push_back(e);
        tr.global_prev = actor_mem.global;
      }
      out_e = actor_mem.step(*actor_);
      probs_e = softmax(out_e.logits);
      pref_mem.push(path_policy_, embed(path_policy_.encoder(), student));
      probs_p = softmax(pref_mem.step(path_policy_).logits);
    }
    const int action = choose_action(probs_e);
    pose = transition(world_, pose, action);
    obs = observe(world_, detector_, pose, frame_id++);

    TraceRow row;
    row.t = t;
    if (learn_rewards) {
      // r^e scores the state the action led to.
      const std::vector<float> nov_input = frame_to_input(preprocess(obs.frame, obs.detections));
      row.r_e_raw = novelty_.reward(nov_input);
      novelty_.observe(nov_input);
      novelty_std_.update(row.r_e_raw);
      row.r_e = config_.normalize_novelty ? novelty_std_.normalize(row.r_e_raw) : row.r_e_raw;
      row.alpha = config_.alpha_mode == AlphaMode::Adaptive ? alpha_.update(row.r_e) : config_.fixed_alpha;
      row.r_p = style_reward(style_, probs_e, probs_p);
      row.r_c = combined_reward(row.alpha, row.r_p, row.r_e);
      if (++env_steps_ % config_.novelty_train_every == 0) novelty_.train(1, novelty_rng_);
    }
    report.trace.push_back(row);

    if (batch) {
      tr.action = action;
      tr.log_prob = std::log(std::max(static_cast<double>(probs_e[static_cast<std::size_t>(action)]), 1e-30));
      tr.value = out_e.value;
      tr.reward = row.r_c;
      tr.done = t + 1 == config_.horizon;
      batch->steps.push_back(std::move(tr));
    }
  }
  report.visited = run_length_encode(visited);
  return report;
}

PpoStats ExploreSession::update(RolloutBatch& batch) {
  if (!batch.prepared) prepare_batch(batch, config_.ppo);
  return ppo_update(*actor_, *optimizer_, batch, config_.ppo, ppo_rng_);
}

RolloutBatch collect_rollout(ExploreSession& session, int episode, EpisodeReport* report) {
  RolloutBatch batch;
  EpisodeReport r = session.run_episode(episode, &batch);
  prepare_batch(batch, session.config().ppo);
  if (report) *report = std::move(r);
  return batch;
}

std::vector<PpoStats> train_explorer(ExploreSession& session, int episodes) {
  std::vector<PpoStats> stats;
  if (session.config().random_actions) return stats;
  for (int e = 0; e < episodes; ++e) {
    session.reset_tested();
    RolloutBatch batch = collect_rollout(session, e);
    stats.push_back(session.update(batch));
  }
  session.reset_tested();
  return stats;
}

std::vector<EpisodeReport> explore_and_test(ExploreSession& session, int episodes) {
  session.reset_tested();
  std::vector<EpisodeReport> reports;
  for (int e = 0; e < episodes; ++e) reports.push_back(session.run_episode(e, nullptr));
  return reports;
}

}  // namespace ppgta
