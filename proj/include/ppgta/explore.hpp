#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ppgta/imitation.hpp"
#include "ppgta/novelty.hpp"
#include "ppgta/preference.hpp"

namespace ppgta {

struct PpoConfig {
  double clip = 0.2;
  int epochs = 4;
  int minibatch = 64;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double lr = 3e-4;
  double max_grad_norm = 0.5;
};

/// Per-sample clipped-surrogate loss: -min(rA, clip(r)A) + c_v (V - R)^2 - c_e H(pi).
struct PpoSampleLoss {
  double loss = 0.0;
  double surrogate = 0.0;  // min(rA, clip(r)A)
  double ratio = 1.0;
  double entropy = 0.0;
  double value_loss = 0.0;
  bool clipped = false;
  std::vector<float> g_logits;
  float g_value = 0.0f;
};

PpoSampleLoss ppo_sample_loss(std::span<const float> logits, float value, int action, double old_log_prob,
                              double advantage, double ret, const PpoConfig& config);

/// GAE(gamma, lambda); `done[t]` ends the episode after step t. Returns advantages; returns = adv + values.
std::vector<double> gae_advantages(std::span<const double> rewards, std::span<const double> values,
                                   std::span<const std::uint8_t> done, double last_value, double gamma,
                                   double lambda);

/// Zero mean, unit variance (population); constant input maps to zeros.
void normalize_advantages(std::vector<double>& adv);

/// One exploration step as seen by the learner: the network inputs are stored so the trunk can be
/// re-evaluated with the frozen encoder (global state is treated as a constant input).
struct Transition {
  std::vector<std::vector<float>> window;  // K embeddings
  std::vector<float> global_prev;
  int action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
};

struct RolloutBatch {
  std::vector<Transition> steps;
  std::vector<double> advantages;
  std::vector<double> returns;
  bool prepared = false;
};

/// Fills advantages/returns (advantages normalized) before any update.
void prepare_batch(RolloutBatch& batch, const PpoConfig& config);

struct PpoStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  int updates = 0;
};

/// Clipped PPO on the trunk of `actor` (encoder untouched). Throws TrainingDivergence on NaN.
PpoStats ppo_update(PolicyNet& actor, AdamW& optimizer, RolloutBatch& batch, const PpoConfig& config, Rng& rng);

enum class AlphaMode { Adaptive, Fixed };

struct ExploreConfig {
  int horizon = 300;
  PpoConfig ppo;
  NoveltyConfig novelty;
  int novelty_train_every = 1;  // env steps between predictor updates
  bool normalize_novelty = true;
  AlphaConfig alpha;
  AlphaMode alpha_mode = AlphaMode::Adaptive;
  double fixed_alpha = 0.0;
  bool random_actions = false;  // uniform random agent (no learning)
  double trigger_area = kTriggerAreaFraction;
  bool resume_at_trigger = true;  // exploration continues from the pose where the test was triggered
  std::uint64_t seed = 1;
};

/// Everything needed to run an OOI test once the explorer hands over control.
struct OrbitTester {
  const PolicyNet* policy = nullptr;
  ActionHistogram expert{};
  double success_threshold = 0.0;
  int budget = 0;
};

struct OoiVerdict {
  int ooi = -1;
  bool success = false;
  double js = 0.0;
  int episode = -1;
};

struct TraceRow {
  int t = 0;
  double r_e = 0.0;  // stream fed to the mixer (normalized when enabled)
  double r_p = 0.0;
  double alpha = 0.0;
  double r_c = 0.0;
  double r_e_raw = 0.0;
};

struct TileRun {
  TilePos tile;
  int count = 0;
  friend bool operator==(const TileRun&, const TileRun&) = default;
};

std::vector<TileRun> run_length_encode(const std::vector<TilePos>& tiles);
std::vector<TilePos> run_length_decode(const std::vector<TileRun>& runs);

struct EpisodeReport {
  int episode = 0;
  std::uint64_t world_seed = 0;
  TilePos spawn;
  std::vector<TileRun> visited;  // tile per step, run-length encoded
  std::vector<OoiVerdict> tests;
  std::vector<TraceRow> trace;
};

/// One run of the explorer on a world: actor, optimizer, novelty ensemble, alpha controller,
/// style accumulators and the set of already-tested OOIs.
class ExploreSession {
 public:
  ExploreSession(const World& world, const Detector& detector, const PolicyNet& actor_init,
                 const PolicyNet& path_policy, const OrbitTester& tester, const ExploreConfig& config);
  ExploreSession(const ExploreSession&) = delete;
  ExploreSession& operator=(const ExploreSession&) = delete;

  const ExploreConfig& config() const { return config_; }
  const PolicyNet& actor() const { return *actor_; }
  EnsembleRnd& novelty() { return novelty_; }
  const std::set<int>& tested() const { return tested_; }
  void reset_tested() { tested_.clear(); }

  /// One episode of `horizon` environment steps from a random spawn tile. Exploration transitions
  /// go to `batch` when given; OOI tests are triggered when `tester.policy` is set.
  EpisodeReport run_episode(int episode, RolloutBatch* batch);
  PpoStats update(RolloutBatch& batch);

 private:
  int choose_action(std::span<const float> probs);
  void test_ooi(int ooi, AgentPose& pose, int episode, EpisodeReport& report, std::vector<TilePos>& visited);

  const World& world_;
  const Detector& detector_;
  std::unique_ptr<PolicyNet> actor_;
  const PolicyNet& path_policy_;
  OrbitTester tester_;
  ExploreConfig config_;
  std::unique_ptr<AdamW> optimizer_;
  EnsembleRnd novelty_;
  RunningStd novelty_std_;
  AlphaController alpha_;
  StyleContext style_;
  std::set<int> tested_;
  Rng spawn_rng_, action_rng_, novelty_rng_, ppo_rng_;
  long long env_steps_ = 0;
};

/// Collects one episode of exploration experience with advantages prepared.
RolloutBatch collect_rollout(ExploreSession& session, int episode, EpisodeReport* report = nullptr);

/// Trains the explorer for `episodes` PPO iterations (one episode per batch).
std::vector<PpoStats> train_explorer(ExploreSession& session, int episodes);

/// Evaluation protocol: `episodes` episodes with OOI-triggered tests, each OOI tested at most once.
std::vector<EpisodeReport> explore_and_test(ExploreSession& session, int episodes);

/// OOI whose rendered box best overlaps `box` (IoU > 0), or -1.
int associate_detection(const RenderInfo& info, const BoundingBox& box);

}  // namespace ppgta
