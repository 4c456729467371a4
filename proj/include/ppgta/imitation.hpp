#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "ppgta/feature.hpp"

namespace ppgta {

struct PolicyConfig {
  EncoderConfig encoder;
  int window = 4;
  int local_hidden = 32;  // per direction
  int global_hidden = 64;
  int mlp1 = 64;
  int mlp2 = 32;
  float dropout = 0.2f;
};

/// FE backbone plus dual-GRU trunk: local bi-GRU on the last K embeddings, global GRU over the
/// whole trajectory, MLP head to action logits, plus a scalar value head.
class PolicyNet {
 public:
  struct Cache {
    std::vector<GruCache> fwd, bwd;
    GruCache global;
    std::vector<float> hc;
    std::vector<float> z1, z2;
    LayerNormCache ln1, ln2;
    std::vector<float> a1, a2;        // post-ReLU
    std::vector<float> mask1, mask2;  // dropout (empty when inactive)
    std::vector<float> d1, d2;        // post-dropout
  };

  struct Output {
    std::vector<float> logits;
    std::vector<float> hc;
    std::vector<float> global;  // new global state
    float value = 0.0f;
  };

  PolicyNet() = default;
  PolicyNet(const std::string& prefix, const PolicyConfig& config);
  void init(Rng& rng);
  void zero_init();

  const PolicyConfig& config() const { return config_; }
  Encoder& encoder() { return encoder_; }
  const Encoder& encoder() const { return encoder_; }
  std::size_t embedding_size() const { return encoder_.embedding_size(); }
  std::size_t hc_size() const { return static_cast<std::size_t>(2 * config_.local_hidden + config_.global_hidden); }
  std::size_t global_size() const { return static_cast<std::size_t>(config_.global_hidden); }

  /// `window` holds exactly K embeddings, oldest first; the last one is the current frame.
  /// Dropout is applied only when `dropout_rng` is non-null.
  Output forward(const std::vector<std::span<const float>>& window, std::span<const float> global_prev,
                 Rng* dropout_rng, Cache* cache) const;

  struct InputGrads {
    std::vector<std::vector<float>> window;
    std::vector<float> global_prev;
  };
  /// g_hc and g_global_next may be empty (treated as zero).
  void backward(const Cache& cache, std::span<const float> g_logits, std::span<const float> g_hc, float g_value,
                std::span<const float> g_global_next, InputGrads* grads);

  template <class F> void for_each_param(F&& f) {
    encoder_.for_each_param(f);
    for_each_trunk_param(f);
  }
  template <class F> void for_each_param(F&& f) const {
    encoder_.for_each_param(f);
    for_each_trunk_param(f);
  }
  /// Everything except the encoder.
  template <class F> void for_each_trunk_param(F&& f) {
    local_fwd_.for_each_param(f);
    local_bwd_.for_each_param(f);
    global_.for_each_param(f);
    fc1_.for_each_param(f);
    ln1_.for_each_param(f);
    fc2_.for_each_param(f);
    ln2_.for_each_param(f);
    action_.for_each_param(f);
    value_.for_each_param(f);
  }
  template <class F> void for_each_trunk_param(F&& f) const {
    local_fwd_.for_each_param(f);
    local_bwd_.for_each_param(f);
    global_.for_each_param(f);
    fc1_.for_each_param(f);
    ln1_.for_each_param(f);
    fc2_.for_each_param(f);
    ln2_.for_each_param(f);
    action_.for_each_param(f);
    value_.for_each_param(f);
  }

 private:
  PolicyConfig config_;
  Encoder encoder_;
  GruCell local_fwd_, local_bwd_, global_;
  Linear fc1_;
  LayerNorm ln1_;
  Linear fc2_;
  LayerNorm ln2_;
  Linear action_;
  Linear value_;
};

/// Window of embedding indices ending at t, padded at the start by repeating index 0.
std::vector<std::size_t> window_indices(std::size_t t, int k);

struct ImitationLossConfig {
  double lambda = 0.5;
  double tau_teacher = 0.04;
  double tau_student = 0.1;
};

struct ImitationLoss {
  double loss = 0.0;
  double xent = 0.0;
  double consistency = 0.0;
  std::vector<float> g_logits;
  std::vector<float> g_hc;
};

/// Cross-entropy on the expert action plus lambda * CE(softmax(teacher_hc/tau_t), softmax(student_hc/tau_s)).
/// The teacher side is a constant.
ImitationLoss imitation_loss(std::span<const float> student_logits, std::span<const float> student_hc,
                             std::span<const float> teacher_hc, int expert_action, const ImitationLossConfig& config);

/// Per-frame embeddings of one demonstration for both roles.
struct EmbeddedTrajectory {
  std::vector<std::vector<float>> student;  // OD-masked frames
  std::vector<std::vector<float>> teacher;  // full frames
  std::vector<int> actions;
};

/// Student/teacher network inputs of one demonstration: CHW floats of the masked and full frames.
struct TrajectoryViews {
  std::vector<std::vector<float>> masked;
  std::vector<std::vector<float>> full;
  std::vector<int> actions;
};

TrajectoryViews trajectory_views(const Trajectory& traj, const Detector& detector);
EmbeddedTrajectory embed_views(const TrajectoryViews& views, const Encoder& student_encoder,
                               const Encoder& teacher_encoder);

struct SequenceStats {
  double loss = 0.0;
  double xent = 0.0;
  double consistency = 0.0;
  int correct = 0;
  int steps = 0;
};

/// Runs student (and teacher, when given) over a whole trajectory with backpropagation through
/// time, accumulating student gradients when `accumulate` is set. When `g_student_embeddings` is
/// non-null it receives d loss / d student embedding per frame.
SequenceStats imitation_sequence(PolicyNet& student, const PolicyNet* teacher, const EmbeddedTrajectory& traj,
                                 const ImitationLossConfig& loss_config, Rng* dropout_rng, bool accumulate,
                                 std::vector<std::vector<float>>* g_student_embeddings = nullptr);

struct ImitationConfig {
  bool finetune_encoder = true;
  int epochs = 40;
  int batch = 64;  // time steps per optimizer step
  int patience = 5;
  double ema_momentum = 0.996;
  ImitationLossConfig loss;
  LrSchedule schedule;
  AdamWConfig adamw;
  std::uint64_t seed = 1;
};

struct ImitationResult {
  PolicyNet student;
  PolicyNet teacher;
  std::vector<double> train_loss;
  std::vector<double> val_xent;
  int best_epoch = -1;
  double best_val_xent = 0.0;
  double success_threshold = 0.0;
};

/// Everything besides the policy needed to run it inside the simulator.
struct RolloutContext {
  const World* world = nullptr;
  const Detector* detector = nullptr;
};

/// Trains student/teacher on `train` starting from the distilled `encoder`, early-stops on `val` cross-entropy, and (when `ctx.world`
/// is set) sets success_threshold from student rollouts at the validation starts.
ImitationResult train_imitation(const std::vector<Trajectory>& corpus, const std::vector<int>& train,
                                const std::vector<int>& val, const Encoder& encoder, const RolloutContext& ctx,
                                const PolicyConfig& policy_config, const ImitationConfig& config,
                                const std::vector<int>& threshold_reference = {});

/// Stateful per-episode inference: keeps the frame window and global GRU state.
class PolicyRunner {
 public:
  PolicyRunner(const PolicyNet& policy, const RolloutContext& ctx);
  void reset();
  /// Consumes the current observation; returns the action distribution.
  std::vector<float> observe(const Frame& frame, const AgentPose& pose);
  /// Same, from a precomputed student embedding.
  std::vector<float> observe_embedding(std::span<const float> embedding);
  const PolicyNet::Output& last_output() const { return last_; }

 private:
  const PolicyNet& policy_;
  RolloutContext ctx_;
  std::deque<std::vector<float>> window_;
  std::vector<float> global_;
  PolicyNet::Output last_;
};

/// Student view of a frame: OD mask with the largest detection.
Frame student_view(const Detector& detector, const Frame& frame, const AgentPose& pose);

/// Policy rollout for a fixed number of steps: argmax actions, or sampled when `rng` is given.
Trajectory rollout_policy(const PolicyNet& policy, const RolloutContext& ctx, const AgentPose& start, int steps,
                          Rng* rng = nullptr);

/// Index drawn from a probability vector.
int sample_index(std::span<const float> probs, Rng& rng);

using ActionHistogram = std::array<double, kActionCount>;

/// Normalized action histogram with add-`smoothing` counts per bin.
ActionHistogram action_histogram(std::span<const int> actions, double smoothing = 1.0);
ActionHistogram corpus_histogram(const std::vector<Trajectory>& corpus, ExpertKind kind, double smoothing = 1.0);

struct TestVerdict {
  double js = 0.0;
  bool success = false;
};

TestVerdict evaluate_test_execution(std::span<const int> rollout_actions, const ActionHistogram& expert,
                                    double success_threshold);

/// Median action count of the orbit trajectories in the corpus.
int median_orbit_length(const std::vector<Trajectory>& corpus);
/// Rollout budget for a test handoff: 1.5x the median expert orbit length.
int orbit_budget(const std::vector<Trajectory>& corpus);

/// Mean JS of student rollouts from the given trajectories' starts against `expert`.
double mean_rollout_js(const PolicyNet& policy, const RolloutContext& ctx, const std::vector<Trajectory>& corpus,
                       const std::vector<int>& members, const ActionHistogram& expert, int budget);

}  // namespace ppgta
