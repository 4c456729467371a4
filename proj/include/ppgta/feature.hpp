#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ppgta/expert.hpp"
#include "ppgta/nn.hpp"
#include "ppgta/optim.hpp"
#include "ppgta/vision.hpp"

namespace ppgta {

struct EncoderConfig {
  int frame_width = 32;
  int frame_height = 32;
  std::vector<int> channels{16, 32, 64};
  int embedding = 128;
};

/// Frame bytes as CHW floats in [0, 1].
std::vector<float> frame_to_input(const Frame& frame);

/// Conv stack (3x3 stride 2, ReLU) -> flatten -> linear embedding.
class Encoder {
 public:
  struct Cache {
    std::vector<std::vector<float>> acts;  // input, then each post-ReLU conv map
  };

  Encoder() = default;
  Encoder(const std::string& prefix, const EncoderConfig& config);
  void init(Rng& rng);

  const EncoderConfig& config() const { return config_; }
  std::size_t input_size() const;
  std::size_t embedding_size() const { return static_cast<std::size_t>(config_.embedding); }

  /// Throws ContractViolation when the frame size differs from the configured one.
  std::vector<float> encode(const Frame& frame) const;
  void forward(std::span<const float> input, std::span<float> out, Cache* cache) const;
  /// Accumulates parameter gradients for d loss / d embedding.
  void backward(const Cache& cache, std::span<const float> g_out);

  template <class F> void for_each_param(F&& f) {
    for (auto& c : convs_) c.for_each_param(f);
    proj_.for_each_param(f);
  }
  template <class F> void for_each_param(F&& f) const {
    for (const auto& c : convs_) c.for_each_param(f);
    proj_.for_each_param(f);
  }

 private:
  EncoderConfig config_;
  std::vector<Conv2d> convs_;
  std::vector<std::size_t> extents_h_, extents_w_;  // input extent of each conv, then output
  Linear proj_;
};

/// Two-layer perceptron over [phi(s_{t-1}); phi(s_t)] -> action logits.
class InverseDynamicsHead {
 public:
  InverseDynamicsHead() = default;
  InverseDynamicsHead(std::size_t embedding, std::size_t hidden = 128);
  void init(Rng& rng);

  struct Cache {
    std::vector<float> input, hidden;
  };
  std::vector<float> forward(std::span<const float> prev, std::span<const float> next, Cache* cache) const;
  /// Writes gradients w.r.t. both embeddings.
  void backward(const Cache& cache, std::span<const float> g_logits, std::span<float> g_prev,
                std::span<float> g_next);

  template <class F> void for_each_param(F&& f) { fc1_.for_each_param(f); fc2_.for_each_param(f); }
  template <class F> void for_each_param(F&& f) const { fc1_.for_each_param(f); fc2_.for_each_param(f); }

 private:
  Linear fc1_, fc2_;
};

template <class M> ParamRefs params_of(M& module) {
  ParamRefs out;
  module.for_each_param([&](Parameter& p) { out.push_back(&p); });
  return out;
}
template <class M> ConstParamRefs params_of(const M& module) {
  ConstParamRefs out;
  module.for_each_param([&](const Parameter& p) { out.push_back(&p); });
  return out;
}

/// Trajectory indices per split, assigned per expert kind (70/10/20 by trajectory).
struct CorpusSplit {
  std::vector<int> train, val, test;
};
CorpusSplit split_corpus(const std::vector<Trajectory>& corpus, std::uint64_t seed);

struct InvDynPair {
  int trajectory = 0;
  int step = 0;  // pair is (frames[step], frames[step + 1]) with actions[step]
};

struct InvDynDataset {
  std::vector<InvDynPair> train, val, test;
  std::size_t skipped = 0;  // trajectories shorter than two frames
};

InvDynDataset build_invdyn_dataset(const std::vector<Trajectory>& corpus, const CorpusSplit& split);

struct EncoderTrainConfig {
  int epochs = 40;
  int batch = 64;
  LrSchedule schedule;
  AdamWConfig adamw;
  double mask_probability = 0.5;
  std::uint64_t seed = 1;
  /// Pairs per epoch drawn from the training split (0 = all).
  int max_pairs_per_epoch = 0;
};

struct EncoderTrainResult {
  double best_val_loss = 0.0;
  double best_val_accuracy = 0.0;
  int best_epoch = -1;
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t masked_samples = 0;
  std::size_t total_samples = 0;
};

/// Which frame of a pair to mask: -1 none, 0 previous, 1 next.
int draw_mask_choice(Rng& rng, double probability);

/// Masked inverse-dynamics training. `encoder` ends holding the best-validation parameters.
/// Per-frame detections are computed once from each trajectory's recorded poses.
EncoderTrainResult train_encoder(Encoder& encoder, const std::vector<Trajectory>& corpus,
                                 const InvDynDataset& data, const Detector& detector,
                                 const EncoderTrainConfig& config);

struct InvDynEval {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<std::vector<int>> confusion;  // [true][predicted]
};
InvDynEval evaluate_invdyn(const Encoder& encoder, const InverseDynamicsHead& head,
                           const std::vector<Trajectory>& corpus, const std::vector<InvDynPair>& pairs);

/// Same as train_encoder but also returns the trained head (for evaluation).
EncoderTrainResult train_encoder_with_head(Encoder& encoder, InverseDynamicsHead& head,
                                           const std::vector<Trajectory>& corpus, const InvDynDataset& data,
                                           const Detector& detector, const EncoderTrainConfig& config);

}  // namespace ppgta
