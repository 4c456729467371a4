#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "ppgta/feature.hpp"
#include "ppgta/vision.hpp"

namespace ppgta {

inline constexpr int kNoveltyInput = 16;

/// OD mask with the largest detection (identity without one), then downsample to 16x16.
Frame preprocess(const Frame& frame, const DetectionSet& detections);

struct RndConfig {
  int input = kNoveltyInput;
  std::vector<int> channels{16, 32, 64};
  int hidden = 64;
  int projection = 32;
};

/// Conv stack -> linear(hidden) -> ReLU -> linear(projection).
class RndNet {
 public:
  struct Cache {
    Encoder::Cache body;
    std::vector<float> hidden;  // post-ReLU
  };

  RndNet() = default;
  RndNet(const std::string& prefix, const RndConfig& config);
  void init(Rng& rng);

  std::size_t input_size() const { return body_.input_size(); }
  std::size_t output_size() const { return head_.out_features(); }

  std::vector<float> forward(std::span<const float> input, Cache* cache = nullptr) const;
  void backward(const Cache& cache, std::span<const float> g_out);

  template <class F> void for_each_param(F&& f) { body_.for_each_param(f); head_.for_each_param(f); }
  template <class F> void for_each_param(F&& f) const { body_.for_each_param(f); head_.for_each_param(f); }

 private:
  Encoder body_;
  Linear head_;
};

/// A preprocessed frame with its (fixed) target projection.
struct RndSample {
  std::vector<float> input;
  std::vector<float> target;
};

/// Fixed-capacity ring buffer; the oldest sample is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1024);
  void push(RndSample sample);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return items_.empty(); }
  const RndSample& operator[](std::size_t i) const { return items_[i]; }
  void clear() { items_.clear(); }

 private:
  std::size_t capacity_;
  std::deque<RndSample> items_;
};

/// Mean over dimensions of the population variance across predictions.
double ensemble_variance(const std::vector<std::vector<float>>& predictions);

struct NoveltyConfig {
  RndConfig net;
  int ensemble = 5;
  std::size_t buffer = 1024;
  int batch = 64;
  double lr = 1e-3;
  std::uint64_t seed = 1;
};

/// Fixed random target plus an ensemble of independently initialized predictors.
class EnsembleRnd {
 public:
  explicit EnsembleRnd(const NoveltyConfig& config);
  // Optimizers point into members_: moving keeps the vector storage, copying would not.
  EnsembleRnd(const EnsembleRnd&) = delete;
  EnsembleRnd& operator=(const EnsembleRnd&) = delete;
  EnsembleRnd(EnsembleRnd&&) = default;

  const NoveltyConfig& config() const { return config_; }
  const RndNet& target() const { return target_; }
  const std::vector<RndNet>& members() const { return members_; }
  std::vector<RndNet>& members() { return members_; }
  ReplayBuffer& buffer() { return buffer_; }

  std::vector<float> target_projection(std::span<const float> input) const;
  std::vector<std::vector<float>> predictions(std::span<const float> input) const;
  /// r^e: ensemble variance of the predictions.
  double reward(std::span<const float> input) const;
  double reward(const Frame& preprocessed) const { return reward(frame_to_input(preprocessed)); }

  /// Adds a preprocessed frame to the replay buffer.
  void observe(std::span<const float> input);
  /// `steps` gradient steps per member, each on its own uniform minibatch from the buffer.
  /// Returns the last minibatch MSE per member; throws TrainingDivergence on NaN.
  std::vector<double> train(int steps, Rng& rng);

 private:
  NoveltyConfig config_;
  RndNet target_;
  std::vector<RndNet> members_;
  std::vector<AdamW> optimizers_;
  ReplayBuffer buffer_;
};

/// Classic single-predictor RND: reward = MSE(prediction, target).
class SingleRnd {
 public:
  explicit SingleRnd(const NoveltyConfig& config);
  SingleRnd(const SingleRnd&) = delete;
  SingleRnd& operator=(const SingleRnd&) = delete;
  double reward(std::span<const float> input) const;
  void observe(std::span<const float> input);
  double train(int steps, Rng& rng);
  ReplayBuffer& buffer() { return buffer_; }

 private:
  NoveltyConfig config_;
  RndNet target_;
  RndNet predictor_;
  AdamW optimizer_;
  ReplayBuffer buffer_;
};

/// Running standard deviation (Welford); normalize divides by it once two values are seen.
class RunningStd {
 public:
  void update(double x);
  double stddev() const;
  double normalize(double x) const;
  std::size_t count() const { return n_; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace ppgta
