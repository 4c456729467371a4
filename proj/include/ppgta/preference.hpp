#pragma once

#include <span>
#include <vector>

#include "ppgta/world.hpp"

namespace ppgta {

struct AlphaConfig {
  double init = 0.8;
  double min = 0.5;
  double max = 0.8;
  double down_rate = 0.05;
  double up_rate = 0.1;
  double epsilon = -0.1;  // drop threshold; the rise threshold mirrors it at -epsilon
};

/// Adapts the style/novelty mixing weight from consecutive changes in r^e.
class AlphaController {
 public:
  explicit AlphaController(const AlphaConfig& config = {});
  void reset();
  /// Feeds r^e_t; the first value only primes the controller.
  double update(double r_e);
  double alpha() const { return alpha_; }
  const AlphaConfig& config() const { return config_; }

  /// Deltas within this tolerance of a threshold count as crossing it.
  static constexpr double kTolerance = 1e-9;

 private:
  AlphaConfig config_;
  double alpha_;
  double prev_ = 0.0;
  bool primed_ = false;
};

/// Alpha trace produced by feeding a whole r^e sequence to a fresh controller.
std::vector<double> replay_alpha(std::span<const double> r_e, const AlphaConfig& config = {});

/// Running per-episode means of the explorer's and the preference policy's action distributions.
class StyleContext {
 public:
  void reset();
  void add(std::span<const float> explore_dist, std::span<const float> pref_dist);
  std::size_t steps() const { return steps_; }
  std::vector<double> explore_mean() const;
  std::vector<double> pref_mean() const;

 private:
  std::vector<double> explore_sum_, pref_sum_;
  std::size_t steps_ = 0;
};

/// Accumulates the step and returns r^p = -KL(mean explore || mean preference).
double style_reward(StyleContext& ctx, std::span<const float> explore_dist, std::span<const float> pref_dist);
/// r^p from the current accumulators; throws ContractViolation when empty.
double style_reward(const StyleContext& ctx);

/// r^c = alpha r^p + (1 - alpha) r^e.
double combined_reward(double alpha, double r_p, double r_e);

}  // namespace ppgta
