#include "ppgta/preference.hpp"

#include <algorithm>

#include "ppgta/losses.hpp"

namespace ppgta {

AlphaController::AlphaController(const AlphaConfig& config) : config_(config), alpha_(config.init) {
  require(config.min <= config.init && config.init <= config.max, "AlphaController: init outside [min, max]");
}

void AlphaController::reset() {
  alpha_ = config_.init;
  prev_ = 0.0;
  primed_ = false;
}

double AlphaController::update(double r_e) {
  if (primed_) {
    const double delta = r_e - prev_;
    if (delta <= config_.epsilon + kTolerance) {
      alpha_ = std::max(alpha_ - config_.down_rate, config_.min);
    } else if (delta >= -config_.epsilon - kTolerance) {
      alpha_ = std::min(alpha_ + config_.up_rate, config_.max);
    }
  }
  prev_ = r_e;
  primed_ = true;
  return alpha_;
}

std::vector<double> replay_alpha(std::span<const double> r_e, const AlphaConfig& config) {
  AlphaController ctrl(config);
  std::vector<double> out;
  out.reserve(r_e.size());
  for (double r : r_e) out.push_back(ctrl.update(r));
  return out;
}

void StyleContext::reset() {
  explore_sum_.clear();
  pref_sum_.clear();
  steps_ = 0;
}

void StyleContext::add(std::span<const float> explore_dist, std::span<const float> pref_dist) {
  require(explore_dist.size() == pref_dist.size() && !explore_dist.empty(), "StyleContext: distribution sizes differ");
  if (steps_ == 0) {
    explore_sum_.assign(explore_dist.size(), 0.0);
    pref_sum_.assign(pref_dist.size(), 0.0);
  }
  require(explore_sum_.size() == explore_dist.size(), "StyleContext: distribution size changed mid-episode");
  for (std::size_t i = 0; i < explore_dist.size(); ++i) {
    explore_sum_[i] += explore_dist[i];
    pref_sum_[i] += pref_dist[i];
  }
  ++steps_;
}

std::vector<double> StyleContext::explore_mean() const {
  std::vector<double> m = explore_sum_;
  for (double& v : m) v /= static_cast<double>(steps_);
  return m;
}

std::vector<double> StyleContext::pref_mean() const {
  std::vector<double> m = pref_sum_;
  for (double& v : m) v /= static_cast<double>(steps_);
  return m;
}

double style_reward(const StyleContext& ctx) {
  require(ctx.steps() > 0, "style_reward: empty accumulators");
  const std::vector<double> p = ctx.explore_mean();
  const std::vector<double> q = ctx.pref_mean();
  return -kl_divergence(p, q);
}

double style_reward(StyleContext& ctx, std::span<const float> explore_dist, std::span<const float> pref_dist) {
  ctx.add(explore_dist, pref_dist);
  return style_reward(static_cast<const StyleContext&>(ctx));
}

double combined_reward(double alpha, double r_p, double r_e) {
  require(alpha >= 0.0 && alpha <= 1.0, "combined_reward: alpha outside [0, 1]");
  if (alpha == 0.0) return r_e;
  if (alpha == 1.0) return r_p;
  return alpha * r_p + (1.0 - alpha) * r_e;
}

}  // namespace ppgta
