#include "ppgta/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ppgta/common.hpp"

namespace ppgta {

std::vector<float> softmax(std::span<const float> logits, float temperature) {
  require(!logits.empty(), "softmax: empty input");
  const double t = temperature;
  double mx = logits[0] / t;
  for (float v : logits) mx = std::max(mx, v / t);
  std::vector<double> e(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    e[i] = std::exp(logits[i] / t - mx);
    sum += e[i];
  }
  std::vector<float> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<float>(e[i] / sum);
  return out;
}

std::vector<float> log_softmax(std::span<const float> logits, float temperature) {
  require(!logits.empty(), "log_softmax: empty input");
  const double t = temperature;
  double mx = logits[0] / t;
  for (float v : logits) mx = std::max(mx, v / t);
  double sum = 0.0;
  for (float v : logits) sum += std::exp(v / t - mx);
  const double lse = mx + std::log(sum);
  std::vector<float> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<float>(logits[i] / t - lse);
  return out;
}

XentResult softmax_xent(std::span<const float> logits, int target) {
  require(target >= 0 && static_cast<std::size_t>(target) < logits.size(),
          "softmax_xent: target " + std::to_string(target) + " out of range");
  double mx = logits[0];
  for (float v : logits) mx = std::max<double>(mx, v);
  double sum = 0.0;
  for (float v : logits) sum += std::exp(static_cast<double>(v) - mx);
  const double lse = mx + std::log(sum);
  XentResult r;
  r.loss = lse - static_cast<double>(logits[target]);
  r.grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    r.grad[i] = static_cast<float>(std::exp(static_cast<double>(logits[i]) - lse));
  }
  r.grad[target] -= 1.0f;
  return r;
}

namespace {

void check_distribution(std::span<const double> p, const char* what) {
  double s = 0.0;
  for (double v : p) {
    require(v >= 0.0 && std::isfinite(v), std::string(what) + ": negative or non-finite mass");
    s += v;
  }
  require(std::abs(s - 1.0) <= kNormalizationTolerance,
          std::string(what) + ": distribution sums to " + std::to_string(s));
}

}  // namespace

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size() && !p.empty(), "kl_divergence: size mismatch");
  check_distribution(p, "kl_divergence(p)");
  check_distribution(q, "kl_divergence(q)");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    kl += p[i] * std::log(p[i] / std::max(q[i], kProbabilityFloor));
  }
  return std::max(kl, 0.0);
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size() && !p.empty(), "js_divergence: size mismatch");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  const double js = 0.5 * kl_divergence(p, m) + 0.5 * kl_divergence(q, m);
  return std::clamp(js, 0.0, std::log(2.0));
}

std::vector<double> to_distribution(std::span<const float> v) {
  std::vector<double> out(v.begin(), v.end());
  double s = 0.0;
  for (double x : out) s += x;
  if (s > 0.0) {
    for (double& x : out) x /= s;
  }
  return out;
}

}  // namespace ppgta
