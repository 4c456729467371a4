#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ppgta {

/// Floor applied to the second argument of KL before division.
inline constexpr double kProbabilityFloor = 1e-8;
/// Allowed deviation from unit mass for probability vectors.
inline constexpr double kNormalizationTolerance = 1e-6;

std::vector<float> softmax(std::span<const float> logits, float temperature = 1.0f);
std::vector<float> log_softmax(std::span<const float> logits, float temperature = 1.0f);

struct XentResult {
  double loss = 0.0;
  std::vector<float> grad;  // d loss / d logits
};

/// Categorical cross-entropy of integer target under softmax(logits).
XentResult softmax_xent(std::span<const float> logits, int target);

/// Sum p_i ln(p_i / max(q_i, floor)); both inputs must be normalized.
double kl_divergence(std::span<const double> p, std::span<const double> q);
/// Jensen-Shannon divergence in nats, bounded by ln 2.
double js_divergence(std::span<const double> p, std::span<const double> q);

/// Widens to double and renormalizes to unit mass.
std::vector<double> to_distribution(std::span<const float> v);

}  // namespace ppgta
