#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>

#include "ppgta/nn.hpp"

namespace ppgta::testing {

/// Central-difference relative error, floored so near-zero gradients compare absolutely.
inline double relative_error(double analytic, double numeric, double floor = 1e-2) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct FdReport {
  double worst = 0.0;           // over every checked entry, best step each
  double worst_resolved = 0.0;  // over entries with at least one kink-free step
  int resolved = 0, total = 0;
};

/// Returns the on/off pattern of every ReLU in the network as of the last `loss` call.
using KinkPattern = std::function<std::vector<bool>()>;

/// Compares `grads` against five-point central differences of `loss` (which must not touch the
/// gradients) on up to `per_tensor` evenly spaced entries of each span. Each entry takes the best
/// of a ladder of step sizes, so a step that straddles a ReLU kink gives way to a smaller one
/// while a wrong gradient fails at every step. With `pattern`, an entry is resolved only by a step
/// of at least `eps` (smaller ones drown in float32 rounding) none of whose four evaluations
/// flips a ReLU.
inline FdReport fd_report(std::vector<std::span<float>> values, std::vector<std::span<const float>> grads,
                          const std::function<double()>& loss, int per_tensor = 24, double eps = 1e-2,
                          const KinkPattern& pattern = {}) {
  FdReport r;
  for (std::size_t k = 0; k < values.size(); ++k) {
    const std::size_t n = values[k].size();
    const std::size_t stride = std::max<std::size_t>(1, n / static_cast<std::size_t>(per_tensor));
    for (std::size_t i = 0; i < n; i += stride) {
      float& v = values[k][i];
      const float saved = v;
      std::vector<bool> base;
      if (pattern) {
        loss();
        base = pattern();
      }
      bool smooth = true;
      auto at = [&](double h) {
        v = static_cast<float>(saved + h);
        const double f = loss();
        if (pattern && pattern() != base) smooth = false;
        v = saved;
        return f;
      };
      double best = 1e300, best_smooth = 1e300;
      for (double h : {3.0 * eps, eps, eps / 3.0, eps / 10.0, eps / 30.0}) {
        smooth = true;
        const double numeric = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12.0 * h);
        const double e = relative_error(grads[k][i], numeric);
        best = std::min(best, e);
        if (smooth && (!pattern || h >= eps)) best_smooth = std::min(best_smooth, e);
      }
      r.worst = std::max(r.worst, best);
      if (best_smooth < 1e300) {
        r.worst_resolved = std::max(r.worst_resolved, best_smooth);
        ++r.resolved;
      }
      ++r.total;
    }
  }
  return r;
}

/// Largest relative error over the checked entries (see fd_report).
inline double max_fd_error(std::vector<std::span<float>> values, std::vector<std::span<const float>> grads,
                           const std::function<double()>& loss, int per_tensor = 24, double eps = 1e-2) {
  return fd_report(std::move(values), std::move(grads), loss, per_tensor, eps).worst;
}

inline FdReport param_fd_report(const ParamRefs& params, const std::function<double()>& loss, int per_tensor = 24,
                                double eps = 1e-2, const KinkPattern& pattern = {}) {
  std::vector<std::span<float>> values;
  std::vector<std::span<const float>> grads;
  for (Parameter* p : params) {
    values.push_back(p->value.span());
    grads.push_back(p->grad.span());
  }
  return fd_report(values, grads, loss, per_tensor, eps, pattern);
}

/// Same check over every parameter of a module-style param list.
inline double max_param_fd_error(const ParamRefs& params, const std::function<double()>& loss, int per_tensor = 24,
                                 double eps = 1e-2) {
  return param_fd_report(params, loss, per_tensor, eps).worst;
}

inline std::vector<float> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>((uniform01(rng) * 2.0 - 1.0) * scale);
  return v;
}

inline double dot(std::span<const float> a, std::span<const float> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

}  // namespace ppgta::testing
