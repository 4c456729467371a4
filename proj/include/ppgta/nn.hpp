#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ppgta/common.hpp"
#include "ppgta/tensor.hpp"

namespace ppgta {

/// A trainable tensor plus its gradient accumulator.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, std::vector<std::size_t> shape);

  std::string name;
  Tensor value;
  Tensor grad;
};

using ParamRefs = std::vector<Parameter*>;
using ConstParamRefs = std::vector<const Parameter*>;

void zero_grad(const ParamRefs& params);
/// Copies parameter values pairwise; both lists must have matching structure.
void copy_values(const ConstParamRefs& from, const ParamRefs& to);
std::size_t parameter_count(const ConstParamRefs& params);

/// Fully connected layer y = W x + b, W stored [out x in].
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out);

  void init(Rng& rng);
  void forward(std::span<const float> x, std::span<float> y) const;
  /// Accumulates parameter gradients; writes the input gradient into gx when gx is non-empty.
  void backward(std::span<const float> x, std::span<const float> gy, std::span<float> gx);

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

  template <class F> void for_each_param(F&& f) { f(weight); f(bias); }
  template <class F> void for_each_param(F&& f) const { f(weight); f(bias); }

  Parameter weight;
  Parameter bias;

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

/// 3x3 convolution, stride 2, valid padding, CHW layout.
class Conv2d {
 public:
  static constexpr std::size_t kKernel = 3;
  static constexpr std::size_t kStride = 2;

  Conv2d() = default;
  Conv2d(const std::string& name, std::size_t in_channels, std::size_t out_channels);

  static std::size_t output_extent(std::size_t input_extent);

  void init(Rng& rng);
  void forward(std::span<const float> x, std::size_t h, std::size_t w, std::span<float> y) const;
  void backward(std::span<const float> x, std::size_t h, std::size_t w, std::span<const float> gy,
                std::span<float> gx);

  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }

  template <class F> void for_each_param(F&& f) { f(weight); f(bias); }
  template <class F> void for_each_param(F&& f) const { f(weight); f(bias); }

  Parameter weight;  // [out, in, 3, 3]
  Parameter bias;

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
};

/// Intermediates of one GRU step needed by the backward pass.
struct GruCache {
  std::vector<float> x, h, z, r, n, hn_lin;
};

/// GRU cell with update convention h' = (1 - z) * h + z * n.
/// Gate rows are ordered [z; r; n] in both weight matrices.
class GruCell {
 public:
  GruCell() = default;
  GruCell(const std::string& name, std::size_t input_size, std::size_t hidden_size);

  void init(Rng& rng);
  std::vector<float> step(std::span<const float> x, std::span<const float> h,
                          GruCache* cache = nullptr) const;
  /// Given dL/dh', accumulates parameter gradients and writes dL/dx and dL/dh.
  void backward(const GruCache& cache, std::span<const float> gh_next, std::span<float> gx,
                std::span<float> gh);

  std::size_t input_size() const { return in_; }
  std::size_t hidden_size() const { return hid_; }

  template <class F> void for_each_param(F&& f) { f(w_x); f(w_h); f(b_x); f(b_h); }
  template <class F> void for_each_param(F&& f) const { f(w_x); f(w_h); f(b_x); f(b_h); }

  Parameter w_x;  // [3H, I]
  Parameter w_h;  // [3H, H]
  Parameter b_x;  // [3H]
  Parameter b_h;  // [3H]

 private:
  std::size_t in_ = 0;
  std::size_t hid_ = 0;
};

struct LayerNormCache {
  std::vector<float> xhat;
  float inv_std = 0.0f;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, std::size_t dim);

  void forward(std::span<const float> x, std::span<float> y, LayerNormCache* cache) const;
  void backward(const LayerNormCache& cache, std::span<const float> gy, std::span<float> gx);

  template <class F> void for_each_param(F&& f) { f(gain); f(shift); }
  template <class F> void for_each_param(F&& f) const { f(gain); f(shift); }

  Parameter gain;
  Parameter shift;
  static constexpr float kEps = 1e-5f;
};

inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

void relu_inplace(std::span<float> x);
/// Zeroes gradient entries whose forward activation was clipped.
void relu_backward(std::span<const float> activated, std::span<float> g);

/// Inverted dropout mask: entries are 0 or 1/(1-p).
std::vector<float> dropout_mask(std::size_t n, float p, Rng& rng);

}  // namespace ppgta
