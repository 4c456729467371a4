#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "ppgta/nn.hpp"
#include "ppgta/tensor.hpp"

namespace ppgta {

/// Linear warm-up followed by cosine decay, evaluated at fractional epochs.
struct LrSchedule {
  double warmup_start = 2e-3;
  double peak = 1e-2;
  double warmup_epochs = 10.0;
  double total_epochs = 40.0;
  double final_lr = 1e-4;

  double at(double epoch) const;
  /// Constant learning rate.
  static LrSchedule constant(double lr);
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW state: per-parameter first/second moments and a step counter.
class AdamW {
 public:
  AdamW(ParamRefs params, AdamWConfig config = {});

  /// One decoupled-weight-decay Adam update using the accumulated gradients.
  /// Gradients are scaled by `grad_scale` first (e.g. 1/batch).
  void step(double lr, float grad_scale = 1.0f);

  std::size_t steps() const { return t_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  const ParamRefs& params() const { return params_; }
  const AdamWConfig& config() const { return config_; }

 private:
  ParamRefs params_;
  AdamWConfig config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

/// teacher <- m * teacher + (1 - m) * student, elementwise.
void ema_update(const ParamRefs& teacher, const ConstParamRefs& student, double momentum);

/// Rescales all gradients so their joint L2 norm is at most max_norm.
double clip_grad_norm(const ParamRefs& params, double max_norm);

// Checkpoint file: "PPGT", u16 version, then records of
// (u32 name length, name bytes, u32 rank, u64 extents[rank], f32 LE payload).
inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ConstParamRefs& params);
/// Loads values by name; every parameter in `params` must be present with matching shape.
void load_checkpoint(const std::filesystem::path& path, const ParamRefs& params);

}  // namespace ppgta
