#include "ppgta/optim.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "ppgta/io.hpp"

namespace ppgta {

double LrSchedule::at(double epoch) const {
  if (epoch <= warmup_epochs) {
    if (warmup_epochs <= 0.0) return peak;
    return warmup_start + (peak - warmup_start) * (epoch / warmup_epochs);
  }
  const double span = std::max(total_epochs - warmup_epochs, 1e-12);
  const double progress = std::min((epoch - warmup_epochs) / span, 1.0);
  return final_lr + (peak - final_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

LrSchedule LrSchedule::constant(double lr) {
  LrSchedule s;
  s.warmup_start = lr;
  s.peak = lr;
  s.final_lr = lr;
  s.warmup_epochs = 0.0;
  return s;
}

AdamW::AdamW(ParamRefs params, AdamWConfig config) : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Parameter* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

void AdamW::step(double lr, float grad_scale) {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const Parameter& p = *params_[k];
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      if (!std::isfinite(p.grad[i])) {
        std::ostringstream msg;
        msg << "AdamW: non-finite gradient in " << p.name << "[" << i << "] at step " << t_ + 1;
        throw TrainingDivergence(msg.str());
      }
    }
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double decay = 1.0 - lr * config_.weight_decay;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    float* w = p.value.data();
    const float* g = p.grad.data();
    float* m = m_[k].data();
    float* v = v_[k].data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double gi = static_cast<double>(g[i]) * grad_scale;
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = (mi / bc1) / (std::sqrt(vi / bc2) + config_.eps);
      w[i] = static_cast<float>(w[i] * decay - lr * update);
    }
  }
}

void ema_update(const ParamRefs& teacher, const ConstParamRefs& student, double momentum) {
  require(momentum >= 0.0 && momentum < 1.0, "ema_update: momentum must lie in [0, 1)");
  require(teacher.size() == student.size(), "ema_update: parameter count mismatch");
  const float m = static_cast<float>(momentum);
  const float one_minus = static_cast<float>(1.0 - momentum);
  for (std::size_t k = 0; k < teacher.size(); ++k) {
    require(teacher[k]->value.same_shape(student[k]->value),
            "ema_update: shape mismatch at " + teacher[k]->name);
    float* t = teacher[k]->value.data();
    const float* s = student[k]->value.data();
    for (std::size_t i = 0; i < teacher[k]->value.size(); ++i) t[i] = m * t[i] + one_minus * s[i];
  }
}

double clip_grad_norm(const ParamRefs& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) {
    for (float g : p->grad.values()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const float scale = static_cast<float>(max_norm / norm);
    for (Parameter* p : params) {
      for (float& g : p->grad.values()) g *= scale;
    }
  }
  return norm;
}

void save_checkpoint(const std::filesystem::path& path, const ConstParamRefs& params) {
  ByteWriter w;
  w.text("PPGT");
  w.u16(kCheckpointVersion);
  for (const Parameter* p : params) {
    w.u32(static_cast<std::uint32_t>(p->name.size()));
    w.text(p->name);
    w.u32(static_cast<std::uint32_t>(p->value.rank()));
    for (std::size_t e : p->value.shape()) w.u64(e);
    for (float v : p->value.values()) w.f32(v);
  }
  write_file_atomic(path, w.buffer());
}

void load_checkpoint(const std::filesystem::path& path, const ParamRefs& params) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes, path.string());
  if (r.text(4) != "PPGT") throw FormatError(path.string() + ": bad checkpoint magic");
  const auto version = r.u16();
  if (version != kCheckpointVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  std::map<std::string, Tensor> found;
  while (!r.done()) {
    const std::string name = r.text(r.u32());
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw FormatError(path.string() + ": implausible rank for " + name);
    std::vector<std::size_t> shape(rank);
    for (auto& e : shape) e = static_cast<std::size_t>(r.u64());
    const std::size_t n = shape_product(shape);
    if (n * 4 > r.remaining()) throw FormatError(path.string() + ": truncated file");
    std::vector<float> data(n);
    for (float& v : data) v = r.f32();
    found.emplace(name, Tensor(std::move(shape), std::move(data)));
  }
  for (Parameter* p : params) {
    auto it = found.find(p->name);
    if (it == found.end()) throw FormatError(path.string() + ": missing tensor " + p->name);
    if (!it->second.same_shape(p->value)) {
      throw FormatError(path.string() + ": shape mismatch for " + p->name);
    }
    p->value = it->second;
  }
}

}  // namespace ppgta
