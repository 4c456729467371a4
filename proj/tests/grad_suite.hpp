#pragma once

// Finite-difference checks of every trainable block, shared by the unit tests and the
// acceptance run. Each returns the comparison over parameters and inputs together.

#include "gradcheck.hpp"
#include "ppgta/explore.hpp"
#include "ppgta/losses.hpp"

namespace ppgta::testing {

namespace detail {

template <class M> ParamRefs refs(M& m) {
  ParamRefs out;
  m.for_each_param([&](Parameter& p) { out.push_back(&p); });
  return out;
}

inline FdReport merge(const FdReport& a, const FdReport& b) {
  return {std::max(a.worst, b.worst), std::max(a.worst_resolved, b.worst_resolved), a.resolved + b.resolved,
          a.total + b.total};
}

// Parameters plus explicit input spans in one report.
inline FdReport check(const ParamRefs& params, std::vector<std::span<float>> inputs,
                      std::vector<std::span<const float>> input_grads, const std::function<double()>& loss,
                      int per_tensor = 24, double eps = 1e-2, const KinkPattern& pattern = {}) {
  for (Parameter* p : params) {
    inputs.push_back(p->value.span());
    input_grads.push_back(p->grad.span());
  }
  return fd_report(std::move(inputs), std::move(input_grads), loss, per_tensor, eps, pattern);
}

}  // namespace detail

inline FdReport linear_gradients() {
  Rng rng = make_stream(1, "t");
  Linear fc("fc", 7, 5);
  fc.init(rng);
  auto x = random_vector(7, rng);
  const auto w = random_vector(5, rng);
  auto loss = [&] {
    std::vector<float> y(5);
    fc.forward(x, y);
    return dot(y, w);
  };
  zero_grad(detail::refs(fc));
  std::vector<float> gx(7);
  fc.backward(x, w, gx);
  return detail::check(detail::refs(fc), {std::span<float>(x)}, {std::span<const float>(gx)}, loss);
}

inline FdReport conv_gradients() {
  Rng rng = make_stream(2, "t");
  Conv2d conv("conv", 3, 4);
  conv.init(rng);
  const std::size_t h = 9, w = 7;
  const std::size_t oh = Conv2d::output_extent(h), ow = Conv2d::output_extent(w);
  auto x = random_vector(3 * h * w, rng);
  const auto wy = random_vector(4 * oh * ow, rng);
  auto loss = [&] {
    std::vector<float> y(4 * oh * ow);
    conv.forward(x, h, w, y);
    return dot(y, wy);
  };
  zero_grad(detail::refs(conv));
  std::vector<float> gx(x.size());
  conv.backward(x, h, w, wy, gx);
  return detail::check(detail::refs(conv), {std::span<float>(x)}, {std::span<const float>(gx)}, loss);
}

inline FdReport gru_gradients() {
  Rng rng = make_stream(3, "t");
  GruCell gru("gru", 6, 5);
  gru.init(rng);
  auto x = random_vector(6, rng);
  auto h = random_vector(5, rng, 0.5);
  const auto w = random_vector(5, rng);
  auto loss = [&] { return dot(gru.step(x, h), w); };
  zero_grad(detail::refs(gru));
  GruCache cache;
  gru.step(x, h, &cache);
  std::vector<float> gx(6), gh(5);
  gru.backward(cache, w, gx, gh);
  return detail::check(detail::refs(gru), {std::span<float>(x), std::span<float>(h)},
                       {std::span<const float>(gx), std::span<const float>(gh)}, loss);
}

inline FdReport layernorm_gradients() {
  Rng rng = make_stream(4, "t");
  LayerNorm ln("ln", 6);
  for (float& v : ln.gain.value.values()) v = 1.0f + static_cast<float>(uniform01(rng) - 0.5);
  for (float& v : ln.shift.value.values()) v = static_cast<float>(uniform01(rng) - 0.5);
  auto x = random_vector(6, rng);
  const auto w = random_vector(6, rng);
  auto loss = [&] {
    std::vector<float> y(6);
    ln.forward(x, y, nullptr);
    return dot(y, w);
  };
  zero_grad(detail::refs(ln));
  LayerNormCache cache;
  std::vector<float> y(6), gx(6);
  ln.forward(x, y, &cache);
  ln.backward(cache, w, gx);
  return detail::check(detail::refs(ln), {std::span<float>(x)}, {std::span<const float>(gx)}, loss);
}

inline FdReport encoder_gradients() {
  Rng rng = make_stream(1, "t");
  Encoder enc("enc", {8, 8, {4, 8}, 16});
  enc.init(rng);
  auto x = random_vector(enc.input_size(), rng, 0.5);
  const auto w = random_vector(16, rng);
  auto loss = [&] {
    std::vector<float> e(16);
    enc.forward(x, e, nullptr);
    return dot(e, w);
  };
  zero_grad(detail::refs(enc));
  Encoder::Cache cache;
  std::vector<float> e(16);
  enc.forward(x, e, &cache);
  enc.backward(cache, w);
  return detail::check(detail::refs(enc), {}, {}, loss);
}

inline PolicyConfig tiny_student() {
  PolicyConfig c;
  c.encoder = {8, 8, {4, 8}, 16};
  c.window = 3;
  c.local_hidden = 4;
  c.global_hidden = 5;
  c.mlp1 = 8;
  c.mlp2 = 6;
  c.dropout = 0.0f;
  return c;
}

/// Encoder, dual GRU trunk, MLP, action and value heads on three 8x8 frames. Through the stacked
/// frames the first conv sits under dense ReLU kinks, so steps that flip a unit are tracked.
inline FdReport student_gradients() {
  Rng rng = make_stream(2, "t");
  PolicyNet net("policy", tiny_student());
  net.init(rng);
  std::vector<std::vector<float>> frames;
  for (int k = 0; k < 3; ++k) frames.push_back(random_vector(net.encoder().input_size(), rng, 0.5));
  auto global = random_vector(5, rng, 0.5);
  const auto w_logits = random_vector(kActionCount, rng);
  const auto w_hc = random_vector(net.hc_size(), rng);
  const auto w_global = random_vector(5, rng);
  const float w_value = 0.7f;

  std::vector<bool> relus;  // on/off state of every ReLU in the last evaluation
  auto loss = [&] {
    std::vector<std::vector<float>> emb(3, std::vector<float>(16));
    std::vector<Encoder::Cache> ec(3);
    std::vector<std::span<const float>> window;
    for (std::size_t k = 0; k < 3; ++k) {
      net.encoder().forward(frames[k], emb[k], &ec[k]);
      window.emplace_back(emb[k]);
    }
    PolicyNet::Cache pc;
    const auto out = net.forward(window, global, nullptr, &pc);
    relus.clear();
    for (const auto& c : ec) {
      for (std::size_t l = 1; l < c.acts.size(); ++l) {
        for (float a : c.acts[l]) relus.push_back(a > 0.0f);
      }
    }
    for (float a : pc.a1) relus.push_back(a > 0.0f);
    for (float a : pc.a2) relus.push_back(a > 0.0f);
    return dot(out.logits, w_logits) + dot(out.hc, w_hc) + dot(out.global, w_global) + w_value * out.value;
  };

  zero_grad(detail::refs(net));
  std::vector<std::vector<float>> emb(3, std::vector<float>(16));
  std::vector<Encoder::Cache> enc_cache(3);
  std::vector<std::span<const float>> window;
  for (std::size_t k = 0; k < 3; ++k) {
    net.encoder().forward(frames[k], emb[k], &enc_cache[k]);
    window.emplace_back(emb[k]);
  }
  PolicyNet::Cache cache;
  net.forward(window, global, nullptr, &cache);
  PolicyNet::InputGrads grads;
  net.backward(cache, w_logits, w_hc, w_value, w_global, &grads);
  for (std::size_t k = 0; k < 3; ++k) net.encoder().backward(enc_cache[k], grads.window[k]);

  return detail::check(detail::refs(net), {std::span<float>(global)}, {std::span<const float>(grads.global_prev)},
                       loss, 16, 3e-2, [&] { return relus; });
}

inline FdReport rnd_gradients() {
  Rng rng = make_stream(2, "t");
  RndNet net("rnd", {8, {4, 8}, 6, 5});
  net.init(rng);
  const auto x = random_vector(net.input_size(), rng, 0.5);
  const auto w = random_vector(net.output_size(), rng);
  std::vector<bool> relus;
  auto loss = [&] {
    RndNet::Cache c;
    const double l = dot(net.forward(x, &c), w);
    relus.clear();
    for (std::size_t k = 1; k < c.body.acts.size(); ++k) {
      for (float a : c.body.acts[k]) relus.push_back(a > 0.0f);
    }
    for (float a : c.hidden) relus.push_back(a > 0.0f);
    return l;
  };
  zero_grad(detail::refs(net));
  RndNet::Cache cache;
  net.forward(x, &cache);
  net.backward(cache, w);
  return detail::check(detail::refs(net), {}, {}, loss, 24, 1e-2, [&] { return relus; });
}

/// Unclipped PPO sample loss (surrogate + value + entropy) w.r.t. logits and value.
inline FdReport ppo_gradients() {
  Rng rng = make_stream(1, "t");
  auto logits = random_vector(kActionCount, rng, 1.5);
  std::vector<float> value{0.3f};
  const PpoConfig c;
  const double old_lp = log_softmax(logits)[4] + 0.05;  // ratio ~0.95, inside the clip range
  auto loss = [&] { return ppo_sample_loss(logits, value[0], 4, old_lp, 0.8, 1.2, c).loss; };
  const PpoSampleLoss l = ppo_sample_loss(logits, value[0], 4, old_lp, 0.8, 1.2, c);
  require(!l.clipped, "ppo_gradients: sample unexpectedly clipped");
  const std::vector<float> gv{l.g_value};
  return fd_report({std::span<float>(logits), std::span<float>(value)},
                   {std::span<const float>(l.g_logits), std::span<const float>(gv)}, loss);
}

/// Imitation loss (cross-entropy + consistency) w.r.t. logits and h^c.
inline FdReport imitation_loss_gradients() {
  Rng rng = make_stream(4, "t");
  auto logits = random_vector(kActionCount, rng, 2.0);
  auto hc = random_vector(10, rng);
  const auto teacher = random_vector(10, rng);
  const ImitationLossConfig c;
  auto loss = [&] { return imitation_loss(logits, hc, teacher, 4, c).loss; };
  const ImitationLoss l = imitation_loss(logits, hc, teacher, 4, c);
  return fd_report({std::span<float>(logits), std::span<float>(hc)},
                   {std::span<const float>(l.g_logits), std::span<const float>(l.g_hc)}, loss);
}

/// Pass rule: every resolvable entry within 1e-3; entries on a kink (no kink-free step) only
/// need the right sign and rough size, and must stay a minority.
inline bool fd_passes(const FdReport& r) {
  return r.worst_resolved <= 1e-3 && r.worst <= 0.1 && r.resolved * 4 >= r.total * 3;
}

}  // namespace ppgta::testing
