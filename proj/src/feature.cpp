#include "ppgta/feature.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <optional>

#include "ppgta/losses.hpp"

namespace ppgta {

std::vector<float> frame_to_input(const Frame& frame) {
  const std::size_t plane = static_cast<std::size_t>(frame.width) * frame.height;
  std::vector<float> out(plane * 3);
  for (std::size_t i = 0; i < plane; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out[c * plane + i] = frame.pixels[i * 3 + c] / 255.0f;
  }
  return out;
}

// ------------------------------------------------------------------ encoder

Encoder::Encoder(const std::string& prefix, const EncoderConfig& config) : config_(config) {
  require(!config.channels.empty() && config.embedding > 0, "Encoder: empty architecture");
  std::size_t h = static_cast<std::size_t>(config.frame_height);
  std::size_t w = static_cast<std::size_t>(config.frame_width);
  std::size_t in_c = 3;
  extents_h_.push_back(h);
  extents_w_.push_back(w);
  for (std::size_t i = 0; i < config.channels.size(); ++i) {
    require(h >= Conv2d::kKernel && w >= Conv2d::kKernel, "Encoder: frame too small for the conv stack");
    const auto out_c = static_cast<std::size_t>(config.channels[i]);
    convs_.emplace_back(prefix + ".conv" + std::to_string(i), in_c, out_c);
    h = Conv2d::output_extent(h);
    w = Conv2d::output_extent(w);
    extents_h_.push_back(h);
    extents_w_.push_back(w);
    in_c = out_c;
  }
  proj_ = Linear(prefix + ".proj", in_c * h * w, static_cast<std::size_t>(config.embedding));
}

void Encoder::init(Rng& rng) {
  for (auto& c : convs_) c.init(rng);
  proj_.init(rng);
}

std::size_t Encoder::input_size() const {
  return 3 * static_cast<std::size_t>(config_.frame_width) * static_cast<std::size_t>(config_.frame_height);
}

std::vector<float> Encoder::encode(const Frame& frame) const {
  require(frame.width == config_.frame_width && frame.height == config_.frame_height,
          "Encoder: frame is " + std::to_string(frame.width) + "x" + std::to_string(frame.height) +
              ", encoder expects " + std::to_string(config_.frame_width) + "x" +
              std::to_string(config_.frame_height));
  std::vector<float> out(embedding_size());
  forward(frame_to_input(frame), out, nullptr);
  return out;
}

void Encoder::forward(std::span<const float> input, std::span<float> out, Cache* cache) const {
  require(input.size() == input_size() && out.size() == embedding_size(), "Encoder: shape mismatch");
  std::vector<float> cur(input.begin(), input.end());
  if (cache) {
    cache->acts.clear();
    cache->acts.push_back(cur);
  }
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    std::vector<float> next(convs_[i].out_channels() * extents_h_[i + 1] * extents_w_[i + 1]);
    convs_[i].forward(cur, extents_h_[i], extents_w_[i], next);
    relu_inplace(next);
    cur = std::move(next);
    if (cache) cache->acts.push_back(cur);
  }
  proj_.forward(cur, out);
}

void Encoder::backward(const Cache& cache, std::span<const float> g_out) {
  const std::size_t n = convs_.size();
  std::vector<float> g(cache.acts[n].size());
  proj_.backward(cache.acts[n], g_out, g);
  for (std::size_t i = n; i-- > 0;) {
    relu_backward(cache.acts[i + 1], g);
    std::vector<float> gx;
    if (i > 0) gx.resize(cache.acts[i].size());
    convs_[i].backward(cache.acts[i], extents_h_[i], extents_w_[i], g, gx);
    g = std::move(gx);
  }
}

// ------------------------------------------------------------------ inverse dynamics head

InverseDynamicsHead::InverseDynamicsHead(std::size_t embedding, std::size_t hidden)
    : fc1_("invdyn.fc1", 2 * embedding, hidden), fc2_("invdyn.fc2", hidden, kActionCount) {}

void InverseDynamicsHead::init(Rng& rng) {
  fc1_.init(rng);
  fc2_.init(rng);
}

std::vector<float> InverseDynamicsHead::forward(std::span<const float> prev, std::span<const float> next,
                                                Cache* cache) const {
  require(prev.size() + next.size() == fc1_.in_features(), "InverseDynamicsHead: input width mismatch");
  std::vector<float> input(prev.begin(), prev.end());
  input.insert(input.end(), next.begin(), next.end());
  std::vector<float> hidden(fc1_.out_features());
  fc1_.forward(input, hidden);
  relu_inplace(hidden);
  std::vector<float> logits(kActionCount);
  fc2_.forward(hidden, logits);
  if (cache) {
    cache->input = std::move(input);
    cache->hidden = std::move(hidden);
  }
  return logits;
}

void InverseDynamicsHead::backward(const Cache& cache, std::span<const float> g_logits, std::span<float> g_prev,
                                   std::span<float> g_next) {
  std::vector<float> gh(cache.hidden.size());
  fc2_.backward(cache.hidden, g_logits, gh);
  relu_backward(cache.hidden, gh);
  std::vector<float> gin(cache.input.size());
  fc1_.backward(cache.input, gh, gin);
  std::copy_n(gin.begin(), g_prev.size(), g_prev.begin());
  std::copy(gin.begin() + static_cast<std::ptrdiff_t>(g_prev.size()), gin.end(), g_next.begin());
}

// ------------------------------------------------------------------ datasets

CorpusSplit split_corpus(const std::vector<Trajectory>& corpus, std::uint64_t seed) {
  require(!corpus.empty(), "split_corpus: empty corpus");
  CorpusSplit split;
  Rng rng = make_stream(seed, "corpus.split");
  for (ExpertKind kind : {ExpertKind::OrbitTest, ExpertKind::PathFollow}) {
    std::vector<int> members;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (corpus[i].kind == kind) members.push_back(static_cast<int>(i));
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto n = static_cast<double>(members.size());
    const auto n_train = static_cast<std::size_t>(std::lround(0.7 * n));
    const auto n_val = static_cast<std::size_t>(std::lround(0.1 * n));
    for (std::size_t k = 0; k < members.size(); ++k) {
      auto& dst = k < n_train ? split.train : (k < n_train + n_val ? split.val : split.test);
      dst.push_back(members[k]);
    }
  }
  for (auto* v : {&split.train, &split.val, &split.test}) std::sort(v->begin(), v->end());
  return split;
}

InvDynDataset build_invdyn_dataset(const std::vector<Trajectory>& corpus, const CorpusSplit& split) {
  require(!corpus.empty(), "build_invdyn_dataset: empty corpus");
  InvDynDataset data;
  auto add = [&](const std::vector<int>& members, std::vector<InvDynPair>& out) {
    for (int t : members) {
      const Trajectory& traj = corpus.at(static_cast<std::size_t>(t));
      if (traj.frames.size() < 2) {
        std::cerr << "warning: skipping trajectory " << t << " with fewer than 2 frames\n";
        ++data.skipped;
        continue;
      }
      for (std::size_t s = 0; s + 1 < traj.frames.size(); ++s) out.push_back({t, static_cast<int>(s)});
    }
  };
  add(split.train, data.train);
  add(split.val, data.val);
  add(split.test, data.test);
  return data;
}

int draw_mask_choice(Rng& rng, double probability) {
  if (uniform01(rng) >= probability) return -1;
  return uniform01(rng) < 0.5 ? 0 : 1;
}

// ------------------------------------------------------------------ training

namespace {

struct EmbedCache {
  // Unmasked embeddings per trajectory frame, computed lazily for evaluation.
  std::vector<std::vector<std::vector<float>>> per_traj;
};

const std::vector<float>& cached_embedding(EmbedCache& cache, const Encoder& enc, const std::vector<Trajectory>& corpus,
                                           int t, int s) {
  auto& traj_cache = cache.per_traj[static_cast<std::size_t>(t)];
  if (traj_cache.empty()) traj_cache.resize(corpus[static_cast<std::size_t>(t)].frames.size());
  auto& e = traj_cache[static_cast<std::size_t>(s)];
  if (e.empty()) e = enc.encode(corpus[static_cast<std::size_t>(t)].frames[static_cast<std::size_t>(s)]);
  return e;
}

}  // namespace

InvDynEval evaluate_invdyn(const Encoder& encoder, const InverseDynamicsHead& head,
                           const std::vector<Trajectory>& corpus, const std::vector<InvDynPair>& pairs) {
  InvDynEval ev;
  ev.confusion.assign(kActionCount, std::vector<int>(kActionCount, 0));
  if (pairs.empty()) return ev;
  EmbedCache cache;
  cache.per_traj.resize(corpus.size());
  int correct = 0;
  for (const InvDynPair& p : pairs) {
    const auto& a = cached_embedding(cache, encoder, corpus, p.trajectory, p.step);
    const auto& b = cached_embedding(cache, encoder, corpus, p.trajectory, p.step + 1);
    const auto logits = head.forward(a, b, nullptr);
    const int target = corpus[static_cast<std::size_t>(p.trajectory)].actions[static_cast<std::size_t>(p.step)];
    ev.loss += softmax_xent(logits, target).loss;
    const int pred = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    correct += pred == target;
    ++ev.confusion[static_cast<std::size_t>(target)][static_cast<std::size_t>(pred)];
  }
  ev.loss /= static_cast<double>(pairs.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(pairs.size());
  return ev;
}

EncoderTrainResult train_encoder_with_head(Encoder& encoder, InverseDynamicsHead& head,
                                           const std::vector<Trajectory>& corpus, const InvDynDataset& data,
                                           const Detector& detector, const EncoderTrainConfig& config) {
  require(!data.train.empty(), "train_encoder: empty training split");
  require(config.epochs > 0 && config.batch > 0, "train_encoder: epochs and batch must be positive");

  // Largest detected box per frame, from the recorded poses.
  std::vector<std::vector<std::optional<BoundingBox>>> boxes(corpus.size());
  for (std::size_t t = 0; t < corpus.size(); ++t) {
    const Trajectory& traj = corpus[t];
    boxes[t].resize(traj.frames.size());
    for (std::size_t s = 0; s < traj.frames.size(); ++s) {
      const AgentPose pose = s < traj.poses.size() ? traj.poses[s] : AgentPose{};
      const DetectionSet det = detector.detect(traj.frames[s], pose);
      if (const BoundingBox* b = largest_box(det)) boxes[t][s] = *b;
    }
  }

  ParamRefs params = params_of(encoder);
  for (Parameter* p : params_of(head)) params.push_back(p);
  AdamW opt(params, config.adamw);
  Rng shuffle_rng = make_stream(config.seed, "encoder.shuffle");
  Rng mask_rng = make_stream(config.seed, "encoder.mask");

  EncoderTrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<Parameter> best_enc, best_head;
  auto snapshot = [](const ConstParamRefs& refs) {
    std::vector<Parameter> out;
    for (const Parameter* p : refs) out.push_back(*p);
    return out;
  };
  auto restore = [](const std::vector<Parameter>& from, const ParamRefs& to) {
    for (std::size_t i = 0; i < to.size(); ++i) to[i]->value = from[i].value;
  };

  std::vector<InvDynPair> order = data.train;
  const std::size_t per_epoch = config.max_pairs_per_epoch > 0
                                    ? std::min<std::size_t>(order.size(), static_cast<std::size_t>(config.max_pairs_per_epoch))
                                    : order.size();
  Encoder::Cache ca, cb;
  InverseDynamicsHead::Cache hc;
  std::vector<float> ea(encoder.embedding_size()), eb(encoder.embedding_size());
  std::vector<float> ga(encoder.embedding_size()), gb(encoder.embedding_size());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    zero_grad(params);
    int in_batch = 0;
    for (std::size_t i = 0; i < per_epoch; ++i) {
      const InvDynPair& p = order[i];
      const Trajectory& traj = corpus[static_cast<std::size_t>(p.trajectory)];
      const auto s = static_cast<std::size_t>(p.step);
      const int choice = draw_mask_choice(mask_rng, config.mask_probability);
      const auto& box_a = boxes[static_cast<std::size_t>(p.trajectory)][s];
      const auto& box_b = boxes[static_cast<std::size_t>(p.trajectory)][s + 1];
      const Frame fa = (choice == 0 && box_a) ? od_mask(traj.frames[s], *box_a) : traj.frames[s];
      const Frame fb = (choice == 1 && box_b) ? od_mask(traj.frames[s + 1], *box_b) : traj.frames[s + 1];
      if ((choice == 0 && box_a) || (choice == 1 && box_b)) ++result.masked_samples;
      ++result.total_samples;

      encoder.forward(frame_to_input(fa), ea, &ca);
      encoder.forward(frame_to_input(fb), eb, &cb);
      const auto logits = head.forward(ea, eb, &hc);
      const XentResult xent = softmax_xent(logits, traj.actions[s]);
      if (!std::isfinite(xent.loss)) {
        throw TrainingDivergence("train_encoder: non-finite loss at epoch " + std::to_string(epoch) + ", trajectory " +
                                 std::to_string(p.trajectory) + " step " + std::to_string(p.step));
      }
      epoch_loss += xent.loss;
      head.backward(hc, xent.grad, ga, gb);
      encoder.backward(ca, ga);
      encoder.backward(cb, gb);
      if (++in_batch == config.batch || i + 1 == per_epoch) {
        const double frac = static_cast<double>(i + 1) / static_cast<double>(per_epoch);
        opt.step(config.schedule.at(epoch + frac), 1.0f / static_cast<float>(in_batch));
        zero_grad(params);
        in_batch = 0;
      }
    }
    result.train_loss.push_back(epoch_loss / static_cast<double>(per_epoch));

    const std::vector<InvDynPair>& val = data.val.empty() ? data.train : data.val;
    const InvDynEval ev = evaluate_invdyn(encoder, head, corpus, val);
    result.val_loss.push_back(ev.loss);
    if (ev.loss < result.best_val_loss) {
      result.best_val_loss = ev.loss;
      result.best_val_accuracy = ev.accuracy;
      result.best_epoch = epoch;
      best_enc = snapshot(params_of(std::as_const(encoder)));
      best_head = snapshot(params_of(std::as_const(head)));
    }
  }
  restore(best_enc, params_of(encoder));
  restore(best_head, params_of(head));
  return result;
}

EncoderTrainResult train_encoder(Encoder& encoder, const std::vector<Trajectory>& corpus, const InvDynDataset& data,
                                 const Detector& detector, const EncoderTrainConfig& config) {
  InverseDynamicsHead head(encoder.embedding_size());
  Rng rng = make_stream(config.seed, "encoder.head_init");
  head.init(rng);
  return train_encoder_with_head(encoder, head, corpus, data, detector, config);
}

}  // namespace ppgta
