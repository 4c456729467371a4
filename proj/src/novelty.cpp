#include "ppgta/novelty.hpp"

#include <cmath>

namespace ppgta {

namespace {

// One MSE gradient step of `net` on a uniform minibatch; returns the batch loss.
double fit_step(RndNet& net, AdamW& opt, const ReplayBuffer& buffer, int batch, double lr, Rng& rng) {
  require(!buffer.empty(), "novelty: training on an empty replay buffer");
  zero_grad(opt.params());
  double loss = 0.0;
  RndNet::Cache cache;
  for (int b = 0; b < batch; ++b) {
    const RndSample& s = buffer[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(buffer.size()) - 1))];
    const std::vector<float> out = net.forward(s.input, &cache);
    std::vector<float> g(out.size());
    const float scale = 2.0f / static_cast<float>(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const float d = out[i] - s.target[i];
      loss += static_cast<double>(d) * d / static_cast<double>(out.size());
      g[i] = scale * d;
    }
    net.backward(cache, g);
  }
  loss /= batch;
  if (!std::isfinite(loss)) throw TrainingDivergence("novelty: predictor MSE is not finite");
  opt.step(lr, 1.0f / static_cast<float>(batch));
  return loss;
}

}  // namespace

Frame preprocess(const Frame& frame, const DetectionSet& detections) {
  const BoundingBox* box = largest_box(detections);
  return downsample(box ? od_mask(frame, *box) : frame, kNoveltyInput, kNoveltyInput);
}

// ------------------------------------------------------------------ network

RndNet::RndNet(const std::string& prefix, const RndConfig& config)
    : body_(prefix + ".body", EncoderConfig{config.input, config.input, config.channels, config.hidden}),
      head_(prefix + ".head", static_cast<std::size_t>(config.hidden), static_cast<std::size_t>(config.projection)) {}

void RndNet::init(Rng& rng) {
  body_.init(rng);
  head_.init(rng);
}

std::vector<float> RndNet::forward(std::span<const float> input, Cache* cache) const {
  std::vector<float> hidden(body_.embedding_size());
  body_.forward(input, hidden, cache ? &cache->body : nullptr);
  relu_inplace(hidden);
  std::vector<float> out(head_.out_features());
  head_.forward(hidden, out);
  if (cache) cache->hidden = std::move(hidden);
  return out;
}

void RndNet::backward(const Cache& cache, std::span<const float> g_out) {
  std::vector<float> gh(cache.hidden.size());
  head_.backward(cache.hidden, g_out, gh);
  relu_backward(cache.hidden, gh);
  body_.backward(cache.body, gh);
}

// ------------------------------------------------------------------ replay buffer

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  require(capacity > 0, "ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(RndSample sample) {
  if (items_.size() == capacity_) items_.pop_front();
  items_.push_back(std::move(sample));
}

// ------------------------------------------------------------------ ensemble

double ensemble_variance(const std::vector<std::vector<float>>& predictions) {
  require(!predictions.empty(), "ensemble_variance: no predictions");
  const std::size_t dims = predictions.front().size();
  const double n = static_cast<double>(predictions.size());
  double total = 0.0;
  for (std::size_t d = 0; d < dims; ++d) {
    double mean = 0.0;
    for (const auto& p : predictions) mean += p[d];
    mean /= n;
    double var = 0.0;
    for (const auto& p : predictions) var += (p[d] - mean) * (p[d] - mean);
    total += var / n;
  }
  return dims ? total / static_cast<double>(dims) : 0.0;
}

EnsembleRnd::EnsembleRnd(const NoveltyConfig& config)
    : config_(config), target_("rnd.target", config.net), buffer_(config.buffer) {
  require(config.ensemble >= 1 && config.batch >= 1, "EnsembleRnd: ensemble and batch must be positive");
  Rng target_rng = make_stream(config.seed, "rnd.target");
  target_.init(target_rng);
  members_.reserve(static_cast<std::size_t>(config.ensemble));
  for (int i = 0; i < config.ensemble; ++i) {
    members_.emplace_back("rnd.member" + std::to_string(i), config.net);
    Rng rng = make_stream(config.seed, "rnd.member" + std::to_string(i));
    members_.back().init(rng);
  }
  optimizers_.reserve(members_.size());
  for (auto& m : members_) optimizers_.emplace_back(params_of(m), AdamWConfig{});
}

std::vector<float> EnsembleRnd::target_projection(std::span<const float> input) const {
  return target_.forward(input);
}

std::vector<std::vector<float>> EnsembleRnd::predictions(std::span<const float> input) const {
  std::vector<std::vector<float>> out;
  out.reserve(members_.size());
  for (const auto& m : members_) out.push_back(m.forward(input));
  return out;
}

double EnsembleRnd::reward(std::span<const float> input) const { return ensemble_variance(predictions(input)); }

void EnsembleRnd::observe(std::span<const float> input) {
  buffer_.push({std::vector<float>(input.begin(), input.end()), target_.forward(input)});
}

std::vector<double> EnsembleRnd::train(int steps, Rng& rng) {
  std::vector<double> losses(members_.size(), 0.0);
  for (int s = 0; s < steps; ++s) {
    for (std::size_t i = 0; i < members_.size(); ++i) {
      losses[i] = fit_step(members_[i], optimizers_[i], buffer_, config_.batch, config_.lr, rng);
    }
  }
  return losses;
}

// ------------------------------------------------------------------ single predictor

SingleRnd::SingleRnd(const NoveltyConfig& config)
    : config_(config),
      target_("rnd.target", config.net),
      predictor_("rnd.member0", config.net),
      optimizer_(params_of(predictor_), AdamWConfig{}),
      buffer_(config.buffer) {
  Rng target_rng = make_stream(config.seed, "rnd.target");
  target_.init(target_rng);
  Rng rng = make_stream(config.seed, "rnd.member0");
  predictor_.init(rng);
}

double SingleRnd::reward(std::span<const float> input) const {
  const std::vector<float> t = target_.forward(input);
  const std::vector<float> p = predictor_.forward(input);
  double mse = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) mse += (p[i] - t[i]) * (p[i] - t[i]);
  return mse / static_cast<double>(t.size());
}

void SingleRnd::observe(std::span<const float> input) {
  buffer_.push({std::vector<float>(input.begin(), input.end()), target_.forward(input)});
}

double SingleRnd::train(int steps, Rng& rng) {
  double loss = 0.0;
  for (int s = 0; s < steps; ++s) loss = fit_step(predictor_, optimizer_, buffer_, config_.batch, config_.lr, rng);
  return loss;
}

// ------------------------------------------------------------------ normalizer

void RunningStd::update(double x) {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

double RunningStd::stddev() const { return n_ < 2 ? 1.0 : std::sqrt(m2_ / static_cast<double>(n_)); }

double RunningStd::normalize(double x) const {
  const double s = stddev();
  return s > 1e-12 ? x / s : x;
}

}  // namespace ppgta
