#include "ppgta/nn.hpp"

#include <algorithm>
#include <cmath>

namespace ppgta {

Parameter::Parameter(std::string n, std::vector<std::size_t> shape)
    : name(std::move(n)), value(shape), grad(shape) {}

void zero_grad(const ParamRefs& params) {
  for (Parameter* p : params) p->grad.fill(0.0f);
}

void copy_values(const ConstParamRefs& from, const ParamRefs& to) {
  require(from.size() == to.size(), "copy_values: parameter count mismatch");
  for (std::size_t i = 0; i < from.size(); ++i) {
    require(from[i]->value.same_shape(to[i]->value),
            "copy_values: shape mismatch at " + to[i]->name);
    to[i]->value = from[i]->value;
  }
}

std::size_t parameter_count(const ConstParamRefs& params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += p->value.size();
  return n;
}

namespace {

void fill_uniform(Tensor& t, Rng& rng, float bound) {
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (float& v : t.values()) v = dist(rng);
}

}  // namespace

// ---------------------------------------------------------------- Linear

Linear::Linear(const std::string& name, std::size_t in, std::size_t out)
    : weight(name + ".weight", {out, in}), bias(name + ".bias", {out}), in_(in), out_(out) {}

void Linear::init(Rng& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in_));
  fill_uniform(weight.value, rng, bound);
  fill_uniform(bias.value, rng, bound);
}

void Linear::forward(std::span<const float> x, std::span<float> y) const {
  require(x.size() == in_ && y.size() == out_, "Linear: shape mismatch");
  const float* w = weight.value.data();
  for (std::size_t o = 0; o < out_; ++o) {
    const float* row = w + o * in_;
    float acc = bias.value[o];
    for (std::size_t i = 0; i < in_; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void Linear::backward(std::span<const float> x, std::span<const float> gy, std::span<float> gx) {
  require(x.size() == in_ && gy.size() == out_, "Linear: shape mismatch");
  float* gw = weight.grad.data();
  const float* w = weight.value.data();
  if (!gx.empty()) std::fill(gx.begin(), gx.end(), 0.0f);
  for (std::size_t o = 0; o < out_; ++o) {
    const float g = gy[o];
    if (g == 0.0f) continue;
    bias.grad[o] += g;
    float* grow = gw + o * in_;
    for (std::size_t i = 0; i < in_; ++i) grow[i] += g * x[i];
    if (!gx.empty()) {
      const float* row = w + o * in_;
      for (std::size_t i = 0; i < in_; ++i) gx[i] += g * row[i];
    }
  }
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(const std::string& name, std::size_t in_channels, std::size_t out_channels)
    : weight(name + ".weight", {out_channels, in_channels, kKernel, kKernel}),
      bias(name + ".bias", {out_channels}),
      in_(in_channels),
      out_(out_channels) {}

std::size_t Conv2d::output_extent(std::size_t input_extent) {
  require(input_extent >= kKernel, "Conv2d: input smaller than kernel");
  return (input_extent - kKernel) / kStride + 1;
}

void Conv2d::init(Rng& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(in_ * kKernel * kKernel));
  fill_uniform(weight.value, rng, bound);
  fill_uniform(bias.value, rng, bound);
}

void Conv2d::forward(std::span<const float> x, std::size_t h, std::size_t w,
                     std::span<float> y) const {
  const std::size_t oh = output_extent(h);
  const std::size_t ow = output_extent(w);
  require(x.size() == in_ * h * w && y.size() == out_ * oh * ow, "Conv2d: shape mismatch");
  const float* wt = weight.value.data();
  for (std::size_t o = 0; o < out_; ++o) {
    float* yo = y.data() + o * oh * ow;
    std::fill(yo, yo + oh * ow, bias.value[o]);
    for (std::size_t c = 0; c < in_; ++c) {
      const float* xc = x.data() + c * h * w;
      const float* k = wt + (o * in_ + c) * kKernel * kKernel;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        float* yrow = yo + oy * ow;
        for (std::size_t ky = 0; ky < kKernel; ++ky) {
          const float* xrow = xc + (oy * kStride + ky) * w;
          const float k0 = k[ky * 3], k1 = k[ky * 3 + 1], k2 = k[ky * 3 + 2];
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const float* px = xrow + ox * kStride;
            yrow[ox] += k0 * px[0] + k1 * px[1] + k2 * px[2];
          }
        }
      }
    }
  }
}

void Conv2d::backward(std::span<const float> x, std::size_t h, std::size_t w,
                      std::span<const float> gy, std::span<float> gx) {
  const std::size_t oh = output_extent(h);
  const std::size_t ow = output_extent(w);
  require(x.size() == in_ * h * w && gy.size() == out_ * oh * ow, "Conv2d: shape mismatch");
  if (!gx.empty()) std::fill(gx.begin(), gx.end(), 0.0f);
  const float* wt = weight.value.data();
  float* gwt = weight.grad.data();
  for (std::size_t o = 0; o < out_; ++o) {
    const float* go = gy.data() + o * oh * ow;
    float gb = 0.0f;
    for (std::size_t i = 0; i < oh * ow; ++i) gb += go[i];
    bias.grad[o] += gb;
    for (std::size_t c = 0; c < in_; ++c) {
      const float* xc = x.data() + c * h * w;
      const float* k = wt + (o * in_ + c) * kKernel * kKernel;
      float* gk = gwt + (o * in_ + c) * kKernel * kKernel;
      float* gxc = gx.empty() ? nullptr : gx.data() + c * h * w;
      for (std::size_t oy = 0; oy < oh; ++oy) {
        const float* grow = go + oy * ow;
        for (std::size_t ky = 0; ky < kKernel; ++ky) {
          const float* xrow = xc + (oy * kStride + ky) * w;
          float a0 = 0.0f, a1 = 0.0f, a2 = 0.0f;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const float g = grow[ox];
            const float* px = xrow + ox * kStride;
            a0 += g * px[0];
            a1 += g * px[1];
            a2 += g * px[2];
          }
          gk[ky * 3] += a0;
          gk[ky * 3 + 1] += a1;
          gk[ky * 3 + 2] += a2;
          if (gxc) {
            float* gxrow = gxc + (oy * kStride + ky) * w;
            const float k0 = k[ky * 3], k1 = k[ky * 3 + 1], k2 = k[ky * 3 + 2];
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const float g = grow[ox];
              float* p = gxrow + ox * kStride;
              p[0] += g * k0;
              p[1] += g * k1;
              p[2] += g * k2;
            }
          }
        }
      }
    }
  }
}

// ---------------------------------------------------------------- GruCell

GruCell::GruCell(const std::string& name, std::size_t input_size, std::size_t hidden_size)
    : w_x(name + ".w_x", {3 * hidden_size, input_size}),
      w_h(name + ".w_h", {3 * hidden_size, hidden_size}),
      b_x(name + ".b_x", {3 * hidden_size}),
      b_h(name + ".b_h", {3 * hidden_size}),
      in_(input_size),
      hid_(hidden_size) {}

void GruCell::init(Rng& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(hid_));
  fill_uniform(w_x.value, rng, bound);
  fill_uniform(w_h.value, rng, bound);
  fill_uniform(b_x.value, rng, bound);
  fill_uniform(b_h.value, rng, bound);
}

std::vector<float> GruCell::step(std::span<const float> x, std::span<const float> h,
                                 GruCache* cache) const {
  require(x.size() == in_, "GruCell: input width mismatch");
  require(h.size() == hid_, "GruCell: hidden width mismatch");
  const std::size_t H = hid_;
  std::vector<float> ax(3 * H), ah(3 * H);
  const float* wx = w_x.value.data();
  const float* wh = w_h.value.data();
  for (std::size_t j = 0; j < 3 * H; ++j) {
    const float* row = wx + j * in_;
    float acc = b_x.value[j];
    for (std::size_t i = 0; i < in_; ++i) acc += row[i] * x[i];
    ax[j] = acc;
    const float* hrow = wh + j * H;
    float hacc = b_h.value[j];
    for (std::size_t i = 0; i < H; ++i) hacc += hrow[i] * h[i];
    ah[j] = hacc;
  }
  std::vector<float> out(H), z(H), r(H), n(H), hn(H);
  for (std::size_t j = 0; j < H; ++j) {
    z[j] = sigmoid(ax[j] + ah[j]);
    r[j] = sigmoid(ax[H + j] + ah[H + j]);
    hn[j] = ah[2 * H + j];
    n[j] = std::tanh(ax[2 * H + j] + r[j] * hn[j]);
    out[j] = (1.0f - z[j]) * h[j] + z[j] * n[j];
  }
  if (cache) {
    cache->x.assign(x.begin(), x.end());
    cache->h.assign(h.begin(), h.end());
    cache->z = std::move(z);
    cache->r = std::move(r);
    cache->n = std::move(n);
    cache->hn_lin = std::move(hn);
  }
  return out;
}

void GruCell::backward(const GruCache& c, std::span<const float> gh_next, std::span<float> gx,
                       std::span<float> gh) {
  const std::size_t H = hid_;
  require(gh_next.size() == H, "GruCell::backward: gradient width mismatch");
  std::vector<float> dax(3 * H), dah(3 * H);
  std::vector<float> gh_direct(H);
  for (std::size_t j = 0; j < H; ++j) {
    const float g = gh_next[j];
    const float dz = g * (c.n[j] - c.h[j]);
    const float dn = g * c.z[j];
    gh_direct[j] = g * (1.0f - c.z[j]);
    const float dan = dn * (1.0f - c.n[j] * c.n[j]);
    const float dr = dan * c.hn_lin[j];
    const float dhn = dan * c.r[j];
    const float daz = dz * c.z[j] * (1.0f - c.z[j]);
    const float dar = dr * c.r[j] * (1.0f - c.r[j]);
    dax[j] = daz;
    dax[H + j] = dar;
    dax[2 * H + j] = dan;
    dah[j] = daz;
    dah[H + j] = dar;
    dah[2 * H + j] = dhn;
  }
  if (!gx.empty()) std::fill(gx.begin(), gx.end(), 0.0f);
  if (!gh.empty()) std::copy(gh_direct.begin(), gh_direct.end(), gh.begin());
  const float* wx = w_x.value.data();
  const float* wh = w_h.value.data();
  float* gwx = w_x.grad.data();
  float* gwh = w_h.grad.data();
  for (std::size_t j = 0; j < 3 * H; ++j) {
    b_x.grad[j] += dax[j];
    b_h.grad[j] += dah[j];
    const float a = dax[j];
    float* grow = gwx + j * in_;
    const float* row = wx + j * in_;
    for (std::size_t i = 0; i < in_; ++i) grow[i] += a * c.x[i];
    if (!gx.empty()) {
      for (std::size_t i = 0; i < in_; ++i) gx[i] += a * row[i];
    }
    const float b = dah[j];
    float* ghrow = gwh + j * H;
    const float* hrow = wh + j * H;
    for (std::size_t i = 0; i < H; ++i) ghrow[i] += b * c.h[i];
    if (!gh.empty()) {
      for (std::size_t i = 0; i < H; ++i) gh[i] += b * hrow[i];
    }
  }
}

// ---------------------------------------------------------------- LayerNorm

LayerNorm::LayerNorm(const std::string& name, std::size_t dim)
    : gain(name + ".gain", {dim}), shift(name + ".shift", {dim}) {
  gain.value.fill(1.0f);
}

void LayerNorm::forward(std::span<const float> x, std::span<float> y, LayerNormCache* cache) const {
  const std::size_t d = x.size();
  require(d == gain.value.size() && y.size() == d, "LayerNorm: shape mismatch");
  float mean = 0.0f;
  for (float v : x) mean += v;
  mean /= static_cast<float>(d);
  float var = 0.0f;
  for (float v : x) var += (v - mean) * (v - mean);
  var /= static_cast<float>(d);
  const float inv_std = 1.0f / std::sqrt(var + kEps);
  if (cache) {
    cache->xhat.resize(d);
    cache->inv_std = inv_std;
  }
  for (std::size_t i = 0; i < d; ++i) {
    const float xh = (x[i] - mean) * inv_std;
    if (cache) cache->xhat[i] = xh;
    y[i] = gain.value[i] * xh + shift.value[i];
  }
}

void LayerNorm::backward(const LayerNormCache& c, std::span<const float> gy, std::span<float> gx) {
  const std::size_t d = c.xhat.size();
  std::vector<float> gxh(d);
  float sum_g = 0.0f, sum_gx = 0.0f;
  for (std::size_t i = 0; i < d; ++i) {
    gain.grad[i] += gy[i] * c.xhat[i];
    shift.grad[i] += gy[i];
    gxh[i] = gy[i] * gain.value[i];
    sum_g += gxh[i];
    sum_gx += gxh[i] * c.xhat[i];
  }
  const float inv_d = 1.0f / static_cast<float>(d);
  for (std::size_t i = 0; i < d; ++i) {
    gx[i] = c.inv_std * (gxh[i] - inv_d * sum_g - c.xhat[i] * inv_d * sum_gx);
  }
}

// ---------------------------------------------------------------- activations

void relu_inplace(std::span<float> x) {
  for (float& v : x) v = v > 0.0f ? v : 0.0f;
}

void relu_backward(std::span<const float> activated, std::span<float> g) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (activated[i] <= 0.0f) g[i] = 0.0f;
  }
}

std::vector<float> dropout_mask(std::size_t n, float p, Rng& rng) {
  std::vector<float> mask(n, 1.0f);
  if (p <= 0.0f) return mask;
  const float keep = 1.0f / (1.0f - p);
  std::bernoulli_distribution drop(p);
  for (float& m : mask) m = drop(rng) ? 0.0f : keep;
  return mask;
}

}  // namespace ppgta
