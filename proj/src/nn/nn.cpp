#include "paint/nn/nn.hpp"

#include <cmath>
#include <cstring>

#include "paint/core/error.hpp"
#include "paint/kernels/kernels.hpp"

namespace paint::nn {

void uniform_fan_in_init(Tensor& t, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt((double)fan_in);
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = (float)rng.uniform(-bound, bound);
}

// ---------------------------------------------------------------- Linear
void Linear::init(int in, int out, Rng& rng) {
  W.init({out, in});
  b.init({out});
  uniform_fan_in_init(W.value, in, rng);
  uniform_fan_in_init(b.value, in, rng);
}

Tensor Linear::forward(const Tensor& x) {
  x_cache = x;
  Tensor y({x.dim(0), W.value.dim(0)});
  kern::linear_forward(x, W.value, &b.value, y);
  return y;
}

Tensor Linear::backward(const Tensor& dy, bool param_grads) {
  Tensor dx(x_cache.shape());
  kern::linear_backward(dy, x_cache, W.value, dx, W.grad,
                        param_grads ? &b.grad : nullptr, true, param_grads);
  return dx;
}

void Linear::collect(const std::string& prefix, NamedParams& out) {
  out.push_back({prefix + ".W", &W});
  out.push_back({prefix + ".b", &b});
}

// ---------------------------------------------------------------- Conv2d
void Conv2d::init(int cin, int cout, int k, int stride_, int pad_, Rng& rng,
                  bool bias) {
  stride = stride_;
  pad = pad_;
  has_bias = bias;
  W.init({cout, cin, k, k});
  uniform_fan_in_init(W.value, cin * k * k, rng);
  if (has_bias) {
    b.init({cout});
    uniform_fan_in_init(b.value, cin * k * k, rng);
  }
}

Tensor Conv2d::forward(const Tensor& x) {
  x_cache = x;
  const int Ho = kern::conv_out_dim(x.dim(2), W.value.dim(2), stride, pad);
  const int Wo = kern::conv_out_dim(x.dim(3), W.value.dim(3), stride, pad);
  Tensor y({x.dim(0), W.value.dim(0), Ho, Wo});
  kern::conv2d_forward(x, W.value, has_bias ? &b.value : nullptr, stride, pad,
                       y);
  return y;
}

Tensor Conv2d::backward(const Tensor& dy, bool param_grads) {
  Tensor dx(x_cache.shape());
  kern::conv2d_backward_input(dy, W.value, stride, pad, dx);
  if (param_grads)
    kern::conv2d_backward_weight(dy, x_cache, stride, pad, W.grad,
                                 has_bias ? &b.grad : nullptr);
  return dx;
}

void Conv2d::collect(const std::string& prefix, NamedParams& out) {
  out.push_back({prefix + ".W", &W});
  if (has_bias) out.push_back({prefix + ".b", &b});
}

// ---------------------------------------------------------------- WNConv2d
static void wn_refresh(const Tensor& V, const Tensor& g, Tensor& w_eff,
                       Tensor& norms) {
  const int F = V.dim(0);
  const int64_t fs = V.numel() / F;
  if (!w_eff.defined()) {
    w_eff = Tensor::zeros(V.shape());
    norms = Tensor::zeros({F});
  }
  for (int f = 0; f < F; ++f) {
    const float* vf = V.data() + f * fs;
    double n2 = kern::dot(vf, vf, fs);
    float n = (float)std::sqrt(std::max(n2, 1e-24));
    norms[f] = n;
    float s = g[f] / n;
    float* wf = w_eff.data() + f * fs;
    for (int64_t i = 0; i < fs; ++i) wf[i] = s * vf[i];
  }
}

// dW -> (dV, dg):  dg_f = dW_f . What_f ;  dV_f = g_f/n_f (dW_f - dg_f What_f)
static void wn_chain(const Tensor& V, const Tensor& g, const Tensor& norms,
                     const Tensor& dw_eff, Tensor& dV, Tensor& dg,
                     float scale) {
  const int F = V.dim(0);
  const int64_t fs = V.numel() / F;
  for (int f = 0; f < F; ++f) {
    const float* vf = V.data() + f * fs;
    const float* dwf = dw_eff.data() + f * fs;
    const float n = norms[f];
    const double dot_dw_v = kern::dot(dwf, vf, fs);    // dW_f . V_f
    const double dgf = dot_dw_v / n;                   // dW_f . What_f
    dg[f] += scale * (float)dgf;
    const double gs = g[f] / n;
    float* dvf = dV.data() + f * fs;
    for (int64_t i = 0; i < fs; ++i)
      dvf[i] += scale * (float)(gs * (dwf[i] - dgf * vf[i] / n));
  }
}

void WNConv2d::init(int cin, int cout, int k, int stride_, int pad_,
                    Rng& rng) {
  stride = stride_;
  pad = pad_;
  V.init({cout, cin, k, k});
  uniform_fan_in_init(V.value, cin * k * k, rng);
  g.init({cout});
  b.init({cout});
  uniform_fan_in_init(b.value, cin * k * k, rng);
  // g = ||V_f|| so the initial effective weight is V itself.
  refresh_weight();
  for (int f = 0; f < cout; ++f) g.value[f] = norms[f];
  refresh_weight();
}

void WNConv2d::refresh_weight() { wn_refresh(V.value, g.value, w_eff, norms); }

Tensor WNConv2d::forward(const Tensor& x) {
  x_cache = x;
  refresh_weight();
  const int Ho = kern::conv_out_dim(x.dim(2), V.value.dim(2), stride, pad);
  const int Wo = kern::conv_out_dim(x.dim(3), V.value.dim(3), stride, pad);
  Tensor y({x.dim(0), V.value.dim(0), Ho, Wo});
  kern::conv2d_forward(x, w_eff, &b.value, stride, pad, y);
  return y;
}

Tensor WNConv2d::backward(const Tensor& dy, bool param_grads) {
  Tensor dx(x_cache.shape());
  kern::conv2d_backward_input(dy, w_eff, stride, pad, dx);
  if (param_grads) {
    Tensor dw = Tensor::zeros(V.value.shape());
    kern::conv2d_backward_weight(dy, x_cache, stride, pad, dw, &b.grad);
    chain_param_grad(dw);
  }
  return dx;
}

void WNConv2d::chain_param_grad(const Tensor& dw_eff, float scale) {
  wn_chain(V.value, g.value, norms, dw_eff, V.grad, g.grad, scale);
}

void WNConv2d::collect(const std::string& prefix, NamedParams& out) {
  out.push_back({prefix + ".V", &V});
  out.push_back({prefix + ".g", &g});
  out.push_back({prefix + ".b", &b});
}

// ---------------------------------------------------------------- WNLinear
void WNLinear::init(int in, int out, Rng& rng) {
  V.init({out, in});
  uniform_fan_in_init(V.value, in, rng);
  g.init({out});
  b.init({out});
  uniform_fan_in_init(b.value, in, rng);
  refresh_weight();
  for (int f = 0; f < out; ++f) g.value[f] = norms[f];
  refresh_weight();
}

void WNLinear::refresh_weight() { wn_refresh(V.value, g.value, w_eff, norms); }

Tensor WNLinear::forward(const Tensor& x) {
  x_cache = x;
  refresh_weight();
  Tensor y({x.dim(0), V.value.dim(0)});
  kern::linear_forward(x, w_eff, &b.value, y);
  return y;
}

Tensor WNLinear::backward(const Tensor& dy, bool param_grads) {
  Tensor dx(x_cache.shape());
  if (param_grads) {
    Tensor dw = Tensor::zeros(V.value.shape());
    kern::linear_backward(dy, x_cache, w_eff, dx, dw, &b.grad, true, true);
    wn_chain(V.value, g.value, norms, dw, V.grad, g.grad, 1.0f);
  } else {
    Tensor unused;
    kern::linear_backward(dy, x_cache, w_eff, dx, unused, nullptr, true,
                          false);
  }
  return dx;
}

void WNLinear::collect(const std::string& prefix, NamedParams& out) {
  out.push_back({prefix + ".V", &V});
  out.push_back({prefix + ".g", &g});
  out.push_back({prefix + ".b", &b});
}

// ---------------------------------------------------------------- BatchNorm
void BatchNorm2d::init(int channels) {
  gamma.init({channels});
  gamma.value.fill(1.0f);
  beta.init({channels});
  running_mean = Tensor::zeros({channels});
  running_var = Tensor::full({channels}, 1.0f);
}

Tensor BatchNorm2d::forward(const Tensor& x) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int64_t hw = (int64_t)H * W;
  const int64_t cnt = (int64_t)N * hw;
  Tensor y(x.shape());
  Tensor mean({C}), var({C});
  if (train_mode) {
    // Per-(n,c) plane partials combined in fixed order: deterministic.
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (int n = 0; n < N; ++n)
        s += kern::reduce_sum(x.data() + ((int64_t)n * C + c) * hw, hw);
      mean[c] = (float)(s / (double)cnt);
    }
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (int n = 0; n < N; ++n) {
        const float* p = x.data() + ((int64_t)n * C + c) * hw;
        double m = mean[c], acc = 0.0;
        for (int64_t i = 0; i < hw; ++i) {
          double d = p[i] - m;
          acc += d * d;
        }
        s += acc;
      }
      var[c] = (float)(s / (double)cnt);
    }
    for (int c = 0; c < C; ++c) {
      running_mean[c] =
          (1.0f - momentum) * running_mean[c] + momentum * mean[c];
      float unbiased =
          cnt > 1 ? var[c] * (float)cnt / (float)(cnt - 1) : var[c];
      running_var[c] =
          (1.0f - momentum) * running_var[c] + momentum * unbiased;
    }
  } else {
    mean.copy_from(running_mean);
    var.copy_from(running_var);
  }
  xhat_cache = Tensor(x.shape());
  invstd_cache = Tensor({C});
  for (int c = 0; c < C; ++c)
    invstd_cache[c] = 1.0f / std::sqrt(var[c] + eps);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const float m = mean[c], is = invstd_cache[c], ga = gamma.value[c],
                  be = beta.value[c];
      const float* px = x.data() + ((int64_t)n * C + c) * hw;
      float* ph = xhat_cache.data() + ((int64_t)n * C + c) * hw;
      float* py = y.data() + ((int64_t)n * C + c) * hw;
      for (int64_t i = 0; i < hw; ++i) {
        float xh = (px[i] - m) * is;
        ph[i] = xh;
        py[i] = ga * xh + be;
      }
    }
  return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy, bool param_grads) {
  const int N = dy.dim(0), C = dy.dim(1), H = dy.dim(2), W = dy.dim(3);
  const int64_t hw = (int64_t)H * W;
  const int64_t cnt = (int64_t)N * hw;
  Tensor dx(dy.shape());
  for (int c = 0; c < C; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int n = 0; n < N; ++n) {
      const float* pdy = dy.data() + ((int64_t)n * C + c) * hw;
      const float* ph = xhat_cache.data() + ((int64_t)n * C + c) * hw;
      sum_dy += kern::reduce_sum(pdy, hw);
      sum_dy_xhat += kern::dot(pdy, ph, hw);
    }
    if (param_grads) {
      beta.grad[c] += (float)sum_dy;
      gamma.grad[c] += (float)sum_dy_xhat;
    }
    const float ga = gamma.value[c], is = invstd_cache[c];
    if (train_mode) {
      const float k1 = (float)(sum_dy / (double)cnt);
      const float k2 = (float)(sum_dy_xhat / (double)cnt);
#pragma omp parallel for schedule(static)
      for (int n = 0; n < N; ++n) {
        const float* pdy = dy.data() + ((int64_t)n * C + c) * hw;
        const float* ph = xhat_cache.data() + ((int64_t)n * C + c) * hw;
        float* pdx = dx.data() + ((int64_t)n * C + c) * hw;
        for (int64_t i = 0; i < hw; ++i)
          pdx[i] = ga * is * (pdy[i] - k1 - ph[i] * k2);
      }
    } else {
#pragma omp parallel for schedule(static)
      for (int n = 0; n < N; ++n) {
        const float* pdy = dy.data() + ((int64_t)n * C + c) * hw;
        float* pdx = dx.data() + ((int64_t)n * C + c) * hw;
        for (int64_t i = 0; i < hw; ++i) pdx[i] = ga * is * pdy[i];
      }
    }
  }
  return dx;
}

void BatchNorm2d::collect(const std::string& prefix, NamedParams& out) {
  out.push_back({prefix + ".gamma", &gamma});
  out.push_back({prefix + ".beta", &beta});
}

void BatchNorm2d::collect_buffers(const std::string& prefix,
                                  NamedBuffers& out) {
  out.push_back({prefix + ".running_mean", &running_mean});
  out.push_back({prefix + ".running_var", &running_var});
}

// ---------------------------------------------------------------- simple ops
Tensor ReLU::forward(const Tensor& x) {
  x_cache = x;
  Tensor y(x.shape());
  kern::relu_forward(x.data(), y.data(), x.numel());
  return y;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx(dy.shape());
  kern::relu_backward(x_cache.data(), dy.data(), dx.data(), dy.numel());
  return dx;
}

void TReLU::init() { alpha.init({1}); }

Tensor TReLU::forward(const Tensor& x) {
  x_cache = x;
  Tensor y(x.shape());
  const float a = alpha.value[0];
  const float* px = x.data();
  float* py = y.data();
  const int64_t n = x.numel();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) py[i] = px[i] > a ? px[i] : a;
  return y;
}

Tensor TReLU::backward(const Tensor& dy, bool param_grads) {
  Tensor dx(dy.shape());
  const float a = alpha.value[0];
  const float* px = x_cache.data();
  const float* pdy = dy.data();
  float* pdx = dx.data();
  const int64_t n = dy.numel();
  double da = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    if (px[i] > a) {
      pdx[i] = pdy[i];
    } else {
      pdx[i] = 0.0f;
      da += pdy[i];
    }
  }
  if (param_grads) alpha.grad[0] += (float)da;
  return dx;
}

void TReLU::collect(const std::string& prefix, NamedParams& out) {
  out.push_back({prefix + ".alpha", &alpha});
}

Tensor Sigmoid::forward(const Tensor& x) {
  Tensor y(x.shape());
  kern::sigmoid_forward(x.data(), y.data(), x.numel());
  y_cache = y;
  return y;
}

Tensor Sigmoid::backward(const Tensor& dy) {
  Tensor dx(dy.shape());
  kern::sigmoid_backward(y_cache.data(), dy.data(), dx.data(), dy.numel());
  return dx;
}

Tensor PixelShuffle::forward(const Tensor& x) {
  Tensor y({x.dim(0), x.dim(1) / (r * r), x.dim(2) * r, x.dim(3) * r});
  kern::pixel_shuffle(x, r, y);
  return y;
}

Tensor PixelShuffle::backward(const Tensor& dy) {
  Tensor dx({dy.dim(0), dy.dim(1) * r * r, dy.dim(2) / r, dy.dim(3) / r});
  kern::pixel_unshuffle(dy, r, dx);
  return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x) {
  h = x.dim(2);
  w = x.dim(3);
  const int N = x.dim(0), C = x.dim(1);
  const int64_t hw = (int64_t)h * w;
  Tensor y({N, C});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      y.at(n, c) = (float)(kern::reduce_sum(
                       x.data() + ((int64_t)n * C + c) * hw, hw) /
                   (double)hw);
  return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
  const int N = dy.dim(0), C = dy.dim(1);
  const int64_t hw = (int64_t)h * w;
  Tensor dx({N, C, h, w});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c) {
      const float v = dy.at(n, c) / (float)hw;
      float* p = dx.data() + ((int64_t)n * C + c) * hw;
      for (int64_t i = 0; i < hw; ++i) p[i] = v;
    }
  return dx;
}

Tensor append_coord_planes(const Tensor& x) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor y({N, C + 2, H, W});
  const int64_t hw = (int64_t)H * W;
  for (int n = 0; n < N; ++n) {
    std::memcpy(y.data() + (int64_t)n * (C + 2) * hw,
                x.data() + (int64_t)n * C * hw, sizeof(float) * (size_t)C * hw);
    float* px = y.data() + ((int64_t)n * (C + 2) + C) * hw;
    float* py = px + hw;
    for (int i = 0; i < H; ++i)
      for (int j = 0; j < W; ++j) {
        px[(int64_t)i * W + j] =
            W > 1 ? -1.0f + 2.0f * (float)j / (float)(W - 1) : 0.0f;
        py[(int64_t)i * W + j] =
            H > 1 ? -1.0f + 2.0f * (float)i / (float)(H - 1) : 0.0f;
      }
  }
  return y;
}

Tensor strip_coord_planes_grad(const Tensor& dx_with_coords) {
  const int N = dx_with_coords.dim(0), C2 = dx_with_coords.dim(1),
            H = dx_with_coords.dim(2), W = dx_with_coords.dim(3);
  const int C = C2 - 2;
  const int64_t hw = (int64_t)H * W;
  Tensor dx({N, C, H, W});
  for (int n = 0; n < N; ++n)
    std::memcpy(dx.data() + (int64_t)n * C * hw,
                dx_with_coords.data() + (int64_t)n * C2 * hw,
                sizeof(float) * (size_t)C * hw);
  return dx;
}

// ---------------------------------------------------------------- Adam
void Adam::attach(const NamedParams& named) {
  params.clear();
  m.clear();
  v.clear();
  for (auto& [name, p] : named) {
    params.push_back(p);
    m.push_back(Tensor::zeros(p->value.shape()));
    v.push_back(Tensor::zeros(p->value.shape()));
  }
  t = 0;
}

void Adam::zero_grad() {
  for (Param* p : params)
    std::memset(p->grad.data(), 0, sizeof(float) * (size_t)p->grad.numel());
}

void Adam::step() {
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, (double)t);
  const double bc2 = 1.0 - std::pow(beta2, (double)t);
  for (size_t k = 0; k < params.size(); ++k) {
    Param* p = params[k];
    float* pm = m[k].data();
    float* pv = v[k].data();
    const float* g = p->grad.data();
    float* w = p->value.data();
    const int64_t n = p->value.numel();
    for (int64_t i = 0; i < n; ++i) {
      pm[i] = (float)(beta1 * pm[i] + (1.0 - beta1) * g[i]);
      pv[i] = (float)(beta2 * pv[i] + (1.0 - beta2) * (double)g[i] * g[i]);
      double mhat = pm[i] / bc1;
      double vhat = pv[i] / bc2;
      w[i] -= (float)(lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

// ---------------------------------------------------------------- utilities
void soft_update(const NamedParams& target, const NamedParams& online,
                 double tau) {
  PAINT_CHECK(target.size() == online.size(), "soft_update: param mismatch");
  for (size_t k = 0; k < target.size(); ++k) {
    Tensor& tv = target[k].second->value;
    const Tensor& ov = online[k].second->value;
    PAINT_CHECK(tv.same_shape(ov), "soft_update: shape mismatch");
    for (int64_t i = 0; i < tv.numel(); ++i)
      tv[i] = (float)((1.0 - tau) * tv[i] + tau * ov[i]);
  }
}

void soft_update_buffers(const NamedBuffers& target, const NamedBuffers& online,
                         double tau) {
  PAINT_CHECK(target.size() == online.size(), "soft_update: buffer mismatch");
  for (size_t k = 0; k < target.size(); ++k) {
    Tensor& tv = *target[k].second;
    const Tensor& ov = *online[k].second;
    for (int64_t i = 0; i < tv.numel(); ++i)
      tv[i] = (float)((1.0 - tau) * tv[i] + tau * ov[i]);
  }
}

void copy_params(const NamedParams& dst, const NamedParams& src) {
  PAINT_CHECK(dst.size() == src.size(), "copy_params: mismatch");
  for (size_t k = 0; k < dst.size(); ++k)
    dst[k].second->value.copy_from(src[k].second->value);
}

bool params_equal(const NamedParams& a, const NamedParams& b) {
  if (a.size() != b.size()) return false;
  for (size_t k = 0; k < a.size(); ++k) {
    const Tensor& x = a[k].second->value;
    const Tensor& y = b[k].second->value;
    if (!x.same_shape(y)) return false;
    for (int64_t i = 0; i < x.numel(); ++i)
      if (x[i] != y[i]) return false;
  }
  return true;
}

bool has_nan(const Tensor& t) {
  for (int64_t i = 0; i < t.numel(); ++i)
    if (std::isnan(t[i]) || std::isinf(t[i])) return true;
  return false;
}

}  // namespace paint::nn
