#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "paint/core/rng.hpp"
#include "paint/core/tensor.hpp"

// Hand-written layers with explicit forward/backward. Each layer caches what
// its own backward needs; a backward consumes the caches of the most recent
// forward. `param_grads=false` skips weight-gradient work (used when a frozen
// network only relays gradients, e.g. renderer/discriminator inside the actor
// update).
namespace paint::nn {

struct Param {
  Tensor value;
  Tensor grad;
  void init(std::vector<int> shape) {
    value = Tensor::zeros(shape);
    grad = Tensor::zeros(shape);
  }
};

using NamedParams = std::vector<std::pair<std::string, Param*>>;
using NamedBuffers = std::vector<std::pair<std::string, Tensor*>>;

// PyTorch-style default init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void uniform_fan_in_init(Tensor& t, int fan_in, Rng& rng);

struct Linear {
  Param W, b;
  Tensor x_cache;
  void init(int in, int out, Rng& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy, bool param_grads = true);
  void collect(const std::string& prefix, NamedParams& out);
};

struct Conv2d {
  Param W, b;
  int stride = 1, pad = 0;
  bool has_bias = true;
  Tensor x_cache;
  void init(int cin, int cout, int k, int stride_, int pad_, Rng& rng,
            bool bias = true);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy, bool param_grads = true);
  void collect(const std::string& prefix, NamedParams& out);
};

// Weight normalization: W_f = g_f * V_f / ||V_f||; g initialized to ||V_f||
// so the initial effective weight equals V.
struct WNConv2d {
  Param V, g, b;
  int stride = 1, pad = 0;
  Tensor x_cache;
  Tensor w_eff;   // effective weight from last forward
  Tensor norms;   // per-filter ||V_f||
  void init(int cin, int cout, int k, int stride_, int pad_, Rng& rng);
  void refresh_weight();  // recompute w_eff/norms from V,g
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy, bool param_grads = true);
  // Routes a gradient w.r.t. the effective weight into V.grad/g.grad.
  void chain_param_grad(const Tensor& dw_eff, float scale = 1.0f);
  void collect(const std::string& prefix, NamedParams& out);
};

struct WNLinear {
  Param V, g, b;
  Tensor x_cache, w_eff, norms;
  void init(int in, int out, Rng& rng);
  void refresh_weight();
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy, bool param_grads = true);
  void collect(const std::string& prefix, NamedParams& out);
};

struct BatchNorm2d {
  Param gamma, beta;
  Tensor running_mean, running_var;
  float momentum = 0.1f, eps = 1e-5f;
  bool train_mode = true;
  Tensor xhat_cache, invstd_cache;
  void init(int channels);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy, bool param_grads = true);
  void collect(const std::string& prefix, NamedParams& out);
  void collect_buffers(const std::string& prefix, NamedBuffers& out);
};

struct ReLU {
  Tensor x_cache;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
};

// TReLU(x) = max(x, alpha) with a learnable scalar alpha (init 0).
struct TReLU {
  Param alpha;
  Tensor x_cache;
  void init();
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy, bool param_grads = true);
  void collect(const std::string& prefix, NamedParams& out);
};

struct Sigmoid {
  Tensor y_cache;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
};

struct PixelShuffle {
  int r = 2;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
};

// [N,C,H,W] -> [N,C] spatial mean.
struct GlobalAvgPool {
  int h = 0, w = 0;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& dy);
};

// Appends two constant coordinate planes (x and y, each in [-1,1]) before a
// convolution.
Tensor append_coord_planes(const Tensor& x);
Tensor strip_coord_planes_grad(const Tensor& dx_with_coords);

struct Adam {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t t = 0;
  std::vector<Param*> params;
  std::vector<Tensor> m, v;
  void attach(const NamedParams& named);
  void zero_grad();
  void step();
};

// target <- (1-tau)*target + tau*online, elementwise; online untouched.
void soft_update(const NamedParams& target, const NamedParams& online,
                 double tau);
void soft_update_buffers(const NamedBuffers& target, const NamedBuffers& online,
                         double tau);
void copy_params(const NamedParams& dst, const NamedParams& src);
bool params_equal(const NamedParams& a, const NamedParams& b);

bool has_nan(const Tensor& t);

}  // namespace paint::nn
