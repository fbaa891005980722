#include "paint/gan/gan.hpp"

#include <cmath>
#include <cstring>

#include "paint/core/error.hpp"
#include "paint/kernels/kernels.hpp"

namespace paint {

void DiscNet::init(Rng& rng) {
  c1.init(6, 16, 5, 2, 2, rng);
  c2.init(16, 32, 5, 2, 2, rng);
  c3.init(32, 64, 5, 2, 2, rng);
  c4.init(64, 128, 5, 2, 2, rng);
  c5.init(128, 1, 5, 2, 2, rng);
  t1.init();
  t2.init();
  t3.init();
  t4.init();
}

Tensor DiscNet::forward(const Tensor& pairs) {
  PAINT_CHECK(pairs.ndim() == 4 && pairs.dim(1) == 6,
              "critic input must be [N,6,res,res], got " + pairs.shape_str());
  Tensor h = t1.forward(c1.forward(pairs));
  h = t2.forward(c2.forward(h));
  h = t3.forward(c3.forward(h));
  h = t4.forward(c4.forward(h));
  h = c5.forward(h);
  return gap.forward(h);
}

Tensor DiscNet::backward(const Tensor& dscores, bool param_grads) {
  Tensor d = gap.backward(dscores);
  d = c5.backward(d, param_grads);
  d = t4.backward(d, param_grads);
  d = c4.backward(d, param_grads);
  d = t3.backward(d, param_grads);
  d = c3.backward(d, param_grads);
  d = t2.backward(d, param_grads);
  d = c2.backward(d, param_grads);
  d = t1.backward(d, param_grads);
  d = c1.backward(d, param_grads);
  return d;
}

nn::NamedParams DiscNet::params() {
  nn::NamedParams out;
  c1.collect("c1", out);
  c2.collect("c2", out);
  c3.collect("c3", out);
  c4.collect("c4", out);
  c5.collect("c5", out);
  t1.collect("t1", out);
  t2.collect("t2", out);
  t3.collect("t3", out);
  t4.collect("t4", out);
  return out;
}

namespace {

// y = trelu(x) with threshold a has derivative [x > a]; the masked copy
// out = dy .* [x > a] is the exact almost-everywhere chain-rule factor.
Tensor apply_mask(const Tensor& dy, const Tensor& x, float a) {
  Tensor out(dy.shape());
  const float* px = x.data();
  const float* pd = dy.data();
  float* po = out.data();
  for (int64_t i = 0; i < dy.numel(); ++i)
    po[i] = px[i] > a ? pd[i] : 0.0f;
  return out;
}

}  // namespace

DiscNet::GpResult DiscNet::gradient_penalty_backward(const Tensor& interp,
                                                     double lambda) {
  const int N = interp.dim(0);
  // Forward fills the convolution input caches and the activation caches the
  // masks are read from.
  Tensor scores = forward(interp);
  (void)scores;

  const Tensor& z1 = t1.x_cache;
  const Tensor& z2 = t2.x_cache;
  const Tensor& z3 = t3.x_cache;
  const Tensor& z4 = t4.x_cache;
  // c5's input is trelu(z4); its output feeds GAP over H5 x W5 cells.
  const int H5 = gap.h, W5 = gap.w;

  // u-chain: per-sample input gradient g_n = dD_n/d(interp_n).
  Tensor u5 = Tensor::full({N, 1, H5, W5}, 1.0f / (float)(H5 * W5));
  Tensor w4(z4.shape());
  kern::conv2d_backward_input(u5, c5.w_eff, c5.stride, c5.pad, w4);
  w4 = apply_mask(w4, z4, t4.alpha.value[0]);
  Tensor w3(z3.shape());
  kern::conv2d_backward_input(w4, c4.w_eff, c4.stride, c4.pad, w3);
  w3 = apply_mask(w3, z3, t3.alpha.value[0]);
  Tensor w2(z2.shape());
  kern::conv2d_backward_input(w3, c3.w_eff, c3.stride, c3.pad, w2);
  w2 = apply_mask(w2, z2, t2.alpha.value[0]);
  Tensor w1(z1.shape());
  kern::conv2d_backward_input(w2, c2.w_eff, c2.stride, c2.pad, w1);
  w1 = apply_mask(w1, z1, t1.alpha.value[0]);
  Tensor g(interp.shape());
  kern::conv2d_backward_input(w1, c1.w_eff, c1.stride, c1.pad, g);

  // Penalty P = lambda * mean_n (||g_n|| - 1)^2 and its gradient wrt g.
  const int64_t per = g.numel() / N;
  GpResult res;
  Tensor v(g.shape());
  for (int n = 0; n < N; ++n) {
    const float* gn = g.data() + (int64_t)n * per;
    const double norm = std::sqrt(std::max(kern::dot(gn, gn, per), 1e-24));
    res.penalty += (norm - 1.0) * (norm - 1.0);
    res.mean_grad_norm += norm;
    const float s = (float)(2.0 * lambda / N * (norm - 1.0) / norm);
    float* vn = v.data() + (int64_t)n * per;
    for (int64_t i = 0; i < per; ++i) vn[i] = s * gn[i];
  }
  res.penalty /= N;
  res.mean_grad_norm /= N;

  // t-chain (double backward): dP/dW_k = convWeightGrad(input = t_{k-1},
  // outgrad = w_k) with t_0 = dP/dg and t_k = mask_k .* conv_k(t_{k-1}),
  // chained through weight normalization into V and g gradients.
  auto chain = [](nn::WNConv2d& c, const Tensor& t_in, const Tensor& w_out) {
    Tensor dw = Tensor::zeros(c.V.value.shape());
    kern::conv2d_backward_weight(w_out, t_in, c.stride, c.pad, dw, nullptr);
    c.chain_param_grad(dw);
  };
  auto fwd_nobias = [](const nn::WNConv2d& c, const Tensor& t_in,
                       const std::vector<int>& out_shape) {
    Tensor s(out_shape);
    kern::conv2d_forward(t_in, c.w_eff, nullptr, c.stride, c.pad, s);
    return s;
  };

  chain(c1, v, w1);
  Tensor t = apply_mask(fwd_nobias(c1, v, z1.shape()), z1, t1.alpha.value[0]);
  chain(c2, t, w2);
  t = apply_mask(fwd_nobias(c2, t, z2.shape()), z2, t2.alpha.value[0]);
  chain(c3, t, w3);
  t = apply_mask(fwd_nobias(c3, t, z3.shape()), z3, t3.alpha.value[0]);
  chain(c4, t, w4);
  t = apply_mask(fwd_nobias(c4, t, z4.shape()), z4, t4.alpha.value[0]);
  chain(c5, t, u5);
  return res;
}

void GanReward::init(uint64_t seed) {
  Rng rng(seed);
  online.init(rng);
  Rng rng2(seed + 1);
  target_copy.init(rng2);  // allocates matching shapes
  nn::copy_params(target_copy.params(), online.params());
  opt.lr = 1e-4;
  opt.beta1 = 0.5;
  opt.beta2 = 0.999;
  opt.attach(online.params());
}

namespace {

Tensor one_pair(const Canvas& canvas, const Canvas& target) {
  PAINT_CHECK(is_canvas(canvas) && is_canvas(target) &&
                  canvas.same_shape(target),
              "score needs two [3,res,res] canvases of one shape");
  const int res = canvas_res(canvas);
  Tensor pair({1, 6, res, res});
  const int64_t half = canvas.numel();
  std::memcpy(pair.data(), canvas.data(), sizeof(float) * half);
  std::memcpy(pair.data() + half, target.data(), sizeof(float) * half);
  return pair;
}

}  // namespace

double GanReward::score(const Canvas& canvas, const Canvas& target) {
  Tensor s = target_copy.forward(one_pair(canvas, target));
  return s[0];
}

double GanReward::gan_loss(const Canvas& canvas, const Canvas& target) {
  return -score(canvas, target);
}

Tensor GanReward::stack_pairs(const std::vector<Canvas>& canvases,
                              const std::vector<Canvas>& targets) {
  PAINT_CHECK(!canvases.empty() && canvases.size() == targets.size(),
              "pair batch needs equal nonempty canvas/target lists");
  const int res = canvas_res(canvases[0]);
  Tensor pairs({(int)canvases.size(), 6, res, res});
  const int64_t half = (int64_t)3 * res * res;
  for (size_t i = 0; i < canvases.size(); ++i) {
    PAINT_CHECK(canvases[i].same_shape(targets[i]) &&
                    canvas_res(canvases[i]) == res,
                "pair batch shapes disagree");
    std::memcpy(pairs.data() + (int64_t)i * 2 * half, canvases[i].data(),
                sizeof(float) * half);
    std::memcpy(pairs.data() + (int64_t)i * 2 * half + half,
                targets[i].data(), sizeof(float) * half);
  }
  return pairs;
}

DiscTrainStats GanReward::accumulate_gradients(const Tensor& fake_pairs,
                                               const Tensor& real_pairs,
                                               double penalty_coeff,
                                               Rng& rng) {
  PAINT_CHECK(fake_pairs.same_shape(real_pairs),
              "fake and real pair batches must match for interpolation");
  const int N = fake_pairs.dim(0);
  DiscTrainStats st;

  // Real pass: minimize -mean D(real).
  Tensor real_scores = online.forward(real_pairs);
  st.mean_real = kern::reduce_sum(real_scores.data(), N) / N;
  online.backward(Tensor::full({N, 1}, -1.0f / (float)N));

  // Fake pass: minimize +mean D(fake).
  Tensor fake_scores = online.forward(fake_pairs);
  st.mean_fake = kern::reduce_sum(fake_scores.data(), N) / N;
  online.backward(Tensor::full({N, 1}, 1.0f / (float)N));

  // Gradient penalty on per-sample convex interpolates.
  Tensor interp(fake_pairs.shape());
  const int64_t per = fake_pairs.numel() / N;
  for (int n = 0; n < N; ++n) {
    const float e = (float)rng.uniform();
    const float* fr = real_pairs.data() + (int64_t)n * per;
    const float* ff = fake_pairs.data() + (int64_t)n * per;
    float* pi = interp.data() + (int64_t)n * per;
    for (int64_t i = 0; i < per; ++i)
      pi[i] = e * fr[i] + (1.0f - e) * ff[i];
  }
  DiscNet::GpResult gp = online.gradient_penalty_backward(interp,
                                                          penalty_coeff);
  st.penalty = gp.penalty;
  st.mean_grad_norm = gp.mean_grad_norm;
  st.wasserstein = st.mean_real - st.mean_fake;
  st.loss = st.mean_fake - st.mean_real + penalty_coeff * st.penalty;
  return st;
}

DiscTrainStats GanReward::train_discriminator(
    const std::vector<Canvas>& fake_canvases,
    const std::vector<Canvas>& fake_targets,
    const std::vector<Canvas>& real_targets, double penalty_coeff, Rng& rng) {
  PAINT_CHECK(!fake_canvases.empty() &&
                  fake_canvases.size() == fake_targets.size() &&
                  fake_canvases.size() == real_targets.size(),
              "discriminator batches must be nonempty and equal-sized");
  Tensor fake_pairs = stack_pairs(fake_canvases, fake_targets);
  Tensor real_pairs = stack_pairs(real_targets, real_targets);

  opt.zero_grad();
  DiscTrainStats st =
      accumulate_gradients(fake_pairs, real_pairs, penalty_coeff, rng);
  PAINT_CHECK_NUMERIC(
      std::isfinite(st.loss) && std::isfinite(st.penalty),
      "discriminator loss is not finite (wasserstein " +
          std::to_string(st.wasserstein) + ", penalty " +
          std::to_string(st.penalty) + ")");
  opt.step();
  return st;
}

void GanReward::soft_update_discriminator(double tau) {
  PAINT_CHECK(tau > 0.0 && tau <= 1.0, "tau must lie in (0,1]");
  nn::soft_update(target_copy.params(), online.params(), tau);
}

}  // namespace paint
