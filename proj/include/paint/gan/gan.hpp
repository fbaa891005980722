#pragma once

#include <cstdint>

#include "paint/canvas/canvas.hpp"
#include "paint/core/rng.hpp"
#include "paint/nn/nn.hpp"

namespace paint {

// Wasserstein critic over channel-stacked image pairs [N,6,res,res]:
// four 5x5/stride-2 weight-normalized convolutions with translated ReLU
// (6 -> 16 -> 32 -> 64 -> 128), a 5x5/stride-2 convolution to one channel,
// then global average pooling to a scalar. No output squashing. The network
// is fully convolutional, so it runs at any resolution the strides admit.
struct DiscNet {
  nn::WNConv2d c1, c2, c3, c4, c5;
  nn::TReLU t1, t2, t3, t4;
  nn::GlobalAvgPool gap;

  void init(Rng& rng);
  // pairs [N,6,res,res] -> scores [N,1]; caches feed backward().
  Tensor forward(const Tensor& pairs);
  Tensor backward(const Tensor& dscores, bool param_grads = true);
  nn::NamedParams params();

  // Gradient-penalty pass over interpolated pairs: accumulates
  // d(lambda * mean_n (||grad_x D(x_n)|| - 1)^2)/dparams into the weight
  // gradients via an explicit double-backward through the convolution chain
  // (activation masks are treated as locally constant, their exact a.e.
  // derivative). Returns the raw penalty and the mean gradient norm.
  struct GpResult {
    double penalty = 0.0;         // mean (||grad|| - 1)^2, before lambda
    double mean_grad_norm = 0.0;  // mean ||grad_x D||
  };
  GpResult gradient_penalty_backward(const Tensor& interp_pairs,
                                     double lambda);
};

struct DiscTrainStats {
  double mean_real = 0.0;
  double mean_fake = 0.0;
  double wasserstein = 0.0;    // mean_real - mean_fake
  double penalty = 0.0;        // raw, before lambda
  double mean_grad_norm = 0.0;
  double loss = 0.0;           // mean_fake - mean_real + lambda * penalty
};

// Learned reward: online critic trained with WGAN-GP, slow target copy used
// for all reward scoring.
struct GanReward {
  DiscNet online;
  DiscNet target_copy;
  nn::Adam opt;  // Adam(1e-4, betas 0.5/0.999) on the online critic

  void init(uint64_t seed);

  // D(canvas (+) target) under the target copy; higher = more target-like.
  double score(const Canvas& canvas, const Canvas& target);
  // L = -score, so the Eq.-1 reward is score(next) - score(prev).
  double gan_loss(const Canvas& canvas, const Canvas& target);

  // Stacks a (canvas, target) pair batch: rows [3+3, res, res].
  static Tensor stack_pairs(const std::vector<Canvas>& canvases,
                            const std::vector<Canvas>& targets);

  // Accumulates the full WGAN-GP gradient (real, fake, penalty) into the
  // online critic without stepping; exposed for gradient verification.
  DiscTrainStats accumulate_gradients(const Tensor& fake_pairs,
                                      const Tensor& real_pairs,
                                      double penalty_coeff, Rng& rng);

  // One optimizer step on the online critic: maximize E[D(real)]-E[D(fake)]
  // with gradient penalty. Real pairs are built as (target, target).
  DiscTrainStats train_discriminator(const std::vector<Canvas>& fake_canvases,
                                     const std::vector<Canvas>& fake_targets,
                                     const std::vector<Canvas>& real_targets,
                                     double penalty_coeff, Rng& rng);

  // target <- (1-tau)*target + tau*online.
  void soft_update_discriminator(double tau);
};

}  // namespace paint
