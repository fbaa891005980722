#include <doctest.h>

#include <cmath>
#include <vector>

#include "paint/core/rng.hpp"
#include "paint/core/tensor.hpp"
#include "paint/kernels/kernels.hpp"
#include "testutil.hpp"

using namespace paint;
using testutil::max_abs_diff;

static Tensor random_tensor(std::vector<int> shape, Rng& rng, float lo = -1.0f,
                            float hi = 1.0f) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = (float)rng.uniform(lo, hi);
  return t;
}

TEST_CASE("gemm matches serial reference for all transpose combos") {
  Rng rng(7);
  for (bool tA : {false, true})
    for (bool tB : {false, true}) {
      int M = 17, N = 23, K = 31;
      Tensor A = random_tensor({tA ? K : M, tA ? M : K}, rng);
      Tensor B = random_tensor({tB ? N : K, tB ? K : N}, rng);
      Tensor C1 = Tensor::zeros({M, N});
      Tensor C2 = Tensor::zeros({M, N});
      kern::gemm(tA, tB, M, N, K, 1.0f, A.data(), B.data(), 0.0f, C1.data());
      kern::serial::gemm(tA, tB, M, N, K, 1.0f, A.data(), B.data(), 0.0f,
                         C2.data());
      CHECK(max_abs_diff(C1, C2) < 1e-4f);
    }
}

TEST_CASE("gemm accumulates with beta=1") {
  Rng rng(8);
  int M = 5, N = 6, K = 4;
  Tensor A = random_tensor({M, K}, rng);
  Tensor B = random_tensor({K, N}, rng);
  Tensor C = Tensor::full({M, N}, 2.0f);
  Tensor D = C.clone();
  kern::gemm(false, false, M, N, K, 1.0f, A.data(), B.data(), 1.0f, C.data());
  kern::serial::gemm(false, false, M, N, K, 1.0f, A.data(), B.data(), 1.0f,
                     D.data());
  CHECK(max_abs_diff(C, D) < 1e-4f);
}

TEST_CASE("conv2d_forward matches serial reference") {
  Rng rng(11);
  for (auto [stride, pad, k] : {std::tuple{1, 1, 3}, {2, 1, 3}, {2, 2, 5}}) {
    Tensor in = random_tensor({2, 3, 11, 13}, rng);
    Tensor w = random_tensor({4, 3, k, k}, rng);
    Tensor b = random_tensor({4}, rng);
    int Ho = kern::conv_out_dim(11, k, stride, pad);
    int Wo = kern::conv_out_dim(13, k, stride, pad);
    Tensor out1 = Tensor::zeros({2, 4, Ho, Wo});
    Tensor out2 = Tensor::zeros({2, 4, Ho, Wo});
    kern::conv2d_forward(in, w, &b, stride, pad, out1);
    kern::serial::conv2d_forward(in, w, &b, stride, pad, out2);
    CHECK(max_abs_diff(out1, out2) < 1e-4f);
  }
}

// Gradients validated against finite differences of the forward pass.
TEST_CASE("conv2d backward matches finite differences") {
  Rng rng(13);
  const int stride = 2, pad = 1, k = 3;
  Tensor in = random_tensor({2, 2, 6, 6}, rng);
  Tensor w = random_tensor({3, 2, k, k}, rng);
  int Ho = kern::conv_out_dim(6, k, stride, pad);
  int Wo = kern::conv_out_dim(6, k, stride, pad);
  // Probe: L = sum(out * G) for fixed random G, so dL/dout = G.
  Tensor G = random_tensor({2, 3, Ho, Wo}, rng);

  auto loss = [&](const Tensor& input, const Tensor& weight) {
    Tensor out = Tensor::zeros({2, 3, Ho, Wo});
    kern::conv2d_forward(input, weight, nullptr, stride, pad, out);
    return kern::dot(out.data(), G.data(), out.numel());
  };

  Tensor din = Tensor::zeros(in.shape());
  Tensor dw = Tensor::zeros(w.shape());
  kern::conv2d_backward_input(G, w, stride, pad, din);
  kern::conv2d_backward_weight(G, in, stride, pad, dw, nullptr);

  Rng pick(17);
  const double eps = 1e-3;
  for (int probe = 0; probe < 10; ++probe) {
    int64_t i = (int64_t)pick.uniform_int((uint64_t)in.numel());
    Tensor p = in.clone();
    p[i] += (float)eps;
    double hi = loss(p, w);
    p[i] -= (float)(2 * eps);
    double lo = loss(p, w);
    CHECK(din[i] == doctest::Approx((hi - lo) / (2 * eps)).epsilon(2e-2));

    int64_t j = (int64_t)pick.uniform_int((uint64_t)w.numel());
    Tensor q = w.clone();
    q[j] += (float)eps;
    hi = loss(in, q);
    q[j] -= (float)(2 * eps);
    lo = loss(in, q);
    CHECK(dw[j] == doctest::Approx((hi - lo) / (2 * eps)).epsilon(2e-2));
  }
}

TEST_CASE("conv2d backward bias sums output gradient") {
  Rng rng(19);
  Tensor in = random_tensor({2, 2, 5, 5}, rng);
  Tensor w = random_tensor({3, 2, 3, 3}, rng);
  Tensor dout = random_tensor({2, 3, 5, 5}, rng);
  Tensor dw = Tensor::zeros(w.shape());
  Tensor db = Tensor::zeros({3});
  kern::conv2d_backward_weight(dout, in, 1, 1, dw, &db);
  for (int f = 0; f < 3; ++f) {
    double s = 0.0;
    for (int n = 0; n < 2; ++n)
      for (int i = 0; i < 25; ++i) s += dout.data()[(n * 3 + f) * 25 + i];
    CHECK(db[f] == doctest::Approx(s).epsilon(1e-5));
  }
}

TEST_CASE("linear forward/backward against finite differences") {
  Rng rng(23);
  Tensor x = random_tensor({4, 7}, rng);
  Tensor W = random_tensor({5, 7}, rng);
  Tensor b = random_tensor({5}, rng);
  Tensor y = Tensor::zeros({4, 5});
  kern::linear_forward(x, W, &b, y);
  for (int n = 0; n < 4; ++n)
    for (int o = 0; o < 5; ++o) {
      double acc = b[o];
      for (int i = 0; i < 7; ++i) acc += (double)x.at(n, i) * W.at(o, i);
      CHECK(y.at(n, o) == doctest::Approx(acc).epsilon(1e-5));
    }

  Tensor G = random_tensor({4, 5}, rng);
  Tensor dx = Tensor::zeros(x.shape());
  Tensor dW = Tensor::zeros(W.shape());
  Tensor db = Tensor::zeros({5});
  kern::linear_backward(G, x, W, dx, dW, &db, true, true);
  auto loss = [&](const Tensor& xx, const Tensor& WW, const Tensor& bb) {
    Tensor yy = Tensor::zeros({4, 5});
    kern::linear_forward(xx, WW, &bb, yy);
    return kern::dot(yy.data(), G.data(), yy.numel());
  };
  const double eps = 1e-3;
  Rng pick(29);
  for (int probe = 0; probe < 8; ++probe) {
    int64_t i = (int64_t)pick.uniform_int((uint64_t)x.numel());
    Tensor p = x.clone();
    p[i] += (float)eps;
    double hi = loss(p, W, b);
    p[i] -= (float)(2 * eps);
    double lo = loss(p, W, b);
    CHECK(dx[i] == doctest::Approx((hi - lo) / (2 * eps)).epsilon(2e-2));
  }
}

TEST_CASE("reduce_sum deterministic and equal to serial") {
  Rng rng(31);
  std::vector<float> v(100000);
  for (auto& x : v) x = (float)rng.uniform(-1.0, 1.0);
  double a = kern::reduce_sum(v.data(), (int64_t)v.size());
  double b = kern::serial::reduce_sum(v.data(), (int64_t)v.size());
  CHECK(a == b);  // identical block order -> bitwise equal
  double c = kern::reduce_sum(v.data(), (int64_t)v.size());
  CHECK(a == c);
}

TEST_CASE("elementwise ops") {
  std::vector<float> x = {-2.0f, -0.5f, 0.0f, 0.5f, 2.0f};
  std::vector<float> y(5), dx(5);
  kern::relu_forward(x.data(), y.data(), 5);
  CHECK(y == std::vector<float>({0, 0, 0, 0.5f, 2.0f}));
  std::vector<float> dy = {1, 1, 1, 1, 1};
  kern::relu_backward(x.data(), dy.data(), dx.data(), 5);
  CHECK(dx == std::vector<float>({0, 0, 0, 1, 1}));

  kern::sigmoid_forward(x.data(), y.data(), 5);
  CHECK(y[2] == doctest::Approx(0.5));
  for (float v : y) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
  kern::sigmoid_backward(y.data(), dy.data(), dx.data(), 5);
  CHECK(dx[2] == doctest::Approx(0.25));

  std::vector<float> z = {0.5f, -3.0f, 1.5f, 0.25f, 1.0f};
  kern::clamp01(z.data(), 5);
  CHECK(z == std::vector<float>({0.5f, 0.0f, 1.0f, 0.25f, 1.0f}));
}

TEST_CASE("bilinear resize: identity is bit-exact, constants preserved") {
  Rng rng(37);
  Tensor img = random_tensor({3, 9, 9}, rng, 0.0f, 1.0f);
  Tensor out = Tensor::zeros({3, 9, 9});
  kern::bilinear_resize(img.data(), 3, 9, 9, out.data(), 9, 9);
  CHECK(max_abs_diff(img, out) == 0.0f);

  Tensor cst = Tensor::full({1, 5, 7}, 0.42f);
  Tensor up = Tensor::zeros({1, 16, 16});
  kern::bilinear_resize(cst.data(), 1, 5, 7, up.data(), 16, 16);
  CHECK(max_abs_diff(up, Tensor::full({1, 16, 16}, 0.42f)) < 1e-6f);

  Tensor big = random_tensor({3, 20, 20}, rng, 0.0f, 1.0f);
  Tensor a = Tensor::zeros({3, 13, 13});
  Tensor b = Tensor::zeros({3, 13, 13});
  kern::bilinear_resize(big.data(), 3, 20, 20, a.data(), 13, 13);
  kern::serial::bilinear_resize(big.data(), 3, 20, 20, b.data(), 13, 13);
  CHECK(max_abs_diff(a, b) == 0.0f);
}

TEST_CASE("pixel shuffle round-trips and places sub-pixels correctly") {
  Rng rng(41);
  Tensor in = random_tensor({2, 8, 3, 3}, rng);
  Tensor out = Tensor::zeros({2, 2, 6, 6});
  kern::pixel_shuffle(in, 2, out);
  // channel c, offset (dy,dx) comes from input channel c*4 + dy*2 + dx
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
          int src_c = c * 4 + (i % 2) * 2 + (j % 2);
          CHECK(out.at(n, c, i, j) == in.at(n, src_c, i / 2, j / 2));
        }
  Tensor back = Tensor::zeros({2, 8, 3, 3});
  kern::pixel_unshuffle(out, 2, back);
  CHECK(max_abs_diff(in, back) == 0.0f);
}

TEST_CASE("rng: determinism, ranges, child streams") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());

  Rng r(99);
  double mean = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    mean += u;
  }
  CHECK(mean / n == doctest::Approx(0.5).epsilon(0.01));

  double m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double g = r.normal();
    m2 += g * g;
  }
  CHECK(m2 / n == doctest::Approx(1.0).epsilon(0.03));

  Rng parent1(5), parent2(5);
  Rng c1 = parent1.child(0);
  Rng c2 = parent2.child(0);
  CHECK(c1.uniform() == c2.uniform());
  Rng c3 = parent1.child(1);
  CHECK(c3.uniform() != c1.uniform());
}
