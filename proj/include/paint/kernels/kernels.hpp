#pragma once

#include <cstdint>

#include "paint/core/tensor.hpp"

// Numeric kernels. Two tiers:
//   kern::serial — naive reference loops, kept for tests and the benchmark.
//   kern::       — production path: OpenMP across independent work items
//                  (batch samples, fixed blocks) with single-threaded BLAS
//                  inside, so results never depend on the thread count.
namespace paint::kern {

// C[M,N] = alpha * op(A) * op(B) + beta * C, all row-major.
// op(A) is A[M,K] (transA=false) or Aapos[K,M] read transposed (transA=true).
void gemm(bool transA, bool transB, int M, int N, int K, float alpha,
          const float* A, const float* B, float beta, float* C);

// input [N,C,H,W] -> col [C*kh*kw, Ho*Wo] for one sample.
void im2col(const float* im, int C, int H, int W, int kh, int kw, int stride,
            int pad, int Ho, int Wo, float* col);
void col2im(const float* col, int C, int H, int W, int kh, int kw, int stride,
            int pad, int Ho, int Wo, float* im);

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// input [N,Cin,H,W], weight [Cout,Cin,kh,kw], bias [Cout] or nullptr.
void conv2d_forward(const Tensor& input, const Tensor& weight,
                    const Tensor* bias, int stride, int pad, Tensor& output);
void conv2d_backward_input(const Tensor& dout, const Tensor& weight,
                           int stride, int pad, Tensor& dinput);
// Accumulates into dweight/dbias (callers zero grads at step boundaries).
void conv2d_backward_weight(const Tensor& dout, const Tensor& input,
                            int stride, int pad, Tensor& dweight,
                            Tensor* dbias);

// x [N,In] · W[Out,In]^T + b -> y [N,Out]
void linear_forward(const Tensor& x, const Tensor& W, const Tensor* b,
                    Tensor& y);
void linear_backward(const Tensor& dy, const Tensor& x, const Tensor& W,
                     Tensor& dx, Tensor& dW, Tensor* db, bool want_dx,
                     bool want_dparam);

// Deterministic reduction: fixed 4096-element blocks, double accumulators,
// block partials combined in index order.
double reduce_sum(const float* x, int64_t n);
double dot(const float* a, const float* b, int64_t n);

// Elementwise, parallel over fixed chunks.
void relu_forward(const float* x, float* y, int64_t n);
void relu_backward(const float* x, const float* dy, float* dx, int64_t n);
void sigmoid_forward(const float* x, float* y, int64_t n);
// dx from y (the cached output): dx = dy * y * (1-y)
void sigmoid_backward(const float* y, const float* dy, float* dx, int64_t n);
void axpy(float a, const float* x, float* y, int64_t n);  // y += a*x
void scale(float a, float* x, int64_t n);
void add(const float* a, const float* b, float* y, int64_t n);
void mul(const float* a, const float* b, float* y, int64_t n);
void clamp01(float* x, int64_t n);

// src [C,H,W] -> dst [C,OH,OW]; bilinear, endpoint-aligned (identity when
// sizes match is bit-exact).
void bilinear_resize(const float* src, int C, int H, int W, float* dst, int OH,
                     int OW);

// [N, C*r*r, H, W] -> [N, C, H*r, W*r] (sub-pixel upsample) and its inverse.
void pixel_shuffle(const Tensor& in, int r, Tensor& out);
void pixel_unshuffle(const Tensor& in, int r, Tensor& out);

namespace serial {
void gemm(bool transA, bool transB, int M, int N, int K, float alpha,
          const float* A, const float* B, float beta, float* C);
void conv2d_forward(const Tensor& input, const Tensor& weight,
                    const Tensor* bias, int stride, int pad, Tensor& output);
double reduce_sum(const float* x, int64_t n);
void bilinear_resize(const float* src, int C, int H, int W, float* dst, int OH,
                     int OW);
}  // namespace serial

}  // namespace paint::kern
