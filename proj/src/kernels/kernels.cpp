#include "paint/kernels/kernels.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "paint/core/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace paint::kern {

namespace {
// BLAS must stay single-threaded: OpenMP owns the outer parallelism and the
// result must not depend on how BLAS splits work internally.
struct BlasInit {
  BlasInit() { openblas_set_num_threads(1); }
};
const BlasInit blas_init;
}  // namespace

void gemm(bool transA, bool transB, int M, int N, int K, float alpha,
          const float* A, const float* B, float beta, float* C) {
  cblas_sgemm(CblasRowMajor, transA ? CblasTrans : CblasNoTrans,
              transB ? CblasTrans : CblasNoTrans, M, N, K, alpha, A,
              transA ? M : K, B, transB ? K : N, beta, C, N);
}

void im2col(const float* im, int C, int H, int W, int kh, int kw, int stride,
            int pad, int Ho, int Wo, float* col) {
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        float* dst = col + (((int64_t)c * kh + ki) * kw + kj) * Ho * Wo;
        for (int oi = 0; oi < Ho; ++oi) {
          int ii = oi * stride - pad + ki;
          if (ii < 0 || ii >= H) {
            std::memset(dst + (int64_t)oi * Wo, 0, sizeof(float) * (size_t)Wo);
            continue;
          }
          const float* src = im + ((int64_t)c * H + ii) * W;
          for (int oj = 0; oj < Wo; ++oj) {
            int jj = oj * stride - pad + kj;
            dst[(int64_t)oi * Wo + oj] =
                (jj >= 0 && jj < W) ? src[jj] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im(const float* col, int C, int H, int W, int kh, int kw, int stride,
            int pad, int Ho, int Wo, float* im) {
  std::memset(im, 0, sizeof(float) * (size_t)C * H * W);
  for (int c = 0; c < C; ++c) {
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const float* src = col + (((int64_t)c * kh + ki) * kw + kj) * Ho * Wo;
        for (int oi = 0; oi < Ho; ++oi) {
          int ii = oi * stride - pad + ki;
          if (ii < 0 || ii >= H) continue;
          float* dst = im + ((int64_t)c * H + ii) * W;
          for (int oj = 0; oj < Wo; ++oj) {
            int jj = oj * stride - pad + kj;
            if (jj >= 0 && jj < W) dst[jj] += src[(int64_t)oi * Wo + oj];
          }
        }
      }
    }
  }
}

static void check_conv_shapes(const Tensor& input, const Tensor& weight,
                              int stride, int pad) {
  PAINT_CHECK(input.ndim() == 4 && weight.ndim() == 4, "conv expects 4-D");
  PAINT_CHECK(input.dim(1) == weight.dim(1), "conv channel mismatch");
  PAINT_CHECK(stride >= 1 && pad >= 0, "bad conv geometry");
}

void conv2d_forward(const Tensor& input, const Tensor& weight,
                    const Tensor* bias, int stride, int pad, Tensor& output) {
  check_conv_shapes(input, weight, stride, pad);
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2),
            W = input.dim(3);
  const int F = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  const int Ho = conv_out_dim(H, kh, stride, pad);
  const int Wo = conv_out_dim(W, kw, stride, pad);
  PAINT_CHECK(output.shape() == std::vector<int>({N, F, Ho, Wo}),
              "conv output shape mismatch");
  const int64_t colsz = (int64_t)C * kh * kw * Ho * Wo;

#pragma omp parallel
  {
    std::vector<float> col((size_t)colsz);
#pragma omp for schedule(static)
    for (int n = 0; n < N; ++n) {
      im2col(input.data() + (int64_t)n * C * H * W, C, H, W, kh, kw, stride,
             pad, Ho, Wo, col.data());
      float* out = output.data() + (int64_t)n * F * Ho * Wo;
      gemm(false, false, F, Ho * Wo, C * kh * kw, 1.0f, weight.data(),
           col.data(), 0.0f, out);
      if (bias) {
        for (int f = 0; f < F; ++f) {
          float b = bias->data()[f];
          float* o = out + (int64_t)f * Ho * Wo;
          for (int i = 0; i < Ho * Wo; ++i) o[i] += b;
        }
      }
    }
  }
}

void conv2d_backward_input(const Tensor& dout, const Tensor& weight,
                           int stride, int pad, Tensor& dinput) {
  const int N = dinput.dim(0), C = dinput.dim(1), H = dinput.dim(2),
            W = dinput.dim(3);
  const int F = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  const int Ho = dout.dim(2), Wo = dout.dim(3);
  PAINT_CHECK(dout.dim(0) == N && dout.dim(1) == F, "conv dout shape");
  const int64_t colsz = (int64_t)C * kh * kw * Ho * Wo;

#pragma omp parallel
  {
    std::vector<float> col((size_t)colsz);
#pragma omp for schedule(static)
    for (int n = 0; n < N; ++n) {
      // dcol = W^T [CKK,F] x dout_n [F, HoWo]
      gemm(true, false, C * kh * kw, Ho * Wo, F, 1.0f, weight.data(),
           dout.data() + (int64_t)n * F * Ho * Wo, 0.0f, col.data());
      col2im(col.data(), C, H, W, kh, kw, stride, pad, Ho, Wo,
             dinput.data() + (int64_t)n * C * H * W);
    }
  }
}

void conv2d_backward_weight(const Tensor& dout, const Tensor& input,
                            int stride, int pad, Tensor& dweight,
                            Tensor* dbias) {
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2),
            W = input.dim(3);
  const int F = dweight.dim(0), kh = dweight.dim(2), kw = dweight.dim(3);
  const int Ho = dout.dim(2), Wo = dout.dim(3);
  const int64_t colsz = (int64_t)C * kh * kw * Ho * Wo;
  const int64_t wsz = dweight.numel();

  // Fixed block partition of the batch keeps the accumulation order
  // independent of the thread count.
  const int nblocks = std::min(N, 4);
  std::vector<std::vector<float>> partial((size_t)nblocks);

#pragma omp parallel for schedule(static)
  for (int b = 0; b < nblocks; ++b) {
    partial[(size_t)b].assign((size_t)wsz, 0.0f);
    std::vector<float> col((size_t)colsz);
    int lo = (int)((int64_t)N * b / nblocks);
    int hi = (int)((int64_t)N * (b + 1) / nblocks);
    for (int n = lo; n < hi; ++n) {
      im2col(input.data() + (int64_t)n * C * H * W, C, H, W, kh, kw, stride,
             pad, Ho, Wo, col.data());
      // dW += dout_n [F,HoWo] x col^T [HoWo, CKK]
      gemm(false, true, F, C * kh * kw, Ho * Wo, 1.0f,
           dout.data() + (int64_t)n * F * Ho * Wo, col.data(), 1.0f,
           partial[(size_t)b].data());
    }
  }
  for (int b = 0; b < nblocks; ++b)
    axpy(1.0f, partial[(size_t)b].data(), dweight.data(), wsz);

  if (dbias) {
    for (int f = 0; f < F; ++f) {
      double s = 0.0;
      for (int n = 0; n < N; ++n)
        s += reduce_sum(dout.data() + ((int64_t)n * F + f) * Ho * Wo,
                        (int64_t)Ho * Wo);
      dbias->data()[f] += (float)s;
    }
  }
}

void linear_forward(const Tensor& x, const Tensor& W, const Tensor* b,
                    Tensor& y) {
  const int N = x.dim(0), In = x.dim(1), Out = W.dim(0);
  PAINT_CHECK(W.dim(1) == In && y.dim(0) == N && y.dim(1) == Out,
              "linear shape mismatch");
  gemm(false, true, N, Out, In, 1.0f, x.data(), W.data(), 0.0f, y.data());
  if (b) {
    for (int n = 0; n < N; ++n)
      axpy(1.0f, b->data(), y.data() + (int64_t)n * Out, Out);
  }
}

void linear_backward(const Tensor& dy, const Tensor& x, const Tensor& W,
                     Tensor& dx, Tensor& dW, Tensor* db, bool want_dx,
                     bool want_dparam) {
  const int N = x.dim(0), In = x.dim(1), Out = W.dim(0);
  if (want_dx)
    gemm(false, false, N, In, Out, 1.0f, dy.data(), W.data(), 0.0f, dx.data());
  if (want_dparam) {
    gemm(true, false, Out, In, N, 1.0f, dy.data(), x.data(), 1.0f, dW.data());
    if (db) {
      for (int o = 0; o < Out; ++o) {
        double s = 0.0;
        for (int n = 0; n < N; ++n) s += dy.data()[(int64_t)n * Out + o];
        db->data()[o] += (float)s;
      }
    }
  }
}

double reduce_sum(const float* x, int64_t n) {
  constexpr int64_t kBlock = 4096;
  const int64_t nblocks = (n + kBlock - 1) / kBlock;
  if (nblocks <= 1) {
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  std::vector<double> partial((size_t)nblocks);
#pragma omp parallel for schedule(static)
  for (int64_t b = 0; b < nblocks; ++b) {
    double s = 0.0;
    int64_t hi = std::min(n, (b + 1) * kBlock);
    for (int64_t i = b * kBlock; i < hi; ++i) s += x[i];
    partial[(size_t)b] = s;
  }
  double s = 0.0;
  for (int64_t b = 0; b < nblocks; ++b) s += partial[(size_t)b];
  return s;
}

double dot(const float* a, const float* b, int64_t n) {
  constexpr int64_t kBlock = 4096;
  const int64_t nblocks = (n + kBlock - 1) / kBlock;
  if (nblocks <= 1) {
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += (double)a[i] * b[i];
    return s;
  }
  std::vector<double> partial((size_t)nblocks);
#pragma omp parallel for schedule(static)
  for (int64_t blk = 0; blk < nblocks; ++blk) {
    double s = 0.0;
    int64_t hi = std::min(n, (blk + 1) * kBlock);
    for (int64_t i = blk * kBlock; i < hi; ++i) s += (double)a[i] * b[i];
    partial[(size_t)blk] = s;
  }
  double s = 0.0;
  for (int64_t blk = 0; blk < nblocks; ++blk) s += partial[(size_t)blk];
  return s;
}

void relu_forward(const float* x, float* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(const float* x, const float* dy, float* dx, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
}

void sigmoid_forward(const float* x, float* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = 1.0f / (1.0f + std::exp(-x[i]));
}

void sigmoid_backward(const float* y, const float* dy, float* dx, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) dx[i] = dy[i] * y[i] * (1.0f - y[i]);
}

void axpy(float a, const float* x, float* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale(float a, float* x, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) x[i] *= a;
}

void add(const float* a, const float* b, float* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

void mul(const float* a, const float* b, float* y, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void clamp01(float* x, int64_t n) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) x[i] = std::clamp(x[i], 0.0f, 1.0f);
}

// Shared scalar core so serial:: and the parallel version agree bit-exactly.
static inline void resize_rows(const float* src, int C, int H, int W,
                               float* dst, int OH, int OW, int oi_lo,
                               int oi_hi) {
  const double sy = OH > 1 ? (double)(H - 1) / (OH - 1) : 0.0;
  const double sx = OW > 1 ? (double)(W - 1) / (OW - 1) : 0.0;
  for (int oi = oi_lo; oi < oi_hi; ++oi) {
    double fy = oi * sy;
    int y0 = (int)fy;
    int y1 = std::min(y0 + 1, H - 1);
    float wy = (float)(fy - y0);
    for (int oj = 0; oj < OW; ++oj) {
      double fx = oj * sx;
      int x0 = (int)fx;
      int x1 = std::min(x0 + 1, W - 1);
      float wx = (float)(fx - x0);
      for (int c = 0; c < C; ++c) {
        const float* p = src + (int64_t)c * H * W;
        float top = p[(int64_t)y0 * W + x0] * (1.0f - wx) +
                    p[(int64_t)y0 * W + x1] * wx;
        float bot = p[(int64_t)y1 * W + x0] * (1.0f - wx) +
                    p[(int64_t)y1 * W + x1] * wx;
        dst[((int64_t)c * OH + oi) * OW + oj] =
            top * (1.0f - wy) + bot * wy;
      }
    }
  }
}

void bilinear_resize(const float* src, int C, int H, int W, float* dst, int OH,
                     int OW) {
  PAINT_CHECK(C >= 1 && H >= 1 && W >= 1 && OH >= 1 && OW >= 1,
              "resize: empty image");
#pragma omp parallel for schedule(static)
  for (int oi = 0; oi < OH; ++oi) resize_rows(src, C, H, W, dst, OH, OW, oi, oi + 1);
}

void pixel_shuffle(const Tensor& in, int r, Tensor& out) {
  const int N = in.dim(0), Cin = in.dim(1), H = in.dim(2), W = in.dim(3);
  PAINT_CHECK(Cin % (r * r) == 0, "pixel_shuffle channel count");
  const int C = Cin / (r * r);
  PAINT_CHECK(out.shape() == std::vector<int>({N, C, H * r, W * r}),
              "pixel_shuffle output shape");
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c)
      for (int dy = 0; dy < r; ++dy)
        for (int dx = 0; dx < r; ++dx) {
          const float* s =
              in.data() + (((int64_t)n * Cin + (c * r + dy) * r + dx) * H) * W;
          for (int i = 0; i < H; ++i) {
            float* d = out.data() +
                       (((int64_t)n * C + c) * H * r + i * r + dy) * W * r + dx;
            for (int j = 0; j < W; ++j) d[(int64_t)j * r] = s[(int64_t)i * W + j];
          }
        }
  }
}

void pixel_unshuffle(const Tensor& in, int r, Tensor& out) {
  const int N = in.dim(0), C = in.dim(1), Hr = in.dim(2), Wr = in.dim(3);
  const int H = Hr / r, W = Wr / r;
  PAINT_CHECK(out.shape() == std::vector<int>({N, C * r * r, H, W}),
              "pixel_unshuffle output shape");
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c)
      for (int dy = 0; dy < r; ++dy)
        for (int dx = 0; dx < r; ++dx) {
          float* d = out.data() +
                     (((int64_t)n * C * r * r + (c * r + dy) * r + dx) * H) * W;
          for (int i = 0; i < H; ++i) {
            const float* s =
                in.data() + (((int64_t)n * C + c) * Hr + i * r + dy) * Wr + dx;
            for (int j = 0; j < W; ++j) d[(int64_t)i * W + j] = s[(int64_t)j * r];
          }
        }
  }
}

namespace serial {

void gemm(bool transA, bool transB, int M, int N, int K, float alpha,
          const float* A, const float* B, float beta, float* C) {
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < N; ++j) {
      double acc = 0.0;
      for (int k = 0; k < K; ++k) {
        float a = transA ? A[(int64_t)k * M + i] : A[(int64_t)i * K + k];
        float b = transB ? B[(int64_t)j * K + k] : B[(int64_t)k * N + j];
        acc += (double)a * b;
      }
      C[(int64_t)i * N + j] =
          alpha * (float)acc + (beta == 0.0f ? 0.0f : beta * C[(int64_t)i * N + j]);
    }
  }
}

void conv2d_forward(const Tensor& input, const Tensor& weight,
                    const Tensor* bias, int stride, int pad, Tensor& output) {
  const int N = input.dim(0), C = input.dim(1), H = input.dim(2),
            W = input.dim(3);
  const int F = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
  const int Ho = conv_out_dim(H, kh, stride, pad);
  const int Wo = conv_out_dim(W, kw, stride, pad);
  for (int n = 0; n < N; ++n)
    for (int f = 0; f < F; ++f)
      for (int oi = 0; oi < Ho; ++oi)
        for (int oj = 0; oj < Wo; ++oj) {
          double acc = bias ? bias->data()[f] : 0.0;
          for (int c = 0; c < C; ++c)
            for (int ki = 0; ki < kh; ++ki)
              for (int kj = 0; kj < kw; ++kj) {
                int ii = oi * stride - pad + ki;
                int jj = oj * stride - pad + kj;
                if (ii < 0 || ii >= H || jj < 0 || jj >= W) continue;
                acc += (double)input.at(n, c, ii, jj) * weight.at(f, c, ki, kj);
              }
          output.at(n, f, oi, oj) = (float)acc;
        }
}

double reduce_sum(const float* x, int64_t n) {
  // Same fixed-block order as the parallel version so totals match exactly.
  constexpr int64_t kBlock = 4096;
  double total = 0.0;
  for (int64_t b = 0; b * kBlock < n; ++b) {
    double s = 0.0;
    int64_t hi = std::min(n, (b + 1) * kBlock);
    for (int64_t i = b * kBlock; i < hi; ++i) s += x[i];
    total += s;
  }
  return total;
}

void bilinear_resize(const float* src, int C, int H, int W, float* dst, int OH,
                     int OW) {
  resize_rows(src, C, H, W, dst, OH, OW, 0, OH);
}

}  // namespace serial

}  // namespace paint::kern
