#include "testutil.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>

#include "paint/core/error.hpp"

namespace paint::testutil {

float max_abs_diff(const float* a, const float* b, int64_t n) {
  float m = 0.0f;
  for (int64_t i = 0; i < n; ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

float max_abs_diff(const Tensor& a, const Tensor& b) {
  PAINT_CHECK(a.numel() == b.numel(), "max_abs_diff: size mismatch");
  return max_abs_diff(a.data(), b.data(), a.numel());
}

double central_diff(const std::function<double(const std::vector<float>&)>& f,
                    std::vector<float> x, size_t i, double eps) {
  float orig = x[i];
  x[i] = (float)(orig + eps);
  double hi = f(x);
  x[i] = (float)(orig - eps);
  double lo = f(x);
  return (hi - lo) / (2.0 * eps);
}

std::string scratch_dir(const std::string& tag) {
  auto now = std::chrono::steady_clock::now().time_since_epoch().count();
  auto dir = std::filesystem::temp_directory_path() /
             ("paint_test_" + tag + "_" + std::to_string(now));
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace paint::testutil
