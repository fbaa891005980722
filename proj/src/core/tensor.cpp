#include "paint/core/tensor.hpp"

#include <cstring>
#include <sstream>

#include "paint/core/error.hpp"

namespace paint {

static int64_t checked_numel(const std::vector<int>& shape) {
  PAINT_CHECK(!shape.empty() && shape.size() <= 4, "tensor rank must be 1..4");
  int64_t n = 1;
  for (int d : shape) {
    PAINT_CHECK(d > 0, "tensor dims must be positive");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  numel_ = checked_numel(shape_);
  data_ = std::shared_ptr<float[]>(new float[numel_]);
}

Tensor Tensor::zeros(std::vector<int> shape) {
  Tensor t(std::move(shape));
  std::memset(t.data(), 0, sizeof(float) * (size_t)t.numel_);
  return t;
}

Tensor Tensor::full(std::vector<int> shape, float value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, const std::vector<float>& values) {
  Tensor t(std::move(shape));
  PAINT_CHECK((int64_t)values.size() == t.numel_, "value count mismatch");
  std::memcpy(t.data(), values.data(), sizeof(float) * values.size());
  return t;
}

Tensor Tensor::reshape(std::vector<int> new_shape) const {
  PAINT_CHECK(defined(), "reshape of undefined tensor");
  int64_t known = 1;
  int infer = -1;
  for (size_t i = 0; i < new_shape.size(); ++i) {
    if (new_shape[i] == -1) {
      PAINT_CHECK(infer == -1, "at most one -1 dim");
      infer = (int)i;
    } else {
      PAINT_CHECK(new_shape[i] > 0, "tensor dims must be positive");
      known *= new_shape[i];
    }
  }
  if (infer >= 0) {
    PAINT_CHECK(numel_ % known == 0, "cannot infer dim");
    new_shape[(size_t)infer] = (int)(numel_ / known);
  }
  Tensor t;
  t.shape_ = std::move(new_shape);
  t.numel_ = checked_numel(t.shape_);
  PAINT_CHECK(t.numel_ == numel_, "reshape numel mismatch");
  t.data_ = data_;
  return t;
}

Tensor Tensor::clone() const {
  PAINT_CHECK(defined(), "clone of undefined tensor");
  Tensor t(shape_);
  std::memcpy(t.data(), data(), sizeof(float) * (size_t)numel_);
  return t;
}

void Tensor::fill(float value) {
  for (int64_t i = 0; i < numel_; ++i) data_.get()[i] = value;
}

void Tensor::copy_from(const Tensor& other) {
  PAINT_CHECK(same_shape(other), "copy_from shape mismatch");
  std::memcpy(data(), other.data(), sizeof(float) * (size_t)numel_);
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << ",";
    os << shape_[i];
  }
  os << "]";
  return os.str();
}

}  // namespace paint
