#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

namespace paint {

// Dense float32 tensor, row-major, up to 4 dimensions. Reshape shares
// storage; clone copies. All math lives in paint::kern free functions.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, float value);
  static Tensor from(std::vector<int> shape, const std::vector<float>& values);

  bool defined() const { return data_ != nullptr; }
  int64_t numel() const { return numel_; }
  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }

  float* data() { return data_.get(); }
  const float* data() const { return data_.get(); }

  float& operator[](int64_t i) { return data_.get()[i]; }
  float operator[](int64_t i) const { return data_.get()[i]; }

  float& at(int i) { return data_.get()[i]; }
  float& at(int i, int j) { return data_.get()[(int64_t)i * shape_[1] + j]; }
  float& at(int i, int j, int k) {
    return data_.get()[((int64_t)i * shape_[1] + j) * shape_[2] + k];
  }
  float& at(int i, int j, int k, int l) {
    return data_.get()[(((int64_t)i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  float at(int i) const { return data_.get()[i]; }
  float at(int i, int j) const { return data_.get()[(int64_t)i * shape_[1] + j]; }
  float at(int i, int j, int k) const {
    return data_.get()[((int64_t)i * shape_[1] + j) * shape_[2] + k];
  }
  float at(int i, int j, int k, int l) const {
    return data_.get()[(((int64_t)i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  // Shares storage; product of dims must match. One dim may be -1 (inferred).
  Tensor reshape(std::vector<int> new_shape) const;
  Tensor clone() const;
  void fill(float value);
  void copy_from(const Tensor& other);

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  int64_t numel_ = 0;
  std::shared_ptr<float[]> data_;
};

}  // namespace paint
