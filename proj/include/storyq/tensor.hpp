// Dense n-dimensional array over a row-major Eigen buffer; the sole data
// currency of the numerics core.
#pragma once

#include "storyq/common.hpp"

#include <numeric>
#include <vector>

namespace storyq {

template <class Scalar>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    long n = 1;
    for (int d : shape_) {
      if (d <= 0) throw DimensionError("Tensor: non-positive dimension");
      n *= d;
    }
    data_ = VecX<Scalar>::Zero(n);
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  long size() const { return data_.size(); }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  VecX<Scalar>& flat() { return data_; }
  const VecX<Scalar>& flat() const { return data_; }

  void set_zero() { data_.setZero(); }

  Scalar& operator[](long i) { return data_[i]; }
  Scalar operator[](long i) const { return data_[i]; }

  Scalar& operator()(int i) { return data_[i]; }
  Scalar operator()(int i) const { return data_[i]; }
  Scalar& operator()(int i, int j) { return data_[static_cast<long>(i) * dim(1) + j]; }
  Scalar operator()(int i, int j) const { return data_[static_cast<long>(i) * dim(1) + j]; }
  Scalar& operator()(int i, int j, int k) {
    return data_[(static_cast<long>(i) * dim(1) + j) * dim(2) + k];
  }
  Scalar operator()(int i, int j, int k) const {
    return data_[(static_cast<long>(i) * dim(1) + j) * dim(2) + k];
  }
  Scalar& operator()(int i, int j, int k, int l) {
    return data_[((static_cast<long>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }
  Scalar operator()(int i, int j, int k, int l) const {
    return data_[((static_cast<long>(i) * dim(1) + j) * dim(2) + k) * dim(3) + l];
  }

  // view as rows x cols matrix in row-major order; size must match
  Eigen::Map<RowMatX<Scalar>> matrix(int rows, int cols) {
    if (static_cast<long>(rows) * cols != size())
      throw DimensionError(strfmt("Tensor::matrix: %dx%d view of size-%ld tensor", rows, cols, size()));
    return Eigen::Map<RowMatX<Scalar>>(data_.data(), rows, cols);
  }
  Eigen::Map<const RowMatX<Scalar>> matrix(int rows, int cols) const {
    if (static_cast<long>(rows) * cols != size())
      throw DimensionError(strfmt("Tensor::matrix: %dx%d view of size-%ld tensor", rows, cols, size()));
    return Eigen::Map<const RowMatX<Scalar>>(data_.data(), rows, cols);
  }

  Eigen::Map<VecX<Scalar>> vector() { return Eigen::Map<VecX<Scalar>>(data_.data(), size()); }
  Eigen::Map<const VecX<Scalar>> vector() const {
    return Eigen::Map<const VecX<Scalar>>(data_.data(), size());
  }

  Tensor reshaped(std::vector<int> shape) const {
    Tensor out(std::move(shape));
    if (out.size() != size()) throw DimensionError("Tensor::reshaped: size mismatch");
    out.data_ = data_;
    return out;
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<int> shape_;
  VecX<Scalar> data_;
};

using Tensord = Tensor<double>;
using Tensorf = Tensor<float>;

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

}  // namespace storyq
