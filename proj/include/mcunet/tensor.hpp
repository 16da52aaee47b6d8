#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcu {

// Dense row-major double tensor. Shapes used throughout:
//   image       [2, H, W]     channel 0 = real, channel 1 = imaginary
//   coil stack  [C, 2, H, W]
//   mask        [H, W]
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    std::int64_t n = 1;
    for (int d : shape_) {
      if (d <= 0) throw std::invalid_argument("Tensor: nonpositive dimension");
      n *= d;
    }
    data_.assign(static_cast<std::size_t>(n), 0.0);
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    for (double& x : t.data_) x = v;
    return t;
  }
  static Tensor scalar(double v) { return full({1}, v); }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  double& at(int i, int j) { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
  double at(int i, int j) const { return data_[static_cast<std::size_t>(i) * shape_[1] + j]; }
  double& at(int i, int j, int k) {
    return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  double at(int i, int j, int k) const {
    return data_[(static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k];
  }
  double& at(int i, int j, int k, int l) {
    return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  double at(int i, int j, int k, int l) const {
    return data_[((static_cast<std::size_t>(i) * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  std::string shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + "]";
  }

private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

// Shape / finiteness guards shared by the operator modules.
void require(bool cond, const std::string& msg);
void require_shape(const Tensor& t, const std::vector<int>& shape, const std::string& who);
void require_finite(const Tensor& t, const std::string& who);

double dot(const Tensor& a, const Tensor& b);
double norm2(const Tensor& a);  // sqrt of sum of squares
double max_abs(const Tensor& a);

}  // namespace mcu
