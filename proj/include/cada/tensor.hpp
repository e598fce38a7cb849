#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cada {

// Dense row-major f64 tensor. 4-D activations use [N, C, H, W].
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v) { return Tensor(std::move(shape), v); }
  static Tensor from_values(std::vector<int> shape, std::vector<double> values);

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  int numel() const { return static_cast<int>(data_.size()); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](int i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return data_[static_cast<std::size_t>(i)]; }

  // 4-D accessors
  double& at(int n, int c, int h, int w) {
    return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  double at(int n, int c, int h, int w) const {
    return data_[static_cast<std::size_t>(((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  // 3-D accessors ([C, H, W] images)
  double& at(int c, int h, int w) {
    return data_[static_cast<std::size_t>((c * shape_[1] + h) * shape_[2] + w)];
  }
  double at(int c, int h, int w) const {
    return data_[static_cast<std::size_t>((c * shape_[1] + h) * shape_[2] + w)];
  }

  void fill(double v);
  void add_(const Tensor& o);             // elementwise +=
  void add_scaled_(const Tensor& o, double s);
  void scale_(double s);
  double sum() const;
  double min() const;
  double max() const;
  bool all_finite() const;

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

std::string shape_str(const std::vector<int>& shape);
inline std::string shape_str(const Tensor& t) { return shape_str(t.shape()); }

// "TNSR v1 <ndim> <d0> <d1> ...\n" header followed by raw little-endian f64.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);

// Trainable tensor with its gradient accumulator and SGD momentum buffer.
struct Parameter {
  Tensor value;
  Tensor grad;
  Tensor momentum;
  std::string name;

  Parameter() = default;
  explicit Parameter(Tensor v, std::string n = "")
      : value(std::move(v)),
        grad(Tensor::zeros(value.shape())),
        momentum(Tensor::zeros(value.shape())),
        name(std::move(n)) {}

  void zero_grad() { grad.fill(0.0); }
};

}  // namespace cada
