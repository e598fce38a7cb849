#include "cada/tensor.hpp"

#include "cada/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace cada {

static_assert(std::endian::native == std::endian::little,
              "tensor serialization assumes a little-endian host");

namespace {
std::size_t checked_numel(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("negative dimension in shape " + shape_str(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int> shape, double fill)
    : shape_(std::move(shape)), data_(checked_numel(shape_), fill) {}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> values) {
  Tensor t;
  t.shape_ = std::move(shape);
  if (checked_numel(t.shape_) != values.size())
    throw std::invalid_argument("value count does not match shape " + shape_str(t.shape_));
  t.data_ = std::move(values);
  return t;
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::add_(const Tensor& o) {
  if (!same_shape(o))
    throw std::invalid_argument("shape mismatch in add_: " + shape_str(*this) + " vs " + shape_str(o));
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
}

void Tensor::add_scaled_(const Tensor& o, double s) {
  if (!same_shape(o))
    throw std::invalid_argument("shape mismatch in add_scaled_: " + shape_str(*this) + " vs " + shape_str(o));
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
}

void Tensor::scale_(double s) {
  for (double& v : data_) v *= s;
}

double Tensor::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

double Tensor::min() const {
  double m = data_.empty() ? 0.0 : data_[0];
  for (double v : data_) m = std::min(m, v);
  return m;
}

double Tensor::max() const {
  double m = data_.empty() ? 0.0 : data_[0];
  for (double v : data_) m = std::max(m, v);
  return m;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

void write_tensor(std::ostream& os, const Tensor& t) {
  os << "TNSR v1 " << t.ndim();
  for (int i = 0; i < t.ndim(); ++i) os << ' ' << t.dim(i);
  os << '\n';
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(t.numel())));
}

Tensor read_tensor(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw DataError("tensor stream: missing header line");
  std::istringstream hdr(line);
  std::string magic, version;
  int ndim = -1;
  hdr >> magic >> version >> ndim;
  if (magic != "TNSR" || version != "v1" || ndim < 0)
    throw DataError("tensor stream: bad header \"" + line + "\"");
  std::vector<int> shape(static_cast<std::size_t>(ndim));
  for (int& d : shape) {
    if (!(hdr >> d) || d < 0)
      throw DataError("tensor stream: bad dimensions in header \"" + line + "\"");
  }
  Tensor t(shape);
  const auto bytes = static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(t.numel()));
  is.read(reinterpret_cast<char*>(t.data()), bytes);
  if (is.gcount() != bytes)
    throw DataError("tensor stream: truncated payload, expected " + std::to_string(bytes) +
                             " bytes, got " + std::to_string(is.gcount()));
  return t;
}

}  // namespace cada
