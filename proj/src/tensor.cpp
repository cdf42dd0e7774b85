#include "forecast/tensor.hpp"

#include <cmath>
#include <sstream>

#include "forecast/errors.hpp"

namespace forecast {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  data_.assign(numel(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (numel(shape_) != data_.size()) {
    throw DimensionError("tensor shape " + shape_str(shape_) + " expects " +
                         std::to_string(numel(shape_)) + " values, got " +
                         std::to_string(data_.size()));
  }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(Shape shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(Shape shape, double v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

Tensor Tensor::vector(std::initializer_list<double> v) {
  return Tensor({v.size()}, std::vector<double>(v));
}

Tensor Tensor::vector(const std::vector<double>& v) {
  return Tensor({v.size()}, v);
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(data));
}

void Tensor::fill(double v) {
  for (double& x : data_) x = v;
}

void Tensor::add_(const Tensor& other) {
  if (!same_shape(other)) {
    throw DimensionError("add_: shape " + shape_str(shape_) + " vs " +
                         shape_str(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

void Tensor::add_scaled_(const Tensor& other, double c) {
  if (!same_shape(other)) {
    throw DimensionError("add_scaled_: shape " + shape_str(shape_) + " vs " +
                         shape_str(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += c * other.data_[i];
}

void check_finite(const Tensor& t, const std::string& what) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) {
      throw NumericError(what + ": non-finite value at flat index " +
                         std::to_string(i) + " of shape " +
                         shape_str(t.shape()));
    }
  }
}

bool all_finite(const Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i])) return false;
  }
  return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError("max_abs_diff: shape " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::fabs(a[i] - b[i]));
  }
  return m;
}

}  // namespace forecast
