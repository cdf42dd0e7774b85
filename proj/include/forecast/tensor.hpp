#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace forecast {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of doubles. Rank 0 is a scalar (size 1).
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);  // zero-filled
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor vector(std::initializer_list<double> v);
  static Tensor vector(const std::vector<double>& v);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& operator()(std::size_t i) { return data_[i]; }
  double operator()(std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * shape_[1] + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * shape_[1] + j];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t k,
                     std::size_t l) {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k,
                    std::size_t l) const {
    return data_[((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // In-place helpers used by optimizer/backward internals.
  void fill(double v);
  void add_(const Tensor& other);             // this += other
  void add_scaled_(const Tensor& other, double c);  // this += c * other

  bool requires_grad = false;

 private:
  Shape shape_;
  std::vector<double> data_;
};

// Throws NumericError naming the first non-finite coordinate.
void check_finite(const Tensor& t, const std::string& what);

bool all_finite(const Tensor& t);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace forecast
