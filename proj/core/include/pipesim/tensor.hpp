#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace pipesim {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

// Dense row-major array of doubles. Copies are deep; there are no views.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape()); }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  const double& operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const double& at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t element_count(const Shape& shape);

/// Matrix product of a [m x k] and b [k x n], accumulated in double.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a^T * b without materializing the transpose.
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& a);
// Derivative of relu evaluated at the pre-activation; 0 at the kink.
Tensor relu_grad(const Tensor& pre);
Tensor tanh(const Tensor& a);
// Derivative of tanh evaluated at the pre-activation.
Tensor tanh_grad(const Tensor& pre);

// In-place y += alpha * x.
void axpy(double alpha, const Tensor& x, Tensor& y);

// Adds a length-n row vector to every row of an [m x n] matrix.
Tensor add_row(const Tensor& matrix, const Tensor& row);
// Column sums of an [m x n] matrix as a length-n vector.
Tensor sum_rows(const Tensor& matrix);

/// Root-mean-square of the elementwise difference.
double rmse(const Tensor& a, const Tensor& b);
double rmse(std::span<const double> a, std::span<const double> b);

// Throws ShapeError naming `op` unless the shapes are identical.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace pipesim
