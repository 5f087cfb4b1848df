#include "repcount/autodiff/tensor.hpp"

#include <utility>

#include "repcount/error.hpp"

namespace repcount::ad {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("Tensor: data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(shape_));
  }
}

Tensor Tensor::from_matrix(const Matrix& m) { return Tensor({m.rows(), m.cols()}, m.storage()); }

Matrix Tensor::to_matrix() const {
  if (rank() != 2) throw ShapeError("Tensor::to_matrix: rank-2 tensor required, got " + shape_string(shape_));
  return Matrix(shape_[0], shape_[1], data_);
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("Tensor::item: tensor of shape " + shape_string(shape_) + " is not a scalar");
  return data_[0];
}

}  // namespace repcount::ad
