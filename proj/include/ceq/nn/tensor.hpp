#pragma once

#include "ceq/types.hpp"

#include <functional>
#include <numeric>
#include <vector>

namespace ceq::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// A trainable tensor. `value` is laid out as the matrix its layer multiplies
/// with; `shape` records the logical dimensions (product(shape) == value.size()).
template <typename Scalar>
struct Tensor {
  std::vector<Index> shape;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Tensor() = default;
  Tensor(std::vector<Index> logical_shape, Index rows, Index cols)
      : shape(std::move(logical_shape)), value(Matrix<Scalar>::Zero(rows, cols)), grad(Matrix<Scalar>::Zero(rows, cols)) {
    if (element_count() != rows * cols) {
      throw std::invalid_argument("Tensor: logical shape does not match storage");
    }
  }

  Index element_count() const {
    return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
  }
  Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }

  template <typename To>
  Tensor<To> cast() const {
    Tensor<To> out;
    out.shape = shape;
    out.value = value.template cast<To>();
    out.grad = Matrix<To>::Zero(value.rows(), value.cols());
    return out;
  }
};

/// A batch of equal-length sequences, time-major: column t * batch + b holds
/// the channel vector of sequence b at step t.
template <typename Scalar>
struct SeqBatch {
  Matrix<Scalar> data;
  Index steps = 0;
  Index batch = 0;

  Index channels() const { return data.rows(); }
  auto step(Index t) { return data.middleCols(t * batch, batch); }
  auto step(Index t) const { return data.middleCols(t * batch, batch); }
};

}  // namespace ceq::nn
