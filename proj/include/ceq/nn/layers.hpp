#pragma once

#include "ceq/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace ceq::nn {

enum class Padding { SameZero, Valid };

/// tanh through the vectorized exp: 1 - 2 / (exp(2x) + 1). Absolute error is
/// a few ulp of 1; saturates cleanly to +-1.
template <typename Derived>
auto tanh_fast(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return S(1) - S(2) / ((S(2) * x).exp() + S(1));
}

template <typename Derived>
auto sigmoid(const Eigen::ArrayBase<Derived>& x) {
  using S = typename Derived::Scalar;
  return S(1) / (S(1) + (-x).exp());
}

/// 1-D cross-correlation layer:
///   out[t, o] = bias[o] + sum_{k, c} kernel[o, k, c] * in[t + k - pad, c]
/// with pad = (K - 1) / 2 and zero fill for SameZero, pad = 0 for Valid.
/// The kernel is stored as a C_out x (K * C_in) matrix, column k * C_in + c.
template <typename Scalar>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(Index in_channels, Index out_channels, Index kernel, Padding padding)
      : weight({out_channels, kernel, in_channels}, out_channels, kernel * in_channels),
        bias({out_channels}, out_channels, 1),
        in_channels_(in_channels),
        kernel_(kernel),
        padding_(padding) {}

  Tensor<Scalar> weight;
  Tensor<Scalar> bias;

  Index in_channels() const { return in_channels_; }
  Index out_channels() const { return weight.value.rows(); }
  Index kernel() const { return kernel_; }
  Padding padding() const { return padding_; }
  Index pad() const { return padding_ == Padding::SameZero ? (kernel_ - 1) / 2 : 0; }
  Index output_steps(Index in_steps) const {
    return padding_ == Padding::SameZero ? in_steps : in_steps - kernel_ + 1;
  }

  SeqBatch<Scalar> forward(const SeqBatch<Scalar>& in) {
    if (in.channels() != in_channels_) throw std::invalid_argument("Conv1d: channel mismatch");
    const Index t_out = output_steps(in.steps);
    if (t_out < 1) throw std::invalid_argument("Conv1d: kernel longer than the input");
    in_ = in;
    SeqBatch<Scalar> out;
    out.steps = t_out;
    out.batch = in.batch;
    out.data.resize(out_channels(), t_out * in.batch);
    out.data.colwise() = bias.value.col(0);
    const Index b = in.batch;
    const Index c_out = out_channels();
    // In the time-major layout a shift by k steps is a shift by k * batch columns.
    if (stacked()) {
      // Narrow outputs: one GEMM for all taps, then shift-add.
      stack_weights();
      taps_.noalias() = stacked_w_ * in.data;
      for (Index k = 0; k < kernel_; ++k) {
        const auto [t0, n, src0] = overlap(k, t_out, in.steps);
        if (n > 0) out.data.middleCols(t0 * b, n * b) += taps_.block(k * c_out, src0 * b, c_out, n * b);
      }
      return out;
    }
    for (Index k = 0; k < kernel_; ++k) {
      const auto [t0, n, src0] = overlap(k, t_out, in.steps);
      if (n <= 0) continue;
      out.data.middleCols(t0 * b, n * b).noalias() +=
          weight.value.middleCols(k * in_channels_, in_channels_) * in.data.middleCols(src0 * b, n * b);
    }
    return out;
  }

  /// Accumulates parameter gradients and returns dLoss/dInput.
  SeqBatch<Scalar> backward(const SeqBatch<Scalar>& grad_out) {
    const Index b = in_.batch;
    bias.grad.col(0) += grad_out.data.rowwise().sum();
    SeqBatch<Scalar> grad_in;
    grad_in.steps = in_.steps;
    grad_in.batch = b;
    grad_in.data.setZero(in_channels_, in_.steps * b);
    if (stacked()) {
      const Index c_out = out_channels();
      taps_.setZero(kernel_ * c_out, in_.steps * b);
      for (Index k = 0; k < kernel_; ++k) {
        const auto [t0, n, src0] = overlap(k, grad_out.steps, in_.steps);
        if (n > 0) taps_.block(k * c_out, src0 * b, c_out, n * b) = grad_out.data.middleCols(t0 * b, n * b);
      }
      const Matrix<Scalar> dstack = taps_ * in_.data.transpose();
      for (Index k = 0; k < kernel_; ++k) {
        weight.grad.middleCols(k * in_channels_, in_channels_) += dstack.middleRows(k * c_out, c_out);
      }
      grad_in.data.noalias() = stacked_w_.transpose() * taps_;
      return grad_in;
    }
    for (Index k = 0; k < kernel_; ++k) {
      const auto [t0, n, src0] = overlap(k, grad_out.steps, in_.steps);
      if (n <= 0) continue;
      const auto g = grad_out.data.middleCols(t0 * b, n * b);
      const auto x = in_.data.middleCols(src0 * b, n * b);
      weight.grad.middleCols(k * in_channels_, in_channels_).noalias() += g * x.transpose();
      grad_in.data.middleCols(src0 * b, n * b).noalias() +=
          weight.value.middleCols(k * in_channels_, in_channels_).transpose() * g;
    }
    return grad_in;
  }

  template <typename To>
  Conv1d<To> cast() const {
    Conv1d<To> out(in_channels_, out_channels(), kernel_, padding_);
    out.weight = weight.template cast<To>();
    out.bias = bias.template cast<To>();
    return out;
  }

 private:
  Index in_channels_ = 0;
  Index kernel_ = 1;
  Padding padding_ = Padding::Valid;
  SeqBatch<Scalar> in_;
  Matrix<Scalar> stacked_w_;  // row k * C_out + o holds kernel[o, k, :]
  Matrix<Scalar> taps_;

  bool stacked() const { return out_channels() < in_channels_; }
  void stack_weights() {
    const Index c_out = out_channels();
    stacked_w_.resize(kernel_ * c_out, in_channels_);
    for (Index k = 0; k < kernel_; ++k) {
      stacked_w_.middleRows(k * c_out, c_out) = weight.value.middleCols(k * in_channels_, in_channels_);
    }
  }

  struct Span {
    Index t0, n, src0;
  };
  /// Output steps [t0, t0 + n) that read input steps [src0, src0 + n) through tap k.
  Span overlap(Index k, Index t_out, Index t_in) const {
    const Index shift = k - pad();
    const Index t0 = std::max<Index>(0, -shift);
    const Index t1 = std::min(t_out, t_in - shift);
    return {t0, t1 - t0, t0 + shift};
  }
};

/// Elementwise tanh with cached output.
template <typename Scalar>
class TanhLayer {
 public:
  SeqBatch<Scalar> forward(const SeqBatch<Scalar>& in) {
    out_ = in;
    out_.data = tanh_fast(in.data.array()).matrix();
    return out_;
  }
  SeqBatch<Scalar> backward(const SeqBatch<Scalar>& grad_out) const {
    SeqBatch<Scalar> g = grad_out;
    g.data.array() *= (Scalar(1) - out_.data.array().square());
    return g;
  }

 private:
  SeqBatch<Scalar> out_;
};

/// One direction of an LSTM layer. Gate rows are ordered (i, f, g, o):
///   i, f, o = sigmoid, g = tanh, c_t = f*c_{t-1} + i*g, h_t = o*tanh(c_t)
/// with zero initial state. A reversed direction walks time from T-1 to 0.
template <typename Scalar>
class LstmDirection {
 public:
  LstmDirection() = default;
  LstmDirection(Index in_channels, Index hidden, bool reversed)
      : W({4 * hidden, in_channels}, 4 * hidden, in_channels),
        U({4 * hidden, hidden}, 4 * hidden, hidden),
        b({4 * hidden}, 4 * hidden, 1),
        hidden_(hidden),
        reversed_(reversed) {}

  Tensor<Scalar> W;
  Tensor<Scalar> U;
  Tensor<Scalar> b;

  Index hidden() const { return hidden_; }
  bool reversed() const { return reversed_; }

  /// Returns h for every step, [H x T*B] in natural time order.
  const Matrix<Scalar>& forward(const SeqBatch<Scalar>& in) {
    const Index h = hidden_;
    const Index steps = in.steps;
    const Index bsz = in.batch;
    in_ = in;
    gates_.noalias() = W.value * in.data;
    gates_.colwise() += b.value.col(0);
    c_.resize(h, steps * bsz);
    tc_.resize(h, steps * bsz);
    h_.resize(h, steps * bsz);
    Matrix<Scalar> z(4 * h, bsz);
    for (Index s = 0; s < steps; ++s) {
      const Index t = time_at(s, steps);
      z = gates_.middleCols(t * bsz, bsz);
      if (s > 0) z.noalias() += U.value * h_.middleCols(time_at(s - 1, steps) * bsz, bsz);
      auto gate = gates_.middleCols(t * bsz, bsz);
      gate.topRows(2 * h).array() = sigmoid(z.topRows(2 * h).array());
      gate.middleRows(2 * h, h).array() = tanh_fast(z.middleRows(2 * h, h).array());
      gate.bottomRows(h).array() = sigmoid(z.bottomRows(h).array());
      auto c = c_.middleCols(t * bsz, bsz);
      c = gate.topRows(h).cwiseProduct(gate.middleRows(2 * h, h));
      if (s > 0) c += gate.middleRows(h, h).cwiseProduct(c_.middleCols(time_at(s - 1, steps) * bsz, bsz));
      tc_.middleCols(t * bsz, bsz).array() = tanh_fast(c.array());
      h_.middleCols(t * bsz, bsz) = gate.bottomRows(h).cwiseProduct(tc_.middleCols(t * bsz, bsz));
    }
    return h_;
  }

  /// BPTT. grad_h is dLoss/dh in natural time order; returns dLoss/dInput.
  Matrix<Scalar> backward(const Matrix<Scalar>& grad_h) {
    const Index h = hidden_;
    const Index steps = in_.steps;
    const Index bsz = in_.batch;
    Matrix<Scalar> dz(4 * h, steps * bsz);
    Matrix<Scalar> h_prev = Matrix<Scalar>::Zero(h, steps * bsz);
    Matrix<Scalar> dh_next = Matrix<Scalar>::Zero(h, bsz);
    Matrix<Scalar> dc_next = Matrix<Scalar>::Zero(h, bsz);
    Matrix<Scalar> dh(h, bsz), dc(h, bsz);
    for (Index s = steps - 1; s >= 0; --s) {
      const Index t = time_at(s, steps);
      const auto gate = gates_.middleCols(t * bsz, bsz);
      const auto i = gate.topRows(h).array();
      const auto f = gate.middleRows(h, h).array();
      const auto g = gate.middleRows(2 * h, h).array();
      const auto o = gate.bottomRows(h).array();
      const auto tc = tc_.middleCols(t * bsz, bsz).array();
      dh = grad_h.middleCols(t * bsz, bsz) + dh_next;
      dc.array() = dh.array() * o * (Scalar(1) - tc.square()) + dc_next.array();
      auto d = dz.middleCols(t * bsz, bsz);
      d.topRows(h).array() = dc.array() * g * i * (Scalar(1) - i);
      if (s > 0) {
        const Index tp = time_at(s - 1, steps);
        d.middleRows(h, h).array() = dc.array() * c_.middleCols(tp * bsz, bsz).array() * f * (Scalar(1) - f);
        h_prev.middleCols(t * bsz, bsz) = h_.middleCols(tp * bsz, bsz);
      } else {
        d.middleRows(h, h).setZero();
      }
      d.middleRows(2 * h, h).array() = dc.array() * i * (Scalar(1) - g.square());
      d.bottomRows(h).array() = dh.array() * tc * o * (Scalar(1) - o);
      dc_next.array() = dc.array() * f;
      dh_next.noalias() = U.value.transpose() * d;
    }
    W.grad.noalias() += dz * in_.data.transpose();
    U.grad.noalias() += dz * h_prev.transpose();
    b.grad.col(0) += dz.rowwise().sum();
    return W.value.transpose() * dz;
  }

  template <typename To>
  LstmDirection<To> cast() const {
    LstmDirection<To> out(W.value.cols(), hidden_, reversed_);
    out.W = W.template cast<To>();
    out.U = U.template cast<To>();
    out.b = b.template cast<To>();
    return out;
  }

 private:
  Index time_at(Index s, Index steps) const { return reversed_ ? steps - 1 - s : s; }


  Index hidden_ = 0;
  bool reversed_ = false;
  SeqBatch<Scalar> in_;
  Matrix<Scalar> gates_;  // activated gates (i, f, g, o)
  Matrix<Scalar> c_;
  Matrix<Scalar> tc_;
  Matrix<Scalar> h_;
};

/// Bidirectional LSTM; per step the output is [h_forward; h_backward].
template <typename Scalar>
class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(Index in_channels, Index hidden) : fwd(in_channels, hidden, false), bwd(in_channels, hidden, true) {}

  LstmDirection<Scalar> fwd;
  LstmDirection<Scalar> bwd;

  Index hidden() const { return fwd.hidden(); }

  SeqBatch<Scalar> forward(const SeqBatch<Scalar>& in) {
    SeqBatch<Scalar> out;
    out.steps = in.steps;
    out.batch = in.batch;
    out.data.resize(2 * hidden(), in.data.cols());
    out.data.topRows(hidden()) = fwd.forward(in);
    out.data.bottomRows(hidden()) = bwd.forward(in);
    return out;
  }

  SeqBatch<Scalar> backward(const SeqBatch<Scalar>& grad_out) {
    SeqBatch<Scalar> grad_in;
    grad_in.steps = grad_out.steps;
    grad_in.batch = grad_out.batch;
    grad_in.data = fwd.backward(grad_out.data.topRows(hidden()));
    grad_in.data += bwd.backward(grad_out.data.bottomRows(hidden()));
    return grad_in;
  }

  template <typename To>
  BiLstm<To> cast() const {
    BiLstm<To> out;
    out.fwd = fwd.template cast<To>();
    out.bwd = bwd.template cast<To>();
    return out;
  }
};

/// Mean squared error over all elements; returns the loss and writes dLoss/dPred.
template <typename Scalar>
Scalar mse_loss(const Matrix<Scalar>& pred, const Matrix<Scalar>& target, Matrix<Scalar>* grad = nullptr) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw std::invalid_argument("mse_loss: shape mismatch");
  }
  const Matrix<Scalar> diff = pred - target;
  const auto n = static_cast<Scalar>(diff.size());
  if (grad != nullptr) *grad = (Scalar(2) / n) * diff;
  return diff.squaredNorm() / n;
}

/// Bias-corrected Adam.
template <typename Scalar>
struct AdamState {
  std::vector<Matrix<Scalar>> m;
  std::vector<Matrix<Scalar>> v;
  long step = 0;
};

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
void adam_step(const std::vector<Tensor<Scalar>*>& params, AdamState<Scalar>& state, const AdamConfig& cfg) {
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state/parameter mismatch");
  for (const auto* p : params) {
    if (!p->grad.allFinite()) throw std::domain_error("adam_step: non-finite gradient");
  }
  state.step += 1;
  const auto b1 = static_cast<Scalar>(cfg.beta1);
  const auto b2 = static_cast<Scalar>(cfg.beta2);
  const Scalar corr1 = Scalar(1) - static_cast<Scalar>(std::pow(cfg.beta1, static_cast<double>(state.step)));
  const Scalar corr2 = Scalar(1) - static_cast<Scalar>(std::pow(cfg.beta2, static_cast<double>(state.step)));
  const auto lr = static_cast<Scalar>(cfg.lr);
  const auto eps = static_cast<Scalar>(cfg.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = params[i]->grad;
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
    params[i]->value.array() -= lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + eps);
  }
}

/// Glorot/Xavier uniform fill, limit sqrt(6 / (fan_in + fan_out)).
template <typename Scalar>
void glorot_uniform(Tensor<Scalar>& t, Index fan_in, Index fan_out, std::mt19937_64& gen) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Index j = 0; j < t.value.cols(); ++j) {
    for (Index i = 0; i < t.value.rows(); ++i) t.value(i, j) = static_cast<Scalar>(dist(gen));
  }
}

}  // namespace ceq::nn
