#pragma once

#include "ceq/nn/layers.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ceq::nn {

enum class ArchKind : std::uint32_t { BILSTM = 1, DEEP_CNN = 2 };

std::string to_string(ArchKind kind);
ArchKind parse_arch_kind(const std::string& name);

struct EqArch {
  ArchKind kind = ArchKind::BILSTM;
  Index n_in_symbols = 81;
  Index n_out_symbols = 61;
  Index n_hidden = 35;
  std::vector<Index> hidden_filters{35, 35};
  Index hidden_kernel = 21;
  Index out_filters = 2;
  Index out_kernel = 21;
  Index in_channels = 4;

  static EqArch bilstm() { return EqArch{}; }
  static EqArch deep_cnn() {
    EqArch a;
    a.kind = ArchKind::DEEP_CNN;
    return a;
  }

  /// First recovered symbol within a window.
  Index target_offset() const { return (out_kernel - 1) / 2; }
  void validate() const;
};

/// biLSTM -> valid conv, or same-padded tanh convs -> valid conv.
template <typename Scalar>
class EqModel {
 public:
  EqModel() = default;
  explicit EqModel(const EqArch& arch) : arch_(arch) {
    arch.validate();
    Index c = arch.in_channels;
    if (arch.kind == ArchKind::BILSTM) {
      lstm_.emplace(c, arch.n_hidden);
      c = 2 * arch.n_hidden;
    } else {
      for (Index f : arch.hidden_filters) {
        hidden_.emplace_back(c, f, arch.hidden_kernel, Padding::SameZero);
        c = f;
      }
      tanh_.resize(hidden_.size());
    }
    out_ = Conv1d<Scalar>(c, arch.out_filters, arch.out_kernel, Padding::Valid);
  }

  const EqArch& arch() const { return arch_; }

  SeqBatch<Scalar> forward(const SeqBatch<Scalar>& in) {
    if (in.steps != arch_.n_in_symbols) throw std::invalid_argument("EqModel: wrong window length");
    SeqBatch<Scalar> h;
    if (lstm_) {
      h = lstm_->forward(in);
    } else {
      h = in;
      for (std::size_t l = 0; l < hidden_.size(); ++l) h = tanh_[l].forward(hidden_[l].forward(h));
    }
    return out_.forward(h);
  }

  /// Accumulates parameter gradients and returns dLoss/dInput.
  SeqBatch<Scalar> backward(const SeqBatch<Scalar>& grad_out) {
    SeqBatch<Scalar> g = out_.backward(grad_out);
    if (lstm_) return lstm_->backward(g);
    for (std::size_t l = hidden_.size(); l-- > 0;) g = hidden_[l].backward(tanh_[l].backward(g));
    return g;
  }

  /// Fixed order: LSTM (fwd W, U, b, bwd W, U, b) or hidden convs (W, b), then output conv (W, b).
  std::vector<Tensor<Scalar>*> parameters() {
    std::vector<Tensor<Scalar>*> p;
    if (lstm_) {
      for (auto* d : {&lstm_->fwd, &lstm_->bwd}) {
        p.push_back(&d->W);
        p.push_back(&d->U);
        p.push_back(&d->b);
      }
    }
    for (auto& conv : hidden_) {
      p.push_back(&conv.weight);
      p.push_back(&conv.bias);
    }
    p.push_back(&out_.weight);
    p.push_back(&out_.bias);
    return p;
  }

  std::vector<const Tensor<Scalar>*> parameters() const {
    auto mut = const_cast<EqModel*>(this)->parameters();
    return {mut.begin(), mut.end()};
  }

  Index parameter_count() const {
    Index n = 0;
    for (const auto* t : parameters()) n += t->size();
    return n;
  }

  void zero_grad() {
    for (auto* t : parameters()) t->zero_grad();
  }

  /// Same architecture, parameters converted to another scalar type.
  template <typename To>
  EqModel<To> cast() const {
    EqModel<To> out(arch_);
    auto dst = out.parameters();
    auto src = parameters();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<To>();
    return out;
  }

 private:
  EqArch arch_;
  std::optional<BiLstm<Scalar>> lstm_;
  std::vector<Conv1d<Scalar>> hidden_;
  std::vector<TanhLayer<Scalar>> tanh_;
  Conv1d<Scalar> out_;
};

/// Glorot-uniform weights, zero biases except an LSTM forget-gate bias of 1.
EqModel<double> build_model(const EqArch& arch, std::uint64_t init_seed);

}  // namespace ceq::nn
