#include "ceq/nn/model.hpp"

#include "ceq/rng.hpp"

namespace ceq::nn {

std::string to_string(ArchKind kind) { return kind == ArchKind::BILSTM ? "BILSTM" : "DEEP_CNN"; }

ArchKind parse_arch_kind(const std::string& name) {
  if (name == "BILSTM") return ArchKind::BILSTM;
  if (name == "DEEP_CNN" || name == "CNN") return ArchKind::DEEP_CNN;
  throw std::invalid_argument("unknown architecture: " + name);
}

void EqArch::validate() const {
  if (n_in_symbols < 1 || n_out_symbols < 1 || in_channels < 1 || out_filters < 1 || out_kernel < 1) {
    throw std::invalid_argument("EqArch: sizes must be positive");
  }
  if (n_out_symbols != n_in_symbols - out_kernel + 1) {
    throw std::invalid_argument("EqArch: n_out_symbols must equal n_in_symbols - out_kernel + 1");
  }
  if (kind == ArchKind::BILSTM && n_hidden < 1) throw std::invalid_argument("EqArch: n_hidden must be positive");
  if (kind == ArchKind::DEEP_CNN) {
    if (hidden_filters.empty() || hidden_kernel < 1) throw std::invalid_argument("EqArch: bad hidden layers");
    for (Index f : hidden_filters) {
      if (f < 1) throw std::invalid_argument("EqArch: hidden filters must be positive");
    }
  }
}

EqModel<double> build_model(const EqArch& arch, std::uint64_t init_seed) {
  EqModel<double> model(arch);
  auto gen = RngStream{init_seed, 0x4E4E}.engine();
  for (auto* t : model.parameters()) {
    const bool is_bias = t->shape.size() == 1;
    if (is_bias) continue;
    if (t->shape.size() == 3) {
      const Index c_out = t->shape[0], k = t->shape[1], c_in = t->shape[2];
      glorot_uniform(*t, k * c_in, k * c_out, gen);
    } else {
      glorot_uniform(*t, t->value.cols(), t->value.rows(), gen);
    }
  }
  if (arch.kind == ArchKind::BILSTM) {
    auto params = model.parameters();
    const Index h = arch.n_hidden;
    params[2]->value.middleRows(h, h).setOnes();
    params[5]->value.middleRows(h, h).setOnes();
  }
  return model;
}

}  // namespace ceq::nn
