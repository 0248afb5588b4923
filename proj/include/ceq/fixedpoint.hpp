#pragma once

#include "ceq/nn/train.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ceq::fx {

struct QuantizedTensor {
  std::vector<std::uint32_t> dims;  // logical shape, values stored row-major
  std::uint32_t fraction_bits = 24;
  std::vector<std::int32_t> values;
};

/// int32 fixed-point weights of one model: w = v / 2^fraction_bits.
struct QuantizedModelBlob {
  nn::ArchKind arch = nn::ArchKind::BILSTM;
  std::vector<QuantizedTensor> tensors;
  std::vector<std::string> warnings;  // saturated weights; never serialized

  friend bool operator==(const QuantizedModelBlob& a, const QuantizedModelBlob& b) {
    if (a.arch != b.arch || a.tensors.size() != b.tensors.size()) return false;
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
      const auto &x = a.tensors[i], &y = b.tensors[i];
      if (x.dims != y.dims || x.fraction_bits != y.fraction_bits || x.values != y.values) return false;
    }
    return true;
  }
};

constexpr int kDefaultFractionBits = 24;

/// round-half-to-even(w * 2^fb). Out-of-range values saturate and set *clipped.
/// Throws std::domain_error for non-finite w.
std::int32_t quantize_value(double w, int fraction_bits, bool* clipped = nullptr);
double dequantize_value(std::int32_t v, int fraction_bits);

QuantizedModelBlob quantize_weights(const nn::EqModel<double>& model, int fraction_bits = kDefaultFractionBits);

/// Rebuilds a model; the architecture is inferred from the tensor shapes
/// (window length 81 unless `arch` is given, in which case shapes are checked).
nn::EqModel<double> dequantize(const QuantizedModelBlob& blob);
nn::EqModel<double> dequantize(const QuantizedModelBlob& blob, const nn::EqArch& arch);

/// "CEQN" v1, all fields little-endian.
void write_blob(std::ostream& out, const QuantizedModelBlob& blob);
QuantizedModelBlob read_blob(std::istream& in);
void save_blob(const std::filesystem::path& path, const QuantizedModelBlob& blob);
QuantizedModelBlob load_blob(const std::filesystem::path& path);

/// Q(model) - Q(dequantize(blob)) in dB on the evaluation set.
double quantization_penalty(const nn::EqModel<double>& model, const QuantizedModelBlob& blob,
                            const nn::EqDataset& eval);

}  // namespace ceq::fx
