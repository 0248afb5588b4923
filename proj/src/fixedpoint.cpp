#include "ceq/fixedpoint.hpp"

#include "ceq/le_bytes.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace ceq::fx {

namespace {

constexpr char kMagic[4] = {'C', 'E', 'Q', 'N'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxRank = 8;

void check_fraction_bits(int fb) {
  if (fb < 0 || fb > 31) throw std::invalid_argument("fraction_bits must be in [0, 31]");
}

}  // namespace

std::int32_t quantize_value(double w, int fraction_bits, bool* clipped) {
  check_fraction_bits(fraction_bits);
  if (!std::isfinite(w)) throw std::domain_error("quantize_value: non-finite weight");
  const double scaled = std::ldexp(w, fraction_bits);
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double r = std::nearbyint(scaled);
  std::fesetround(saved);
  constexpr double lo = std::numeric_limits<std::int32_t>::min();
  constexpr double hi = std::numeric_limits<std::int32_t>::max();
  const bool clip = r < lo || r > hi;
  if (clipped != nullptr) *clipped = clip;
  return static_cast<std::int32_t>(std::clamp(r, lo, hi));
}

double dequantize_value(std::int32_t v, int fraction_bits) {
  check_fraction_bits(fraction_bits);
  return std::ldexp(static_cast<double>(v), -fraction_bits);
}

QuantizedModelBlob quantize_weights(const nn::EqModel<double>& model, int fraction_bits) {
  check_fraction_bits(fraction_bits);
  QuantizedModelBlob blob;
  blob.arch = model.arch().kind;
  const auto params = model.parameters();
  for (std::size_t ti = 0; ti < params.size(); ++ti) {
    const auto& t = *params[ti];
    QuantizedTensor q;
    for (Index d : t.shape) q.dims.push_back(static_cast<std::uint32_t>(d));
    q.fraction_bits = static_cast<std::uint32_t>(fraction_bits);
    q.values.reserve(static_cast<std::size_t>(t.size()));
    for (Index i = 0; i < t.value.rows(); ++i) {
      for (Index j = 0; j < t.value.cols(); ++j) {
        bool clipped = false;
        q.values.push_back(quantize_value(t.value(i, j), fraction_bits, &clipped));
        if (clipped) {
          blob.warnings.push_back("tensor " + std::to_string(ti) + " element (" + std::to_string(i) + ", " +
                                  std::to_string(j) + ") saturated: " + std::to_string(t.value(i, j)));
        }
      }
    }
    blob.tensors.push_back(std::move(q));
  }
  return blob;
}

namespace {

nn::EqArch infer_arch(const QuantizedModelBlob& blob) {
  const auto& ts = blob.tensors;
  auto dim = [&](std::size_t t, std::size_t d) -> Index {
    if (t >= ts.size() || d >= ts[t].dims.size()) throw std::runtime_error("dequantize: blob does not match its architecture");
    return static_cast<Index>(ts[t].dims[d]);
  };
  nn::EqArch arch;
  arch.kind = blob.arch;
  if (blob.arch == nn::ArchKind::BILSTM) {
    if (ts.size() != 8) throw std::runtime_error("dequantize: a BILSTM blob holds 8 tensors");
    arch.n_hidden = dim(0, 0) / 4;
    arch.in_channels = dim(0, 1);
  } else {
    if (ts.size() < 4 || ts.size() % 2 != 0) throw std::runtime_error("dequantize: bad DEEP_CNN tensor count");
    arch.in_channels = dim(0, 2);
    arch.hidden_kernel = dim(0, 1);
    arch.hidden_filters.clear();
    for (std::size_t t = 0; t + 2 < ts.size(); t += 2) arch.hidden_filters.push_back(dim(t, 0));
  }
  arch.out_filters = dim(ts.size() - 2, 0);
  arch.out_kernel = dim(ts.size() - 2, 1);
  arch.n_out_symbols = arch.n_in_symbols - arch.out_kernel + 1;
  return arch;
}

}  // namespace

nn::EqModel<double> dequantize(const QuantizedModelBlob& blob) { return dequantize(blob, infer_arch(blob)); }

nn::EqModel<double> dequantize(const QuantizedModelBlob& blob, const nn::EqArch& arch) {
  if (arch.kind != blob.arch) throw std::runtime_error("dequantize: architecture mismatch");
  nn::EqModel<double> model(arch);
  auto params = model.parameters();
  if (params.size() != blob.tensors.size()) throw std::runtime_error("dequantize: tensor count mismatch");
  for (std::size_t ti = 0; ti < params.size(); ++ti) {
    auto& t = *params[ti];
    const auto& q = blob.tensors[ti];
    if (q.dims.size() != t.shape.size()) throw std::runtime_error("dequantize: tensor rank mismatch");
    for (std::size_t d = 0; d < q.dims.size(); ++d) {
      if (static_cast<Index>(q.dims[d]) != t.shape[d]) throw std::runtime_error("dequantize: tensor shape mismatch");
    }
    if (static_cast<Index>(q.values.size()) != t.size()) throw std::runtime_error("dequantize: value count mismatch");
    const int fb = static_cast<int>(q.fraction_bits);
    std::size_t k = 0;
    for (Index i = 0; i < t.value.rows(); ++i) {
      for (Index j = 0; j < t.value.cols(); ++j) t.value(i, j) = dequantize_value(q.values[k++], fb);
    }
  }
  return model;
}

void write_blob(std::ostream& out, const QuantizedModelBlob& blob) {
  out.write(kMagic, 4);
  io::put_le<std::uint32_t>(out, kVersion);
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(blob.arch));
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(blob.tensors.size()));
  for (const auto& t : blob.tensors) {
    io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) io::put_le<std::uint32_t>(out, d);
    io::put_le<std::uint32_t>(out, t.fraction_bits);
    for (auto v : t.values) io::put_le<std::int32_t>(out, v);
  }
  if (!out) throw std::runtime_error("write_blob: stream error");
}

QuantizedModelBlob read_blob(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("read_blob: bad magic, not a CEQN file");
  if (io::get_le<std::uint32_t>(in) != kVersion) throw std::runtime_error("read_blob: unsupported version");
  QuantizedModelBlob blob;
  const auto arch = io::get_le<std::uint32_t>(in);
  if (arch != static_cast<std::uint32_t>(nn::ArchKind::BILSTM) && arch != static_cast<std::uint32_t>(nn::ArchKind::DEEP_CNN)) {
    throw std::runtime_error("read_blob: unknown architecture id");
  }
  blob.arch = static_cast<nn::ArchKind>(arch);
  const auto count = io::get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    QuantizedTensor t;
    const auto rank = io::get_le<std::uint32_t>(in);
    if (rank == 0 || rank > kMaxRank) throw std::runtime_error("read_blob: bad tensor rank");
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.dims.push_back(io::get_le<std::uint32_t>(in));
      n *= t.dims.back();
      if (n > (std::uint64_t{1} << 26)) throw std::runtime_error("read_blob: tensor too large");
    }
    t.fraction_bits = io::get_le<std::uint32_t>(in);
    if (t.fraction_bits > 31) throw std::runtime_error("read_blob: bad fraction_bits");
    t.values.resize(static_cast<std::size_t>(n));
    for (auto& v : t.values) v = io::get_le<std::int32_t>(in);
    blob.tensors.push_back(std::move(t));
  }
  return blob;
}

void save_blob(const std::filesystem::path& path, const QuantizedModelBlob& blob) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  write_blob(out, blob);
}

QuantizedModelBlob load_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return read_blob(in);
}

double quantization_penalty(const nn::EqModel<double>& model, const QuantizedModelBlob& blob,
                            const nn::EqDataset& eval) {
  const auto a = nn::validate_model(model, eval);
  const auto b = nn::validate_model(dequantize(blob, model.arch()), eval);
  if (a.ber == b.ber) return 0.0;
  return modem::q_factor_db_or_inf(a.ber) - modem::q_factor_db_or_inf(b.ber);
}

}  // namespace ceq::fx
