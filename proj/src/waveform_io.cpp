#include "ceq/waveform_io.hpp"

#include "ceq/le_bytes.hpp"

#include <fstream>

namespace ceq::io {

namespace {
constexpr char kMagic[4] = {'C', 'E', 'Q', 'W'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void write_waveform(std::ostream& out, const DualPolWaveform& wave) {
  if (wave.x.size() != wave.y.size()) {
    throw std::invalid_argument("write_waveform: polarizations differ in length");
  }
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(wave.size()));
  put_le<double>(out, wave.symbol_rate);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(wave.sps.num));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(wave.sps.den));
  for (Index i = 0; i < wave.size(); ++i) {
    put_le<double>(out, wave.x(i).real());
    put_le<double>(out, wave.x(i).imag());
    put_le<double>(out, wave.y(i).real());
    put_le<double>(out, wave.y(i).imag());
  }
  if (!out) throw std::runtime_error("write_waveform: stream error");
}

DualPolWaveform read_waveform(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("read_waveform: bad magic, not a CEQW file");
  }
  if (get_le<std::uint32_t>(in) != kVersion) {
    throw std::runtime_error("read_waveform: unsupported version");
  }
  const auto n = get_le<std::uint64_t>(in);
  DualPolWaveform wave;
  wave.symbol_rate = get_le<double>(in);
  const auto num = get_le<std::uint32_t>(in);
  const auto den = get_le<std::uint32_t>(in);
  wave.sps = Rational(num, den);
  wave.x.resize(static_cast<Index>(n));
  wave.y.resize(static_cast<Index>(n));
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    const double xr = get_le<double>(in);
    const double xi = get_le<double>(in);
    const double yr = get_le<double>(in);
    const double yi = get_le<double>(in);
    wave.x(i) = {xr, xi};
    wave.y(i) = {yr, yi};
  }
  return wave;
}

void save_waveform(const std::filesystem::path& path, const DualPolWaveform& wave) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  write_waveform(out, wave);
}

DualPolWaveform load_waveform(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return read_waveform(in);
}

void save_symbols(const std::filesystem::path& path, const DualPolSymbols& symbols, double symbol_rate) {
  DualPolWaveform wave{symbols.x, symbols.y, symbol_rate, Rational(1, 1)};
  save_waveform(path, wave);
}

DualPolSymbols load_symbols(const std::filesystem::path& path) {
  auto wave = load_waveform(path);
  if (!(wave.sps == Rational(1, 1))) {
    throw std::runtime_error("load_symbols: file is not at 1 Sa/symbol: " + path.string());
  }
  return {std::move(wave.x), std::move(wave.y)};
}

}  // namespace ceq::io
