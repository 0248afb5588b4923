#pragma once

#include "ceq/types.hpp"

#include <filesystem>
#include <iosfwd>

namespace ceq::io {

/// CEQW1 layout, all little-endian: "CEQW", u32 version (1), u64 n_samples,
/// f64 symbol_rate, u32 sps_num, u32 sps_den, then n_samples records of
/// f64 (xRe, xIm, yRe, yIm).
void write_waveform(std::ostream& out, const DualPolWaveform& wave);
DualPolWaveform read_waveform(std::istream& in);

void save_waveform(const std::filesystem::path& path, const DualPolWaveform& wave);
DualPolWaveform load_waveform(const std::filesystem::path& path);

/// Symbols at 1 Sa/symbol stored as a CEQW1 file with sps = 1/1.
void save_symbols(const std::filesystem::path& path, const DualPolSymbols& symbols, double symbol_rate);
DualPolSymbols load_symbols(const std::filesystem::path& path);

}  // namespace ceq::io
