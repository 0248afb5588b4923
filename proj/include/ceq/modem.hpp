#pragma once

#include "ceq/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ceq::modem {

using Bits = std::vector<std::uint8_t>;

/// `n` bits from the standard MT19937 stream; each 32-bit draw contributes
/// its bits MSB first.
Bits mt19937_bits(std::uint32_t seed, std::size_t n);

/// Gray-coded 16QAM: I from (b0,b1), Q from (b2,b3), 00->-3, 01->-1,
/// 11->+1, 10->+3, scaled by 1/sqrt(10).
CVec map_16qam(std::span<const std::uint8_t> bits);

/// Nearest-point hard decision; a sample exactly on a threshold goes to the
/// lower-amplitude level (0 itself decides +1).
Bits demap_16qam_hard(const CVec& symbols);

/// Fraction of differing bits.
double ber(std::span<const std::uint8_t> rx_bits, std::span<const std::uint8_t> tx_bits);

/// Inverse complementary error function, y in (0, 2).
double erfc_inv(double y);

/// 20 log10(sqrt(2) erfcinv(2 ber)); throws std::domain_error outside (0, 0.5).
double q_factor_db(double ber);

/// sqrt(mean|rx - ref|^2 / mean|ref|^2).
double evm(const CVec& rx, const CVec& ref);

struct SymbolFrame {
  Bits bits_x;
  Bits bits_y;
  DualPolSymbols tx;
  std::uint32_t seed = 0;
  Index n_symbols = 0;
};

/// Draws 8n bits from one MT19937 stream (first 4n to X, next 4n to Y) and maps them.
SymbolFrame make_frame(std::uint32_t seed, Index n_symbols);

/// Frame reconstructed from known transmitted symbols (bits recovered by exact demapping).
SymbolFrame frame_from_symbols(const DualPolSymbols& tx, std::uint32_t seed = 0);

enum class EqualizerId { CDC, DBP, CNN, BILSTM };

std::string_view to_string(EqualizerId id);
EqualizerId parse_equalizer(std::string_view name);

struct Metrics {
  double ber = 0.0;  // averaged over both polarizations
  double q_db = 0.0;
  double evm = 0.0;  // over both polarizations jointly
  Index n_symbols = 0;
};

/// BER per polarization averaged, Q from the averaged BER. A BER of exactly
/// 0 yields q_db = +inf.
Metrics measure(const DualPolSymbols& rx, const SymbolFrame& tx);

/// Q in dB from BER, +inf when ber == 0, throws when ber >= 0.5.
double q_factor_db_or_inf(double ber);

struct QReport {
  EqualizerId equalizer = EqualizerId::CDC;
  double power_dbm = 0.0;
  double ber = 0.0;
  double q_db = 0.0;
  double evm = 0.0;
  Index n_symbols = 0;
};

/// CSV with header `equalizer,power_dbm,ber,q_db,evm,n_symbols`, rows in the order given.
void write_qreport_csv(std::ostream& out, const std::vector<QReport>& rows);
std::vector<QReport> read_qreport_csv(std::istream& in);

/// Sorts by (equalizer, power).
void sort_reports(std::vector<QReport>& rows);

}  // namespace ceq::modem
