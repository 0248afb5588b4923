#include "ceq/modem.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

namespace ceq::modem {

namespace {

const double kInvSqrt10 = 1.0 / std::sqrt(10.0);

double level_from_bits(std::uint8_t hi, std::uint8_t lo) {
  // Gray: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3
  if (hi == 0) return lo == 0 ? -3.0 : -1.0;
  return lo == 1 ? 1.0 : 3.0;
}

void bits_from_component(double v, std::uint8_t& hi, std::uint8_t& lo) {
  const double t = 2.0 / std::sqrt(10.0);
  if (v < -t) {
    hi = 0, lo = 0;
  } else if (v < 0.0) {
    hi = 0, lo = 1;
  } else if (v <= t) {
    hi = 1, lo = 1;
  } else {
    hi = 1, lo = 0;
  }
}

}  // namespace

Bits mt19937_bits(std::uint32_t seed, std::size_t n) {
  Bits bits(n);
  std::mt19937 gen(seed);
  std::size_t i = 0;
  while (i < n) {
    const std::uint32_t word = static_cast<std::uint32_t>(gen());
    for (int b = 31; b >= 0 && i < n; --b, ++i) {
      bits[i] = static_cast<std::uint8_t>((word >> b) & 1u);
    }
  }
  return bits;
}

CVec map_16qam(std::span<const std::uint8_t> bits) {
  if (bits.size() % 4 != 0) {
    throw std::invalid_argument("map_16qam: bit count not divisible by 4");
  }
  const auto n = static_cast<Index>(bits.size() / 4);
  CVec out(n);
  for (Index k = 0; k < n; ++k) {
    const auto* b = &bits[static_cast<std::size_t>(4 * k)];
    out(k) = Complex(level_from_bits(b[0], b[1]), level_from_bits(b[2], b[3])) * kInvSqrt10;
  }
  return out;
}

Bits demap_16qam_hard(const CVec& symbols) {
  Bits bits(static_cast<std::size_t>(symbols.size()) * 4);
  for (Index k = 0; k < symbols.size(); ++k) {
    auto* b = &bits[static_cast<std::size_t>(4 * k)];
    bits_from_component(symbols(k).real(), b[0], b[1]);
    bits_from_component(symbols(k).imag(), b[2], b[3]);
  }
  return bits;
}

double ber(std::span<const std::uint8_t> rx_bits, std::span<const std::uint8_t> tx_bits) {
  if (rx_bits.size() != tx_bits.size() || rx_bits.empty()) {
    throw std::invalid_argument("ber: bit sequences must be non-empty and of equal length");
  }
  std::size_t errors = 0;
  for (std::size_t i = 0; i < rx_bits.size(); ++i) {
    errors += (rx_bits[i] != tx_bits[i]) ? 1 : 0;
  }
  return static_cast<double>(errors) / static_cast<double>(rx_bits.size());
}

double erfc_inv(double y) {
  if (!(y > 0.0 && y < 2.0)) {
    throw std::domain_error("erfc_inv: argument outside (0, 2)");
  }
  if (y == 1.0) return 0.0;
  const double p = y < 1.0 ? y : 2.0 - y;
  // Rational starting point, then Newton on erfc(x) - p.
  const double t = std::sqrt(-2.0 * std::log(p / 2.0));
  double x = -0.70711 * ((2.30753 + t * 0.27061) / (1.0 + t * (0.99229 + t * 0.04481)) - t);
  const double two_over_sqrt_pi = 2.0 / std::sqrt(std::numbers::pi);
  for (int iter = 0; iter < 60; ++iter) {
    const double err = std::erfc(x) - p;
    const double step = err / (two_over_sqrt_pi * std::exp(-x * x));
    x += step;
    if (std::abs(step) <= 1e-15 * std::max(1.0, std::abs(x))) break;
  }
  return y < 1.0 ? x : -x;
}

double q_factor_db(double ber) {
  if (!(ber > 0.0 && ber < 0.5)) {
    throw std::domain_error("q_factor_db: ber outside (0, 0.5)");
  }
  return 20.0 * std::log10(std::sqrt(2.0) * erfc_inv(2.0 * ber));
}

double q_factor_db_or_inf(double ber) {
  if (ber == 0.0) return std::numeric_limits<double>::infinity();
  return q_factor_db(ber);
}

double evm(const CVec& rx, const CVec& ref) {
  if (rx.size() != ref.size()) {
    throw std::invalid_argument("evm: length mismatch");
  }
  const double ref_power = ref.squaredNorm();
  if (ref_power == 0.0) {
    throw std::invalid_argument("evm: reference is all zero");
  }
  return std::sqrt((rx - ref).squaredNorm() / ref_power);
}

SymbolFrame make_frame(std::uint32_t seed, Index n_symbols) {
  SymbolFrame frame;
  frame.seed = seed;
  frame.n_symbols = n_symbols;
  const auto n_bits = static_cast<std::size_t>(4 * n_symbols);
  Bits all = mt19937_bits(seed, 2 * n_bits);
  frame.bits_x.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_bits));
  frame.bits_y.assign(all.begin() + static_cast<std::ptrdiff_t>(n_bits), all.end());
  frame.tx.x = map_16qam(frame.bits_x);
  frame.tx.y = map_16qam(frame.bits_y);
  return frame;
}

SymbolFrame frame_from_symbols(const DualPolSymbols& tx, std::uint32_t seed) {
  SymbolFrame frame;
  frame.seed = seed;
  frame.n_symbols = tx.size();
  frame.tx = tx;
  frame.bits_x = demap_16qam_hard(tx.x);
  frame.bits_y = demap_16qam_hard(tx.y);
  return frame;
}

std::string_view to_string(EqualizerId id) {
  switch (id) {
    case EqualizerId::CDC: return "CDC";
    case EqualizerId::DBP: return "DBP";
    case EqualizerId::CNN: return "CNN";
    case EqualizerId::BILSTM: return "BILSTM";
  }
  return "?";
}

EqualizerId parse_equalizer(std::string_view name) {
  for (auto id : {EqualizerId::CDC, EqualizerId::DBP, EqualizerId::CNN, EqualizerId::BILSTM}) {
    if (to_string(id) == name) return id;
  }
  throw std::invalid_argument("unknown equalizer: " + std::string(name));
}

Metrics measure(const DualPolSymbols& rx, const SymbolFrame& tx) {
  if (rx.size() != tx.tx.size()) {
    throw std::invalid_argument("measure: received and transmitted lengths differ");
  }
  Metrics m;
  const double ber_x = ber(demap_16qam_hard(rx.x), tx.bits_x);
  const double ber_y = ber(demap_16qam_hard(rx.y), tx.bits_y);
  m.ber = 0.5 * (ber_x + ber_y);
  m.q_db = q_factor_db_or_inf(m.ber);
  const double err = (rx.x - tx.tx.x).squaredNorm() + (rx.y - tx.tx.y).squaredNorm();
  const double ref = tx.tx.x.squaredNorm() + tx.tx.y.squaredNorm();
  m.evm = std::sqrt(err / ref);
  m.n_symbols = rx.size();
  return m;
}

void write_qreport_csv(std::ostream& out, const std::vector<QReport>& rows) {
  out << "equalizer,power_dbm,ber,q_db,evm,n_symbols\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%s,%.2f,%.9e,%.6f,%.9e,%lld\n", std::string(to_string(r.equalizer)).c_str(),
                  r.power_dbm, r.ber, r.q_db, r.evm, static_cast<long long>(r.n_symbols));
    out << line;
  }
}

std::vector<QReport> read_qreport_csv(std::istream& in) {
  std::vector<QReport> rows;
  std::string line;
  if (!std::getline(in, line) || line != "equalizer,power_dbm,ber,q_db,evm,n_symbols") {
    throw std::runtime_error("read_qreport_csv: missing or unexpected header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    QReport r;
    std::getline(ss, field, ',');
    r.equalizer = parse_equalizer(field);
    std::getline(ss, field, ',');
    r.power_dbm = std::stod(field);
    std::getline(ss, field, ',');
    r.ber = std::stod(field);
    std::getline(ss, field, ',');
    r.q_db = std::stod(field);
    std::getline(ss, field, ',');
    r.evm = std::stod(field);
    std::getline(ss, field, ',');
    r.n_symbols = std::stoll(field);
    rows.push_back(r);
  }
  return rows;
}

void sort_reports(std::vector<QReport>& rows) {
  std::sort(rows.begin(), rows.end(), [](const QReport& a, const QReport& b) {
    if (a.equalizer != b.equalizer) return a.equalizer < b.equalizer;
    return a.power_dbm < b.power_dbm;
  });
}

}  // namespace ceq::modem
