#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace ceq {

using Index = Eigen::Index;
using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

/// Exact positive ratio, always stored in lowest terms.
struct Rational {
  std::int64_t num = 1;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
    if (n <= 0 || d <= 0) {
      throw std::invalid_argument("Rational: numerator and denominator must be positive");
    }
    const auto g = std::gcd(num, den);
    num /= g;
    den /= g;
  }

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool is_integer() const { return den == 1; }

  friend Rational operator*(const Rational& a, const Rational& b) {
    return Rational(a.num * b.num, a.den * b.den);
  }
  friend bool operator==(const Rational&, const Rational&) = default;
};

/// Complex symbols at 1 Sa/symbol for both polarizations.
struct DualPolSymbols {
  CVec x;
  CVec y;

  Index size() const { return x.size(); }
};

/// Oversampled dual-polarization field in sqrt(W) units.
///
/// The sample rate is never stored directly; it is always the product of the
/// symbol rate and the exact oversampling ratio.
struct DualPolWaveform {
  CVec x;
  CVec y;
  double symbol_rate = 34e9;
  Rational sps{1, 1};

  Index size() const { return x.size(); }
  double sample_rate() const { return symbol_rate * sps.value(); }

  /// Throws if the polarizations differ in length, are empty, or hold non-finite samples.
  void validate() const;
};

/// Mean of |x|^2 + |y|^2 over samples.
double mean_power(const DualPolWaveform& wave);

}  // namespace ceq
