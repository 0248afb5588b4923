#pragma once

#include "ceq/types.hpp"

#include <cmath>
#include <numbers>

namespace ceq::sig {

/// dBm to watts: 1e-3 * 10^(p/10).
double dbm_to_watts(double p_dbm);
double watts_to_dbm(double p_w);

/// Root-raised-cosine impulse response over `span_symbols` symbols at `sps`
/// samples per symbol (span*sps + 1 taps), normalized to unit energy.
///
/// The removable singularities at t = 0 and |t| = T/(4 rolloff) use their
/// analytic limits.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rrc_taps(Scalar rolloff, int span_symbols, int sps) {
  if (!(rolloff > Scalar(0) && rolloff <= Scalar(1))) {
    throw std::invalid_argument("rrc_taps: rolloff must lie in (0, 1]");
  }
  if (span_symbols <= 0 || span_symbols % 2 != 0) {
    throw std::invalid_argument("rrc_taps: span_symbols must be positive and even");
  }
  if (sps < 1) {
    throw std::invalid_argument("rrc_taps: sps must be >= 1");
  }
  using std::abs;
  using std::cos;
  using std::sin;
  using std::sqrt;
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar beta = rolloff;
  const int n = span_symbols * sps + 1;
  const int center = n / 2;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> taps(n);
  for (int k = 0; k < n; ++k) {
    const Scalar t = Scalar(k - center) / Scalar(sps);
    const Scalar x = Scalar(4) * beta * t;
    Scalar h;
    if (k == center) {
      h = Scalar(1) - beta + Scalar(4) * beta / pi;
    } else if (abs(abs(x) - Scalar(1)) < Scalar(1e-10)) {
      const Scalar a = pi / (Scalar(4) * beta);
      h = beta / sqrt(Scalar(2)) *
          ((Scalar(1) + Scalar(2) / pi) * sin(a) + (Scalar(1) - Scalar(2) / pi) * cos(a));
    } else {
      h = (sin(pi * t * (Scalar(1) - beta)) + x * cos(pi * t * (Scalar(1) + beta))) /
          (pi * t * (Scalar(1) - x * x));
    }
    taps(k) = h;
  }
  taps /= sqrt(taps.squaredNorm());
  return taps;
}

struct RrcFilter {
  double rolloff = 0.1;
  int span_symbols = 64;
  int sps = 2;
  RVec taps;

  static RrcFilter design(double rolloff, int span_symbols, int sps) {
    return {rolloff, span_symbols, sps, rrc_taps<double>(rolloff, span_symbols, sps)};
  }
};

/// Zero-stuffs each polarization by filter.sps and applies the RRC filter,
/// treating the frame as periodic so the output has exactly n*sps samples.
/// The result is scaled so mean(|x|^2 + |y|^2) equals `target_power_w`;
/// an all-zero frame yields an all-zero waveform.
DualPolWaveform pulse_shape(const DualPolSymbols& frame, const RrcFilter& filter, double target_power_w,
                            double symbol_rate);

/// Periodic RRC matched filter followed by decimation at samples
/// phase_offset + k*sps. Output length is floor(size/sps).
DualPolSymbols matched_filter_downsample(const DualPolWaveform& wave, const RrcFilter& filter,
                                         int phase_offset = 0);

/// FFT-based rational resampling by p/q of a periodic frame. The output has
/// round(N*p/q) samples and sps scaled by exactly p/q.
DualPolWaveform resample_rational(const DualPolWaveform& wave, int p, int q);

/// Spectral resampling of a single periodic sequence to `out_len` samples.
CVec resample_periodic(const CVec& in, Index out_len);

}  // namespace ceq::sig
