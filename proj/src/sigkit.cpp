#include "ceq/sigkit.hpp"

#include "ceq/fft.hpp"

#include <cmath>

namespace ceq {

void DualPolWaveform::validate() const {
  if (x.size() != y.size()) {
    throw std::invalid_argument("DualPolWaveform: polarizations differ in length");
  }
  if (x.size() < 1) {
    throw std::invalid_argument("DualPolWaveform: empty waveform");
  }
  if (!x.allFinite() || !y.allFinite()) {
    throw std::invalid_argument("DualPolWaveform: non-finite samples");
  }
}

double mean_power(const DualPolWaveform& wave) {
  if (wave.size() == 0) return 0.0;
  return (wave.x.squaredNorm() + wave.y.squaredNorm()) / static_cast<double>(wave.size());
}

namespace sig {

double dbm_to_watts(double p_dbm) { return 1e-3 * std::pow(10.0, p_dbm / 10.0); }

double watts_to_dbm(double p_w) { return 10.0 * std::log10(p_w / 1e-3); }

namespace {

CVec shape_one(const CVec& symbols, const RVec& taps, int sps) {
  const Index n_out = symbols.size() * sps;
  const Index n_taps = taps.size();
  const Index center = n_taps / 2;
  CVec out = CVec::Zero(n_out);
  for (Index m = 0; m < symbols.size(); ++m) {
    const Complex s = symbols(m);
    if (s == Complex(0.0, 0.0)) continue;
    for (Index k = 0; k < n_taps; ++k) {
      Index j = (m * sps + k - center) % n_out;
      if (j < 0) j += n_out;
      out(j) += s * taps(k);
    }
  }
  return out;
}

CVec match_one(const CVec& samples, const RVec& taps, int sps, int phase) {
  const Index n = samples.size();
  const Index n_sym = n / sps;
  const Index n_taps = taps.size();
  const Index center = n_taps / 2;
  CVec out(n_sym);
  for (Index m = 0; m < n_sym; ++m) {
    Complex acc(0.0, 0.0);
    const Index base = m * sps + phase - center;
    for (Index k = 0; k < n_taps; ++k) {
      Index j = (base + k) % n;
      if (j < 0) j += n;
      acc += samples(j) * taps(n_taps - 1 - k);
    }
    out(m) = acc;
  }
  return out;
}

}  // namespace

DualPolWaveform pulse_shape(const DualPolSymbols& frame, const RrcFilter& filter, double target_power_w,
                            double symbol_rate) {
  if (frame.x.size() == 0 || frame.x.size() != frame.y.size()) {
    throw std::invalid_argument("pulse_shape: empty or mismatched frame");
  }
  if (filter.sps < 2) {
    throw std::invalid_argument("pulse_shape: sps must be >= 2");
  }
  DualPolWaveform wave;
  wave.symbol_rate = symbol_rate;
  wave.sps = Rational(filter.sps, 1);
  wave.x = shape_one(frame.x, filter.taps, filter.sps);
  wave.y = shape_one(frame.y, filter.taps, filter.sps);
  const double p = mean_power(wave);
  if (p > 0.0) {
    const double scale = std::sqrt(target_power_w / p);
    wave.x *= scale;
    wave.y *= scale;
  }
  return wave;
}

DualPolSymbols matched_filter_downsample(const DualPolWaveform& wave, const RrcFilter& filter,
                                         int phase_offset) {
  if (phase_offset < 0 || phase_offset >= filter.sps) {
    throw std::invalid_argument("matched_filter_downsample: phase_offset outside [0, sps)");
  }
  return {match_one(wave.x, filter.taps, filter.sps, phase_offset),
          match_one(wave.y, filter.taps, filter.sps, phase_offset)};
}

CVec resample_periodic(const CVec& in, Index out_len) {
  const Index n = in.size();
  if (out_len == n) return in;
  Fft fft;
  const CVec spec = fft.forward(in);
  CVec out_spec = CVec::Zero(out_len);
  const Index kept = std::min(n, out_len);
  const Index n_pos = (kept + 1) / 2;
  const Index n_neg = kept / 2;
  const double scale = static_cast<double>(out_len) / static_cast<double>(n);
  out_spec.head(n_pos) = spec.head(n_pos) * scale;
  out_spec.tail(n_neg) = spec.tail(n_neg) * scale;
  return fft.inverse(out_spec);
}

DualPolWaveform resample_rational(const DualPolWaveform& wave, int p, int q) {
  if (p < 1 || q < 1 || std::gcd(p, q) != 1) {
    throw std::invalid_argument("resample_rational: p, q must be positive and coprime");
  }
  if (p == q) return wave;
  const Index n = wave.size();
  const auto out_len = static_cast<Index>(
      std::llround(static_cast<double>(n) * static_cast<double>(p) / static_cast<double>(q)));
  if (out_len < 1) {
    throw std::invalid_argument("resample_rational: output would be empty");
  }
  DualPolWaveform out;
  out.symbol_rate = wave.symbol_rate;
  out.sps = wave.sps * Rational(p, q);
  out.x = resample_periodic(wave.x, out_len);
  out.y = resample_periodic(wave.y, out_len);
  return out;
}

}  // namespace sig
}  // namespace ceq
