#include "ceq/rxdsp.hpp"

#include "ceq/fft.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace ceq::rx {

namespace {

Index next_pow2(Index n) {
  Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Resamples a periodic frame to the requested oversampling ratio.
DualPolWaveform resample_to(const DualPolWaveform& wave, const Rational& target) {
  const Rational ratio(target.num * wave.sps.den, target.den * wave.sps.num);
  if (ratio.num == 1 && ratio.den == 1) return wave;
  return sig::resample_rational(wave, static_cast<int>(ratio.num), static_cast<int>(ratio.den));
}

}  // namespace

CdcFilter cdc_design(const fiber::LinkConfig& cfg, double sample_rate, int n_taps) {
  if (n_taps < 3) throw std::invalid_argument("cdc_design: n_taps must be >= 3");
  const Index grid = next_pow2(8 * static_cast<Index>(n_taps));
  if (n_taps > grid) throw std::invalid_argument("cdc_design: n_taps exceeds the design grid");
  const double length = cfg.total_length_km();
  const CVec response = fiber::dispersion_response(grid, sample_rate, -cfg.beta2(), length);
  Fft fft;
  const CVec impulse = fft.inverse(response);

  CdcFilter filter;
  filter.design_sample_rate = sample_rate;
  filter.total_dispersion = cfg.total_dispersion_ps_nm();
  filter.taps.resize(n_taps);
  const Index c = n_taps / 2;
  // Raised-cosine taper on the outer 10% of each side.
  const double half_width = static_cast<double>(std::max<Index>(c, n_taps - 1 - c));
  const double flat = 0.9 * half_width;
  for (Index j = 0; j < n_taps; ++j) {
    const Index lag = j - c;
    const Index src = ((lag % grid) + grid) % grid;
    const double d = std::abs(static_cast<double>(lag));
    double w = 1.0;
    if (d > flat) {
      w = 0.5 * (1.0 + std::cos(std::numbers::pi * (d - flat) / (half_width - flat + 1.0)));
    }
    filter.taps(j) = impulse(src) * w;
  }
  return filter;
}

CVec convolve_direct(const CVec& in, const CVec& taps) {
  const Index n = in.size();
  const Index m = taps.size();
  const Index c = m / 2;
  CVec out = CVec::Zero(n);
  for (Index i = 0; i < n; ++i) {
    Complex acc(0.0, 0.0);
    for (Index k = 0; k < m; ++k) {
      const Index src = i + c - k;
      if (src >= 0 && src < n) acc += taps(k) * in(src);
    }
    out(i) = acc;
  }
  return out;
}

CVec apply_fir(const CVec& in, const CVec& taps) {
  if (taps.size() == 0) throw std::invalid_argument("apply_fir: empty taps");
  const Index n = in.size();
  const Index m = taps.size();
  const Index c = m / 2;
  const Index nfft = std::max<Index>(1024, next_pow2(4 * m));
  const Index hop = nfft - m + 1;
  Fft fft;
  CVec tap_buf = CVec::Zero(nfft);
  tap_buf.head(m) = taps;
  const CVec h = fft.forward(tap_buf);

  // y_full[j] = sum_k taps[k] in[j - k]; out[i] = y_full[i + c].
  CVec out(n);
  CVec seg(nfft), spec(nfft), y(nfft);
  for (Index first = c; first < c + n; first += hop) {
    // Block produces y_full[first, first + hop), needing in[first - (m-1), first + hop).
    const Index start = first - (m - 1);
    for (Index j = 0; j < nfft; ++j) {
      const Index src = start + j;
      seg(j) = (src >= 0 && src < n) ? in(src) : Complex(0.0, 0.0);
    }
    fft.forward(spec, seg);
    spec.array() *= h.array();
    fft.inverse(y, spec);
    for (Index j = 0; j < hop; ++j) {
      const Index out_idx = first + j - c;
      if (out_idx >= n) break;
      out(out_idx) = y(m - 1 + j);
    }
  }
  return out;
}

DualPolWaveform apply_fir(const DualPolWaveform& wave, const CVec& taps) {
  DualPolWaveform out = wave;
  out.x = apply_fir(wave.x, taps);
  out.y = apply_fir(wave.y, taps);
  return out;
}

DualPolWaveform apply_fir_periodic(const DualPolWaveform& wave, const CVec& taps) {
  const Index n = wave.size();
  const Index m = taps.size();
  const Index c = m / 2;
  const Index pre = m - 1 - c;
  const Index post = c;
  auto extend = [&](const CVec& v) {
    CVec ext(n + pre + post);
    for (Index i = 0; i < ext.size(); ++i) {
      ext(i) = v((((i - pre) % n) + n) % n);
    }
    return ext;
  };
  DualPolWaveform out = wave;
  out.x = apply_fir(extend(wave.x), taps).segment(pre, n);
  out.y = apply_fir(extend(wave.y), taps).segment(pre, n);
  return out;
}

DualPolWaveform cdc_frequency_domain(const DualPolWaveform& wave, const fiber::LinkConfig& cfg) {
  const CVec h = fiber::dispersion_response(wave.size(), wave.sample_rate(), -cfg.beta2(), cfg.total_length_km());
  Fft fft;
  DualPolWaveform out = wave;
  out.x = fft.inverse(CVec(fft.forward(wave.x).cwiseProduct(h)));
  out.y = fft.inverse(CVec(fft.forward(wave.y).cwiseProduct(h)));
  return out;
}

void DbpConfig::validate() const {
  if (steps_per_span < 1) throw std::invalid_argument("DbpConfig: steps_per_span must be >= 1");
  if (!(xi >= 0.0 && xi <= 1.5)) throw std::invalid_argument("DbpConfig: xi outside [0, 1.5]");
}

DualPolWaveform dbp(const DualPolWaveform& wave, const fiber::LinkConfig& cfg, const DbpConfig& dbp_cfg) {
  wave.validate();
  dbp_cfg.validate();
  const Index n = wave.size();
  const int steps = dbp_cfg.steps_per_span;
  const double h = cfg.span_km / steps;
  const double alpha = cfg.alpha_per_km();
  const double l_eff = alpha > 0.0 ? (1.0 - std::exp(-alpha * h)) / alpha : h;
  const double gamma_eff = -(8.0 / 9.0) * cfg.gamma * dbp_cfg.xi * l_eff;
  const double inv_field_loss = std::exp(0.5 * alpha * h);
  const double inv_power_loss = inv_field_loss * inv_field_loss;
  const double inv_gain = std::pow(10.0, -cfg.span_loss_db() / 20.0);
  const CVec half = fiber::dispersion_response(n, wave.sample_rate(), -cfg.beta2(), 0.5 * h);
  const CVec full = half.cwiseProduct(half);

  Fft fft;
  CVec ax = wave.x, ay = wave.y;
  CVec fx(n), fy(n);
  for (int span = 0; span < cfg.n_spans; ++span) {
    ax *= inv_gain;
    ay *= inv_gain;
    fft.forward(fx, ax);
    fft.forward(fy, ay);
    fx.array() *= half.array();
    fy.array() *= half.array();
    for (int s = 0; s < steps; ++s) {
      fft.inverse(ax, fx);
      fft.inverse(ay, fy);
      for (Index i = 0; i < n; ++i) {
        const double p = (std::norm(ax(i)) + std::norm(ay(i))) * inv_power_loss;
        const Complex rot = std::polar(inv_field_loss, gamma_eff * p);
        ax(i) *= rot;
        ay(i) *= rot;
      }
      fft.forward(fx, ax);
      fft.forward(fy, ay);
      const CVec& op = (s + 1 == steps) ? half : full;
      fx.array() *= op.array();
      fy.array() *= op.array();
    }
    fft.inverse(ax, fx);
    fft.inverse(ay, fy);
  }
  DualPolWaveform out = wave;
  out.x = std::move(ax);
  out.y = std::move(ay);
  return out;
}

CVec normalize_to_reference(const CVec& rx, const CVec& tx) {
  if (rx.size() != tx.size() || rx.size() < 1) {
    throw std::invalid_argument("normalize_to_reference: lengths must match and be >= 1");
  }
  const double energy = rx.squaredNorm();
  if (energy == 0.0) throw std::invalid_argument("normalize_to_reference: received symbols are all zero");
  const Complex a = rx.dot(tx) / energy;  // dot conjugates the first argument
  return rx * a;
}

DualPolSymbols normalize_to_reference(const DualPolSymbols& rx, const DualPolSymbols& tx) {
  return {normalize_to_reference(rx.x, tx.x), normalize_to_reference(rx.y, tx.y)};
}

DualPolSymbols add_transceiver_noise(const DualPolSymbols& symbols, double sigma2, const RngStream& rng) {
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("add_transceiver_noise: sigma2 must be >= 0");
  if (sigma2 == 0.0) return symbols;
  DualPolSymbols out = symbols;
  auto gen = rng.engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sd = std::sqrt(sigma2 / 2.0);
  for (Index i = 0; i < out.size(); ++i) {
    const double xr = normal(gen);
    const double xi = normal(gen);
    const double yr = normal(gen);
    const double yi = normal(gen);
    out.x(i) += sd * Complex(xr, xi);
    out.y(i) += sd * Complex(yr, yi);
  }
  return out;
}

double calibrate_transceiver_noise(double target_q_db, const std::function<double(double)>& q_of_sigma2,
                                   const CalibrationOptions& opts) {
  const double q0 = q_of_sigma2(0.0);
  if (q0 < target_q_db - opts.tolerance_db) {
    throw std::domain_error("calibrate_transceiver_noise: noiseless Q is already below the target");
  }
  if (std::abs(q0 - target_q_db) <= opts.tolerance_db) return 0.0;
  double lo = 0.0;
  double hi = 1e-4;
  while (q_of_sigma2(hi) > target_q_db) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw std::domain_error("calibrate_transceiver_noise: cannot bracket the target");
  }
  double mid = hi;
  for (int it = 0; it < opts.max_iterations; ++it) {
    mid = 0.5 * (lo + hi);
    const double q = q_of_sigma2(mid);
    if (std::abs(q - target_q_db) <= opts.tolerance_db) return mid;
    if (q > target_q_db) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return mid;
}

DualPolSymbols receive_cdc(const DualPolWaveform& link_out, const DualPolSymbols& tx, const fiber::LinkConfig& cfg,
                           const RxConfig& rx_cfg) {
  const DualPolWaveform at_rx = resample_to(link_out, Rational(rx_cfg.rx_sps, 1));
  const CdcFilter cdc = cdc_design(cfg, at_rx.sample_rate(), rx_cfg.cdc_taps);
  const DualPolWaveform compensated = apply_fir_periodic(at_rx, cdc.taps);
  const auto rrc = sig::RrcFilter::design(rx_cfg.rrc_rolloff, rx_cfg.rrc_span, rx_cfg.rx_sps);
  return normalize_to_reference(sig::matched_filter_downsample(compensated, rrc, 0), tx);
}

DualPolSymbols receive_dbp(const DualPolWaveform& link_out, const DualPolSymbols& tx, const fiber::LinkConfig& cfg,
                           const DbpConfig& dbp_cfg, const RxConfig& rx_cfg) {
  const DualPolWaveform at_dbp = resample_to(link_out, dbp_cfg.sa_per_symbol);
  const DualPolWaveform back = dbp(at_dbp, cfg, dbp_cfg);
  const DualPolWaveform at_rx = resample_to(back, Rational(rx_cfg.rx_sps, 1));
  const auto rrc = sig::RrcFilter::design(rx_cfg.rrc_rolloff, rx_cfg.rrc_span, rx_cfg.rx_sps);
  DualPolSymbols soft = sig::matched_filter_downsample(at_rx, rrc, 0);
  if (soft.size() != tx.size()) {
    throw std::runtime_error("receive_dbp: resampling changed the frame length");
  }
  return normalize_to_reference(soft, tx);
}

double optimize_dbp_xi(const ValidationCapture& capture, const fiber::LinkConfig& cfg, const DbpConfig& dbp_cfg,
                       const RxConfig& rx_cfg, const std::vector<double>& grid) {
  if (grid.empty()) throw std::invalid_argument("optimize_dbp_xi: empty grid");
  double best_xi = grid.front();
  double best_ber = std::numeric_limits<double>::infinity();
  double best_evm = std::numeric_limits<double>::infinity();
  for (const double xi : grid) {
    DbpConfig c = dbp_cfg;
    c.xi = xi;
    const auto soft = receive_dbp(capture.link_out, capture.frame.tx, cfg, c, rx_cfg);
    const auto noisy = add_transceiver_noise(soft, capture.sigma2, capture.noise);
    const auto m = modem::measure(noisy, capture.frame);
    const bool better = m.ber < best_ber || (m.ber == best_ber && m.evm < best_evm) ||
                        (m.ber == best_ber && m.evm == best_evm && xi < best_xi);
    if (better) {
      best_xi = xi;
      best_ber = m.ber;
      best_evm = m.evm;
    }
  }
  return best_xi;
}

}  // namespace ceq::rx
