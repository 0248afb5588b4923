#include "ceq/fiberlink.hpp"

#include "ceq/fft.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace ceq::fiber {

void LinkConfig::validate() const {
  if (!(alpha_db_km > 0.0)) throw std::invalid_argument("LinkConfig: alpha must be > 0");
  if (!std::isfinite(dispersion_D)) throw std::invalid_argument("LinkConfig: dispersion must be finite");
  if (!(gamma >= 0.0)) throw std::invalid_argument("LinkConfig: gamma must be >= 0");
  if (!(span_km > 0.0)) throw std::invalid_argument("LinkConfig: span length must be > 0");
  if (n_spans < 1) throw std::invalid_argument("LinkConfig: n_spans must be >= 1");
  if (!(nf_db > 0.0)) throw std::invalid_argument("LinkConfig: noise figure must be > 0");
  if (!(wavelength_nm > 0.0)) throw std::invalid_argument("LinkConfig: wavelength must be > 0");
  if (steps_per_span_sim < 1) throw std::invalid_argument("LinkConfig: steps_per_span_sim must be >= 1");
  if (!std::isfinite(launch_power_dbm)) throw std::invalid_argument("LinkConfig: launch power must be finite");
}

double LinkConfig::beta2() const { return beta2_from_d(dispersion_D, wavelength_nm); }

double LinkConfig::alpha_per_km() const { return alpha_db_km / (10.0 * std::log10(std::exp(1.0))); }

double beta2_from_d(double dispersion_D, double wavelength_nm) {
  if (!(wavelength_nm > 0.0)) throw std::invalid_argument("beta2_from_d: wavelength must be > 0");
  const double c_nm_per_ps = kSpeedOfLight * 1e9 * 1e-12;
  return -dispersion_D * wavelength_nm * wavelength_nm / (2.0 * std::numbers::pi * c_nm_per_ps);
}

CVec dispersion_response(Index n, double sample_rate, double beta2_ps2_km, double length_km) {
  const RVec w = angular_frequency_grid(n, sample_rate) * 1e-12;  // rad/ps
  CVec h(n);
  for (Index k = 0; k < n; ++k) {
    h(k) = std::polar(1.0, 0.5 * beta2_ps2_km * w(k) * w(k) * length_km);
  }
  return h;
}

namespace {

void kerr_and_loss(CVec& ax, CVec& ay, double gamma_eff, double field_loss) {
  for (Index i = 0; i < ax.size(); ++i) {
    const double p = std::norm(ax(i)) + std::norm(ay(i));
    const Complex rot = std::polar(field_loss, gamma_eff * p);
    ax(i) *= rot;
    ay(i) *= rot;
  }
}

}  // namespace

DualPolWaveform ssfm_span(const DualPolWaveform& wave, const LinkConfig& cfg) {
  wave.validate();
  if (cfg.steps_per_span_sim < 1) throw std::invalid_argument("ssfm_span: steps_per_span_sim must be >= 1");
  const Index n = wave.size();
  const int steps = cfg.steps_per_span_sim;
  const double h = cfg.span_km / steps;
  const double alpha = cfg.alpha_per_km();
  const double l_eff = alpha > 0.0 ? (1.0 - std::exp(-alpha * h)) / alpha : h;
  const double gamma_eff = (8.0 / 9.0) * cfg.gamma * l_eff;
  const double field_loss = std::exp(-0.5 * alpha * h);
  const double b2 = cfg.beta2();
  const CVec half = dispersion_response(n, wave.sample_rate(), b2, 0.5 * h);
  const CVec full = half.cwiseProduct(half);

  Fft fft;
  CVec fx = fft.forward(wave.x);
  CVec fy = fft.forward(wave.y);
  fx.array() *= half.array();
  fy.array() *= half.array();
  CVec ax(n), ay(n);
  for (int s = 0; s < steps; ++s) {
    fft.inverse(ax, fx);
    fft.inverse(ay, fy);
    kerr_and_loss(ax, ay, gamma_eff, field_loss);
    fft.forward(fx, ax);
    fft.forward(fy, ay);
    const CVec& op = (s + 1 == steps) ? half : full;
    fx.array() *= op.array();
    fy.array() *= op.array();
  }
  DualPolWaveform out = wave;
  fft.inverse(out.x, fx);
  fft.inverse(out.y, fy);
  return out;
}

double ase_power_per_pol(double gain_db, double nf_db, double carrier_hz, double sample_rate) {
  const double g = std::pow(10.0, gain_db / 10.0);
  const double psd = (g - 1.0) * kPlanck * carrier_hz * std::pow(10.0, nf_db / 10.0) / 2.0;
  return psd * sample_rate;
}

DualPolWaveform edfa(const DualPolWaveform& wave, double gain_db, double nf_db, double carrier_hz,
                     const RngStream& rng) {
  if (!(gain_db >= 0.0)) throw std::invalid_argument("edfa: gain must be >= 0 dB");
  DualPolWaveform out = wave;
  const double field_gain = std::pow(10.0, gain_db / 20.0);
  out.x *= field_gain;
  out.y *= field_gain;
  const double var = ase_power_per_pol(gain_db, nf_db, carrier_hz, wave.sample_rate());
  if (var <= 0.0) return out;
  auto gen = rng.engine();
  std::normal_distribution<double> normal(0.0, std::sqrt(var / 2.0));
  for (Index i = 0; i < out.size(); ++i) {
    const double xr = normal(gen);
    const double xi = normal(gen);
    const double yr = normal(gen);
    const double yi = normal(gen);
    out.x(i) += Complex(xr, xi);
    out.y(i) += Complex(yr, yi);
  }
  return out;
}

DualPolWaveform propagate_link(const DualPolWaveform& wave, const LinkConfig& cfg) {
  cfg.validate();
  DualPolWaveform field = wave;
  const double gain_db = cfg.span_loss_db();
  for (int s = 0; s < cfg.n_spans; ++s) {
    field = ssfm_span(field, cfg);
    if (cfg.ase_enabled) {
      field = edfa(field, gain_db, cfg.nf_db, cfg.carrier_hz(), RngStream{cfg.noise_seed, static_cast<std::uint64_t>(s)});
    } else {
      const double field_gain = std::pow(10.0, gain_db / 20.0);
      field.x *= field_gain;
      field.y *= field_gain;
    }
  }
  return field;
}

}  // namespace ceq::fiber
