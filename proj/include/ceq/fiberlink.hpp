#pragma once

#include "ceq/rng.hpp"
#include "ceq/types.hpp"

#include <cstdint>

namespace ceq::fiber {

inline constexpr double kSpeedOfLight = 2.99792458e8;  // m/s
inline constexpr double kPlanck = 6.62607015e-34;      // J s

/// Physical description of the multi-span link. Defaults describe the
/// 17 x 70 km LEAF system.
struct LinkConfig {
  double alpha_db_km = 0.225;
  double dispersion_D = 4.2;  // ps/(nm km)
  double gamma = 2.0;         // 1/(W km)
  double span_km = 70.0;
  int n_spans = 17;
  double nf_db = 4.5;
  double wavelength_nm = 1550.0;
  int steps_per_span_sim = 50;
  double launch_power_dbm = 0.0;
  std::uint64_t noise_seed = 1;
  bool ase_enabled = true;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;

  double beta2() const;          // ps^2/km
  double alpha_per_km() const;   // power attenuation, 1/km
  double span_loss_db() const { return alpha_db_km * span_km; }
  double total_length_km() const { return span_km * n_spans; }
  double carrier_hz() const { return kSpeedOfLight / (wavelength_nm * 1e-9); }
  /// Accumulated dispersion D * L in ps/nm.
  double total_dispersion_ps_nm() const { return dispersion_D * total_length_km(); }
};

/// beta2 = -D lambda^2 / (2 pi c), in ps^2/km for D in ps/(nm km) and lambda in nm.
double beta2_from_d(double dispersion_D, double wavelength_nm);

/// exp(i * beta2/2 * w^2 * length) sampled on the DFT grid of `n` samples at
/// `sample_rate`; this is the field response of `length_km` of dispersive fiber.
CVec dispersion_response(Index n, double sample_rate, double beta2_ps2_km, double length_km);

/// One fiber span of symmetric split-step Manakov integration:
/// D(h/2) [loss + Kerr over h] D(h/2) per step, Kerr phase
/// (8/9) gamma (|Ax|^2 + |Ay|^2) Leff with Leff = (1 - e^{-alpha h}) / alpha.
DualPolWaveform ssfm_span(const DualPolWaveform& wave, const LinkConfig& cfg);

/// Lumped amplifier: field gain 10^(gain/20) plus circular Gaussian ASE with
/// per-polarization PSD (G - 1) h nu 10^(NF/10) / 2 over the full sample rate.
DualPolWaveform edfa(const DualPolWaveform& wave, double gain_db, double nf_db, double carrier_hz,
                     const RngStream& rng);

/// ASE power added per polarization by one amplifier.
double ase_power_per_pol(double gain_db, double nf_db, double carrier_hz, double sample_rate);

/// n_spans x (ssfm_span, edfa with gain = span loss). The ASE of span s uses
/// the substream {cfg.noise_seed, s}.
DualPolWaveform propagate_link(const DualPolWaveform& wave, const LinkConfig& cfg);

}  // namespace ceq::fiber
