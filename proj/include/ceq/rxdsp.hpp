#pragma once

#include "ceq/fiberlink.hpp"
#include "ceq/modem.hpp"
#include "ceq/rng.hpp"
#include "ceq/sigkit.hpp"
#include "ceq/types.hpp"

#include <functional>
#include <vector>

namespace ceq::rx {

struct CdcFilter {
  CVec taps;
  double design_sample_rate = 0.0;
  double total_dispersion = 0.0;  // ps/nm

  /// Index of the zero-delay tap.
  Index center() const { return taps.size() / 2; }
};

/// Time-domain CD compensator: the inverse DFT of exp(-i beta2/2 w^2 L) on a
/// grid of at least 8 * n_taps points, cut to n_taps around zero delay and
/// tapered with a raised-cosine edge window. Tap n_taps/2 is zero delay.
CdcFilter cdc_design(const fiber::LinkConfig& cfg, double sample_rate, int n_taps);

/// Linear convolution via overlap-save, same length as the input, with tap
/// taps.size()/2 taken as zero delay: out[n] = sum_k taps[k] in[n + c - k].
CVec apply_fir(const CVec& in, const CVec& taps);
DualPolWaveform apply_fir(const DualPolWaveform& wave, const CVec& taps);

/// Same as apply_fir on a periodic frame (input cyclically extended before filtering).
DualPolWaveform apply_fir_periodic(const DualPolWaveform& wave, const CVec& taps);

/// Reference direct-form convolution with the same alignment as apply_fir.
CVec convolve_direct(const CVec& in, const CVec& taps);

/// Ideal frequency-domain CD compensation over the whole link.
DualPolWaveform cdc_frequency_domain(const DualPolWaveform& wave, const fiber::LinkConfig& cfg);

struct DbpConfig {
  int steps_per_span = 1;
  Rational sa_per_symbol{23, 10};
  double xi = 1.0;

  void validate() const;
};

/// Split-step back-propagation, spans in reverse: undo the amplifier gain,
/// then invert each forward step with beta2 -> -beta2, gamma -> -xi gamma
/// and the span loss restored.
DualPolWaveform dbp(const DualPolWaveform& wave, const fiber::LinkConfig& cfg, const DbpConfig& dbp_cfg);

/// Least-squares one-tap fit a = <rx, tx> / <rx, rx>; returns a * rx.
CVec normalize_to_reference(const CVec& rx, const CVec& tx);
DualPolSymbols normalize_to_reference(const DualPolSymbols& rx, const DualPolSymbols& tx);

/// Adds circular complex Gaussian noise of variance sigma2 per symbol and
/// polarization. The noise pattern depends only on the stream; sigma2 scales it.
DualPolSymbols add_transceiver_noise(const DualPolSymbols& symbols, double sigma2, const RngStream& rng);

struct CalibrationOptions {
  double tolerance_db = 0.01;
  int max_iterations = 100;
};

/// Bisection on sigma2 so that q_of_sigma2(sigma2) hits target_q_db. Throws
/// std::domain_error when even sigma2 = 0 falls short of the target.
double calibrate_transceiver_noise(double target_q_db, const std::function<double(double)>& q_of_sigma2,
                                   const CalibrationOptions& opts = {});

/// Receiver parameters shared by the CDC and DBP paths.
struct RxConfig {
  int rx_sps = 2;
  int cdc_taps = 556;
  double rrc_rolloff = 0.1;
  int rrc_span = 64;
};

/// resample to rx_sps -> 556-tap CDC -> matched filter -> downsample -> normalize.
DualPolSymbols receive_cdc(const DualPolWaveform& link_out, const DualPolSymbols& tx, const fiber::LinkConfig& cfg,
                           const RxConfig& rx_cfg);

/// resample to the DBP rate -> DBP -> resample to rx_sps -> matched filter -> downsample -> normalize.
DualPolSymbols receive_dbp(const DualPolWaveform& link_out, const DualPolSymbols& tx, const fiber::LinkConfig& cfg,
                           const DbpConfig& dbp_cfg, const RxConfig& rx_cfg);

/// A received waveform and what was sent, used to score DBP settings.
struct ValidationCapture {
  DualPolWaveform link_out;
  modem::SymbolFrame frame;
  double sigma2 = 0.0;
  RngStream noise;
};

/// Grid search for the nonlinear scaling xi. Ranked by BER (i.e. Q), ties
/// by EVM, remaining ties by the smaller xi.
double optimize_dbp_xi(const ValidationCapture& capture, const fiber::LinkConfig& cfg, const DbpConfig& dbp_cfg,
                       const RxConfig& rx_cfg, const std::vector<double>& grid);

}  // namespace ceq::rx
