#pragma once

#include "ceq/modem.hpp"
#include "ceq/nn/model.hpp"

#include <iosfwd>
#include <vector>

namespace ceq::cx {

/// Real multiplications per recovered symbol and polarization. A complex
/// multiply counts 4; activations and exp() are LUT-based and not counted.
double rm_cdc(double n_taps, double sps);

/// [2 T (4 n_h (c_in + n_h) + 3 n_h) + n_out F K 2 n_h] / n_out
double rm_bilstm(double n_h, double c_in, double steps, double out_kernel, double out_filters, double n_out);

struct ConvLayerShape {
  double t_out;
  double c_out;
  double kernel;
  double c_in;
};

/// sum T_out C_out K C_in / n_out
double rm_cnn(const std::vector<ConvLayerShape>& layers, double n_out);

/// n_spans * steps * sps * (4 log2 N + 8); N must be a power of two.
double rm_dbp(double n_spans, double steps_per_span, double sps, long fft_size);

/// Convenience counts for the equalizer architectures.
double rm_bilstm(const nn::EqArch& arch);
double rm_cnn(const nn::EqArch& arch);

/// One inference of n_out symbols per clock cycle on one polarization.
double throughput_bps(double n_out_symbols, double bits_per_symbol, double clock_hz);

/// round((400e9 / throughput) * (max_util / safe_util)), at least 1.
int fpgas_for_400g(double throughput_bps, double max_util_fraction, double safe_util = 0.8);

struct ResourceReport {
  modem::EqualizerId equalizer = modem::EqualizerId::CDC;
  double real_mults_per_symbol = 0.0;
  double clock_hz = 0.0;
  double throughput_bps = 0.0;
  double max_util_fraction = 0.0;
  int fpgas_for_400g = 1;
};

/// Post-synthesis figures of one FPGA design, used as inputs.
struct FpgaDesign {
  modem::EqualizerId equalizer;
  double clock_hz;
  double max_util_fraction;
};

/// biLSTM 270 MHz / 64 %, deep CNN 244 MHz / 30 %, CDC 524 MHz / 54 % DSP slices.
std::vector<FpgaDesign> reference_designs();

/// Reports for the given designs with 61 recovered symbols per inference,
/// 16QAM, the given architectures and a 556-tap CDC at 2 Sa/symbol.
std::vector<ResourceReport> resource_table(const std::vector<FpgaDesign>& designs, const nn::EqArch& bilstm,
                                           const nn::EqArch& cnn, int cdc_taps = 556, int cdc_sps = 2,
                                           double n_out_symbols = 61);

/// `equalizer,real_mults_per_symbol,clock_hz,throughput_bps,max_util_fraction,fpgas_for_400g`
void write_resource_csv(std::ostream& out, const std::vector<ResourceReport>& rows);

}  // namespace ceq::cx
