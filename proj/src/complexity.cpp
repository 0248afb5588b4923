#include "ceq/complexity.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace ceq::cx {

double rm_cdc(double n_taps, double sps) {
  if (n_taps < 1) throw std::invalid_argument("rm_cdc: n_taps must be at least 1");
  return 4.0 * n_taps * sps;
}

double rm_bilstm(double n_h, double c_in, double steps, double out_kernel, double out_filters, double n_out) {
  if (n_out <= 0) throw std::invalid_argument("rm_bilstm: n_out must be positive");
  const double recurrent = 2.0 * steps * (4.0 * n_h * (c_in + n_h) + 3.0 * n_h);
  const double conv = n_out * out_filters * out_kernel * 2.0 * n_h;
  return (recurrent + conv) / n_out;
}

double rm_cnn(const std::vector<ConvLayerShape>& layers, double n_out) {
  if (n_out <= 0) throw std::invalid_argument("rm_cnn: n_out must be positive");
  double total = 0.0;
  for (const auto& l : layers) total += l.t_out * l.c_out * l.kernel * l.c_in;
  return total / n_out;
}

double rm_dbp(double n_spans, double steps_per_span, double sps, long fft_size) {
  if (fft_size < 1 || (fft_size & (fft_size - 1)) != 0) throw std::invalid_argument("rm_dbp: fft_size must be a power of two");
  return n_spans * steps_per_span * sps * (4.0 * std::log2(static_cast<double>(fft_size)) + 8.0);
}

double rm_bilstm(const nn::EqArch& arch) {
  return rm_bilstm(static_cast<double>(arch.n_hidden), static_cast<double>(arch.in_channels),
                   static_cast<double>(arch.n_in_symbols), static_cast<double>(arch.out_kernel),
                   static_cast<double>(arch.out_filters), static_cast<double>(arch.n_out_symbols));
}

double rm_cnn(const nn::EqArch& arch) {
  std::vector<ConvLayerShape> layers;
  double c = static_cast<double>(arch.in_channels);
  const auto t_in = static_cast<double>(arch.n_in_symbols);
  for (Index f : arch.hidden_filters) {
    layers.push_back({t_in, static_cast<double>(f), static_cast<double>(arch.hidden_kernel), c});
    c = static_cast<double>(f);
  }
  layers.push_back({static_cast<double>(arch.n_out_symbols), static_cast<double>(arch.out_filters),
                    static_cast<double>(arch.out_kernel), c});
  return rm_cnn(layers, static_cast<double>(arch.n_out_symbols));
}

double throughput_bps(double n_out_symbols, double bits_per_symbol, double clock_hz) {
  if (!(n_out_symbols > 0 && bits_per_symbol > 0 && clock_hz > 0)) {
    throw std::invalid_argument("throughput_bps: arguments must be positive");
  }
  return n_out_symbols * bits_per_symbol * clock_hz;
}

int fpgas_for_400g(double throughput, double max_util_fraction, double safe_util) {
  if (!(throughput > 0)) throw std::invalid_argument("fpgas_for_400g: throughput must be positive");
  if (!(max_util_fraction > 0 && max_util_fraction <= 1)) {
    throw std::invalid_argument("fpgas_for_400g: utilization must be in (0, 1]");
  }
  if (!(safe_util > 0 && safe_util <= 1)) throw std::invalid_argument("fpgas_for_400g: safe_util must be in (0, 1]");
  const long n = std::lround((400e9 / throughput) * (max_util_fraction / safe_util));
  return static_cast<int>(std::max(1L, n));
}

std::vector<FpgaDesign> reference_designs() {
  return {{modem::EqualizerId::BILSTM, 270e6, 0.64},
          {modem::EqualizerId::CNN, 244e6, 0.30},
          {modem::EqualizerId::CDC, 524e6, 0.54}};
}

std::vector<ResourceReport> resource_table(const std::vector<FpgaDesign>& designs, const nn::EqArch& bilstm,
                                           const nn::EqArch& cnn, int cdc_taps, int cdc_sps, double n_out_symbols) {
  std::vector<ResourceReport> rows;
  for (const auto& d : designs) {
    ResourceReport r;
    r.equalizer = d.equalizer;
    switch (d.equalizer) {
      case modem::EqualizerId::BILSTM: r.real_mults_per_symbol = rm_bilstm(bilstm); break;
      case modem::EqualizerId::CNN: r.real_mults_per_symbol = rm_cnn(cnn); break;
      case modem::EqualizerId::CDC: r.real_mults_per_symbol = rm_cdc(cdc_taps, cdc_sps); break;
      case modem::EqualizerId::DBP: throw std::invalid_argument("resource_table: no FPGA design for DBP");
    }
    r.clock_hz = d.clock_hz;
    r.throughput_bps = throughput_bps(n_out_symbols, 4.0, d.clock_hz);
    r.max_util_fraction = d.max_util_fraction;
    r.fpgas_for_400g = fpgas_for_400g(r.throughput_bps, d.max_util_fraction);
    rows.push_back(r);
  }
  return rows;
}

void write_resource_csv(std::ostream& out, const std::vector<ResourceReport>& rows) {
  out << "equalizer,real_mults_per_symbol,clock_hz,throughput_bps,max_util_fraction,fpgas_for_400g\n";
  char line[256];
  for (const auto& r : rows) {
    const std::string name(modem::to_string(r.equalizer));
    std::snprintf(line, sizeof line, "%s,%.2f,%.0f,%.0f,%.2f,%d\n", name.c_str(), r.real_mults_per_symbol, r.clock_hz,
                  r.throughput_bps, r.max_util_fraction, r.fpgas_for_400g);
    out << line;
  }
}

}  // namespace ceq::cx
