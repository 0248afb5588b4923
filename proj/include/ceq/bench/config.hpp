#pragma once

#include "ceq/complexity.hpp"
#include "ceq/fiberlink.hpp"
#include "ceq/fixedpoint.hpp"
#include "ceq/modem.hpp"
#include "ceq/nn/train.hpp"
#include "ceq/rxdsp.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ceq::bench {

struct DatasetSizes {
  Index pool = Index{1} << 16;
  Index val = Index{1} << 13;
  Index test = Index{1} << 15;
};

struct Seeds {
  std::uint32_t data = 1;   // transmitted bit streams
  std::uint64_t noise = 2;  // ASE and transceiver noise
  std::uint64_t train = 3;  // initialization and window sampling
};

struct CalibrationTarget {
  double power_dbm = -1.0;
  double q_db = 3.91;
  double tolerance_db = 0.01;
  bool enabled = true;  // false: no transceiver noise at all
};

struct NnSettings {
  nn::TrainConfig train;
  int transfer_epochs = 5;
  bool augment_noise = true;  // fresh transceiver noise per mini-batch
  bool retrain_all = false;   // train from scratch at every power
  int fraction_bits = fx::kDefaultFractionBits;
};

/// Everything a sweep needs. Serialized as JSON; unknown keys are rejected.
struct RunConfig {
  fiber::LinkConfig link;
  int sim_sps = 4;
  double symbol_rate = 34e9;
  rx::RxConfig rx;
  rx::DbpConfig dbp;
  std::vector<double> dbp_xi_grid;  // empty: 0, 0.1, ..., 1.2
  std::vector<double> sweep_powers{-4, -3, -2, -1, 0, 1, 2, 3, 4};
  std::vector<modem::EqualizerId> equalizers{modem::EqualizerId::CDC, modem::EqualizerId::DBP,
                                             modem::EqualizerId::CNN, modem::EqualizerId::BILSTM};
  nn::EqArch bilstm = nn::EqArch::bilstm();
  nn::EqArch cnn = nn::EqArch::deep_cnn();
  NnSettings nn;
  DatasetSizes sizes;
  Seeds seeds;
  CalibrationTarget calibration;
  std::vector<cx::FpgaDesign> fpga_designs = cx::reference_designs();
  std::filesystem::path output_dir = "ceq_out";

  void validate() const;
  double max_power() const;
  std::vector<double> xi_grid() const;
  bool has(modem::EqualizerId id) const;
};

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string dump_run_config(const RunConfig& cfg);

}  // namespace ceq::bench
