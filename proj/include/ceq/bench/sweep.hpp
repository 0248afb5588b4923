#pragma once

#include "ceq/bench/config.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ceq::bench {

enum class Role { Pool, Val, Test };

std::string_view to_string(Role r);

/// One persisted realization: what was sent, the CDC soft symbols before any
/// transceiver noise and, except for the pool, the received field for DBP.
struct Dataset {
  modem::SymbolFrame frame;
  DualPolSymbols cdc;
  DualPolWaveform link_out;

  bool has_link() const { return link_out.size() > 0; }
};

std::uint32_t frame_seed(const Seeds& seeds, Role role, double power_dbm);
std::uint64_t ase_seed(const Seeds& seeds, Role role, double power_dbm);
RngStream transceiver_stream(const Seeds& seeds, Role role, double power_dbm);

Index dataset_symbols(const RunConfig& cfg, Role role);

/// Full transmit -> link -> CDC pipeline for one (power, role).
Dataset generate_dataset(const RunConfig& cfg, double power_dbm, Role role);

std::filesystem::path dataset_dir(const RunConfig& cfg, double power_dbm);
void save_dataset(const std::filesystem::path& dir, Role role, const Dataset& ds, double symbol_rate);
Dataset load_dataset(const std::filesystem::path& dir, Role role);
bool dataset_exists(const std::filesystem::path& dir, Role role);

/// 64-bit hashes of the transmitted symbols of every n-symbol window.
std::vector<std::uint64_t> window_hashes(const DualPolSymbols& tx, Index window, Index stride);

struct Calibration {
  double power_dbm = 0.0;
  double sigma2 = 0.0;
  double q_db = 0.0;  // CDC Q reached with sigma2
};

/// Chooses sigma2 so CDC on `test` reaches the configured Q.
Calibration calibrate(const RunConfig& cfg, const Dataset& test);

void save_calibration(const std::filesystem::path& path, const Calibration& c);
Calibration load_calibration(const std::filesystem::path& path);

/// CDC soft symbols with the (power, role) transceiver noise realization.
DualPolSymbols noisy_cdc(const RunConfig& cfg, const Dataset& ds, Role role, double power_dbm, double sigma2);

struct RunOptions {
  int threads = 0;
  bool deterministic = false;
  std::ostream* log = nullptr;
};

struct QuantizationRow {
  nn::ArchKind arch = nn::ArchKind::BILSTM;
  double power_dbm = 0.0;
  double q_float_db = 0.0;
  double q_fixed_db = 0.0;
};

struct XiRow {
  double power_dbm = 0.0;
  double xi = 0.0;
};

/// Stages of a sweep, each reading its inputs from and writing its outputs to
/// cfg.output_dir:
///   data/p<power>/<role>_{tx,cdc,link}.ceqw, calibration.json,
///   models/<arch>_<pol>_p<power>.ceqn (+ _history.csv), quantization.csv,
///   dbp_xi.csv, qreport.csv.
class Bench {
 public:
  Bench(RunConfig cfg, RunOptions opts);

  const RunConfig& config() const { return cfg_; }
  int threads() const { return threads_; }

  /// Writes any missing dataset, checks train/test disjointness and calibrates.
  void generate();
  Calibration calibration();

  /// Trains both polarization models of every NN at the highest sweep power
  /// (or every power with retrain_all).
  std::vector<QuantizationRow> train();
  /// Fine-tunes the max-power models to every other power.
  void transfer();
  /// Scores every (equalizer, power) on the test sets; writes qreport.csv.
  std::vector<modem::QReport> evaluate();
  std::vector<modem::QReport> sweep();

  std::filesystem::path model_path(nn::ArchKind arch, nn::Pol pol, double power_dbm) const;

 private:
  const nn::EqArch& arch_of(nn::ArchKind kind) const;
  std::vector<nn::ArchKind> nn_archs() const;
  std::vector<double> data_powers() const;
  Dataset dataset(double power_dbm, Role role) const;
  void log(const std::string& line) const;
  nn::TrainConfig train_config(nn::ArchKind kind, nn::Pol pol, double power_dbm, double sigma2) const;

  RunConfig cfg_;
  RunOptions opts_;
  int threads_ = 1;
};

void write_quantization_csv(std::ostream& out, const std::vector<QuantizationRow>& rows);
void write_xi_csv(std::ostream& out, const std::vector<XiRow>& rows);

/// "p+1.00" style directory/file tag.
std::string power_tag(double power_dbm);

}  // namespace ceq::bench
