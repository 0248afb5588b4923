#pragma once

#include "ceq/modem.hpp"
#include "ceq/nn/model.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace ceq::nn {

enum class Pol { X, Y };

/// Real-valued view of a received/transmitted stream for one recovered
/// polarization. Features are (Re x, Im x, Re y, Im y) for Pol::X and the
/// swapped layout (Re y, Im y, Re x, Im x) for Pol::Y; targets are the
/// (Re, Im) of the recovered polarization's transmitted symbols.
struct EqDataset {
  Matrix<double> features;  // 4 x N
  Matrix<double> targets;   // 2 x N

  Index size() const { return features.cols(); }
};

EqDataset make_dataset(const DualPolSymbols& rx, const DualPolSymbols& tx, Pol pol);

/// Starts of the stride-n_out windows; a trailing partial window is dropped.
std::vector<Index> window_starts(Index length, const EqArch& arch);

struct Window {
  Index start = 0;
  Matrix<double> input;   // n_in x 4
  Matrix<double> target;  // n_out x 2, symbols start + offset .. start + offset + n_out - 1
};

std::vector<Window> make_windows(const EqDataset& data, const EqArch& arch);

struct Batch {
  SeqBatch<double> input;
  SeqBatch<double> target;
};

/// Packs the windows starting at `starts` into one time-major batch.
Batch gather_batch(const EqDataset& data, std::span<const Index> starts, const EqArch& arch);

struct TrainConfig {
  double lr = 5e-4;
  double lr_final = -1.0;  // cosine decay from lr to this over the epochs; negative keeps lr constant
  Index batch = 2000;  // symbols per mini-batch, i.e. about batch / n_out windows
  int epochs = 500;
  Index pool_size = Index{1} << 16;
  Index epoch_subset = Index{1} << 14;
  std::uint64_t seed = 1;
  // When positive, the pool holds noise-free inputs and every mini-batch gets a
  // fresh complex Gaussian realization of this variance per symbol and polarization.
  double augment_sigma2 = 0.0;
  // Rotates each window's two polarizations by independent random multiples
  // of 90 degrees; the target follows the recovered one.
  bool augment_phase = false;

  void validate(const EqArch& arch) const;
  Index windows_per_epoch(const EqArch& arch) const;
  Index windows_per_batch(const EqArch& arch) const;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double val_q_db = 0.0;
};

struct ValScore {
  double ber = 1.0;
  double mse = 0.0;

  bool better_than(const ValScore& o) const { return ber < o.ber || (ber == o.ber && mse < o.mse); }
};

struct TrainResult {
  EqModel<double> model;
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0 means the starting weights were kept
  ValScore initial;
  ValScore best;
};

/// BER and MSE of the model's recovered polarization on a validation set.
ValScore validate_model(const EqModel<double>& model, const EqDataset& val);

/// Each epoch draws epoch_subset / n_out random window starts from the pool,
/// runs Adam over mini-batches and scores the validation set. Returns the
/// weights of the best validation epoch (starting weights included).
TrainResult train(const EqModel<double>& init, const EqDataset& pool, const EqDataset& val, const TrainConfig& cfg);

/// The same loop for at most 5 epochs from already trained weights, at the
/// final learning rate of the schedule.
TrainResult transfer_fit(const EqModel<double>& model, const EqDataset& pool, const EqDataset& val,
                         const TrainConfig& cfg, int max_epochs = 5);

/// `epoch,loss,val_q_db` rows.
void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history);

/// Recovers polarization `pol` of the whole stream. Symbols no window reaches
/// keep their input soft values.
template <typename Scalar>
CVec equalize(const EqModel<Scalar>& model, const DualPolSymbols& rx, Pol pol);

/// Treats the stream as one period of a circular frame, so every symbol is
/// recovered by a window.
template <typename Scalar>
CVec equalize_periodic(const EqModel<Scalar>& model, const DualPolSymbols& rx, Pol pol);

}  // namespace ceq::nn
