#include "ceq/nn/train.hpp"

#include "ceq/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

namespace ceq::nn {

EqDataset make_dataset(const DualPolSymbols& rx, const DualPolSymbols& tx, Pol pol) {
  const Index n = rx.size();
  if (rx.y.size() != n || tx.x.size() != n || tx.y.size() != n) {
    throw std::invalid_argument("make_dataset: stream lengths differ");
  }
  const CVec& first = pol == Pol::X ? rx.x : rx.y;
  const CVec& second = pol == Pol::X ? rx.y : rx.x;
  const CVec& target = pol == Pol::X ? tx.x : tx.y;
  EqDataset d;
  d.features.resize(4, n);
  d.features.row(0) = first.real().transpose();
  d.features.row(1) = first.imag().transpose();
  d.features.row(2) = second.real().transpose();
  d.features.row(3) = second.imag().transpose();
  d.targets.resize(2, n);
  d.targets.row(0) = target.real().transpose();
  d.targets.row(1) = target.imag().transpose();
  return d;
}

std::vector<Index> window_starts(Index length, const EqArch& arch) {
  if (length < arch.n_in_symbols) throw std::invalid_argument("window_starts: stream shorter than one window");
  std::vector<Index> starts;
  for (Index s = 0; s + arch.n_in_symbols <= length; s += arch.n_out_symbols) starts.push_back(s);
  return starts;
}

std::vector<Window> make_windows(const EqDataset& data, const EqArch& arch) {
  std::vector<Window> out;
  const Index off = arch.target_offset();
  for (Index s : window_starts(data.size(), arch)) {
    Window w;
    w.start = s;
    w.input = data.features.middleCols(s, arch.n_in_symbols).transpose();
    w.target = data.targets.middleCols(s + off, arch.n_out_symbols).transpose();
    out.push_back(std::move(w));
  }
  return out;
}

Batch gather_batch(const EqDataset& data, std::span<const Index> starts, const EqArch& arch) {
  const auto b = static_cast<Index>(starts.size());
  const Index off = arch.target_offset();
  Batch batch;
  batch.input.steps = arch.n_in_symbols;
  batch.input.batch = b;
  batch.input.data.resize(data.features.rows(), arch.n_in_symbols * b);
  batch.target.steps = arch.n_out_symbols;
  batch.target.batch = b;
  batch.target.data.resize(data.targets.rows(), arch.n_out_symbols * b);
  for (Index j = 0; j < b; ++j) {
    const Index s = starts[static_cast<std::size_t>(j)];
    if (s < 0 || s + arch.n_in_symbols > data.size()) throw std::out_of_range("gather_batch: window outside the data");
    for (Index t = 0; t < arch.n_in_symbols; ++t) batch.input.data.col(t * b + j) = data.features.col(s + t);
    for (Index t = 0; t < arch.n_out_symbols; ++t) batch.target.data.col(t * b + j) = data.targets.col(s + off + t);
  }
  return batch;
}

void TrainConfig::validate(const EqArch& arch) const {
  if (!(augment_sigma2 >= 0.0)) throw std::invalid_argument("TrainConfig: augment_sigma2 must be non-negative");
  if (lr_final > lr) throw std::invalid_argument("TrainConfig: lr_final exceeds lr");
  if (!(lr > 0.0) || batch < 1 || epochs < 0 || pool_size < arch.n_in_symbols || epoch_subset < 1) {
    throw std::invalid_argument("TrainConfig: invalid values");
  }
  if (epoch_subset > pool_size) throw std::invalid_argument("TrainConfig: epoch_subset exceeds pool_size");
  if (windows_per_batch(arch) > windows_per_epoch(arch)) {
    throw std::invalid_argument("TrainConfig: batch larger than the windows drawn per epoch");
  }
}

Index TrainConfig::windows_per_epoch(const EqArch& arch) const {
  return std::max<Index>(1, epoch_subset / arch.n_out_symbols);
}

Index TrainConfig::windows_per_batch(const EqArch& arch) const {
  return std::max<Index>(1, static_cast<Index>(std::lround(static_cast<double>(batch) / arch.n_out_symbols)));
}

template <typename Scalar>
CVec equalize(const EqModel<Scalar>& model, const DualPolSymbols& rx, Pol pol) {
  const EqArch& arch = model.arch();
  const EqDataset data = make_dataset(rx, rx, pol);
  const auto starts = window_starts(data.size(), arch);
  EqModel<Scalar> work = model;
  CVec out = pol == Pol::X ? rx.x : rx.y;
  const Index off = arch.target_offset();
  constexpr std::size_t kChunk = 256;
  for (std::size_t c0 = 0; c0 < starts.size(); c0 += kChunk) {
    const std::span<const Index> chunk(starts.data() + c0, std::min(kChunk, starts.size() - c0));
    const Batch batch = gather_batch(data, chunk, arch);
    SeqBatch<Scalar> in;
    in.steps = batch.input.steps;
    in.batch = batch.input.batch;
    in.data = batch.input.data.template cast<Scalar>();
    const SeqBatch<Scalar> y = work.forward(in);
    const Index b = y.batch;
    for (Index j = 0; j < b; ++j) {
      const Index s = chunk[static_cast<std::size_t>(j)];
      for (Index t = 0; t < arch.n_out_symbols; ++t) {
        out(s + off + t) = Complex(static_cast<double>(y.data(0, t * b + j)), static_cast<double>(y.data(1, t * b + j)));
      }
    }
  }
  return out;
}

template <typename Scalar>
CVec equalize_periodic(const EqModel<Scalar>& model, const DualPolSymbols& rx, Pol pol) {
  const EqArch& arch = model.arch();
  const Index n = rx.size();
  if (n < 1) throw std::invalid_argument("equalize_periodic: empty stream");
  const Index off = arch.target_offset();
  const Index windows = (n + arch.n_out_symbols - 1) / arch.n_out_symbols;
  const Index len = (windows - 1) * arch.n_out_symbols + arch.n_in_symbols;
  DualPolSymbols ext;
  ext.x.resize(len);
  ext.y.resize(len);
  for (Index i = 0; i < len; ++i) {
    const Index src = ((i - off) % n + n) % n;
    ext.x(i) = rx.x(src);
    ext.y(i) = rx.y(src);
  }
  return equalize(model, ext, pol).segment(off, n);
}

template CVec equalize<double>(const EqModel<double>&, const DualPolSymbols&, Pol);
template CVec equalize<float>(const EqModel<float>&, const DualPolSymbols&, Pol);
template CVec equalize_periodic<double>(const EqModel<double>&, const DualPolSymbols&, Pol);
template CVec equalize_periodic<float>(const EqModel<float>&, const DualPolSymbols&, Pol);

ValScore validate_model(const EqModel<double>& model, const EqDataset& val) {
  const EqArch& arch = model.arch();
  // Rebuild the original (unswapped) stream so equalize reproduces the layout.
  DualPolSymbols rx;
  rx.x = (val.features.row(0).transpose().cast<Complex>() + Complex(0, 1) * val.features.row(1).transpose().cast<Complex>());
  rx.y = (val.features.row(2).transpose().cast<Complex>() + Complex(0, 1) * val.features.row(3).transpose().cast<Complex>());
  const CVec est = equalize(model, rx, Pol::X);
  const CVec ref = val.targets.row(0).transpose().cast<Complex>() + Complex(0, 1) * val.targets.row(1).transpose().cast<Complex>();
  const auto rx_bits = modem::demap_16qam_hard(est);
  const auto tx_bits = modem::demap_16qam_hard(ref);
  ValScore s;
  s.ber = modem::ber(rx_bits, tx_bits);
  const auto starts = window_starts(val.size(), arch);
  const Index first = starts.front() + arch.target_offset();
  const Index count = static_cast<Index>(starts.size()) * arch.n_out_symbols;
  s.mse = (est.segment(first, count) - ref.segment(first, count)).squaredNorm() / static_cast<double>(2 * count);
  return s;
}

namespace {

// (re, im) -> (re, im) * j^k, applied in place to rows r and r + 1 of column c.
void rotate_quarter(Matrix<double>& m, Index r, Index c, int k) {
  for (int i = 0; i < k; ++i) {
    const double re = m(r, c);
    m(r, c) = -m(r + 1, c);
    m(r + 1, c) = re;
  }
}

void rotate_windows(Batch& batch, std::mt19937_64& gen) {
  std::uniform_int_distribution<int> quarter(0, 3);
  const Index b = batch.input.batch;
  for (Index j = 0; j < b; ++j) {
    const int k_own = quarter(gen);
    const int k_other = quarter(gen);
    for (Index t = 0; t < batch.input.steps; ++t) {
      rotate_quarter(batch.input.data, 0, t * b + j, k_own);
      rotate_quarter(batch.input.data, 2, t * b + j, k_other);
    }
    for (Index t = 0; t < batch.target.steps; ++t) rotate_quarter(batch.target.data, 0, t * b + j, k_own);
  }
}

double q_of(double ber) { return ber >= 0.5 ? -INFINITY : modem::q_factor_db_or_inf(ber); }

TrainResult run_training(const EqModel<double>& init, const EqDataset& pool, const EqDataset& val,
                         const TrainConfig& cfg, int epochs, bool decay) {
  const EqArch& arch = init.arch();
  if (pool.size() < arch.n_in_symbols) throw std::invalid_argument("train: empty pool");
  if (val.size() < arch.n_in_symbols) throw std::invalid_argument("train: validation set too short");
  cfg.validate(arch);

  TrainResult result;
  result.model = init;
  result.initial = validate_model(init, val);
  result.best = result.initial;
  if (epochs == 0) return result;

  EqModel<double> model = init;
  AdamState<double> adam;
  AdamConfig adam_cfg{cfg.lr};
  const bool schedule = cfg.lr_final >= 0.0;
  const Index n_win = cfg.windows_per_epoch(arch);
  const Index per_batch = cfg.windows_per_batch(arch);
  const Index pool_len = std::min(pool.size(), cfg.pool_size);
  std::vector<Index> starts(static_cast<std::size_t>(n_win));

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    if (schedule) {
      const double frac = decay ? static_cast<double>(epoch - 1) / epochs : 1.0;
      adam_cfg.lr = cfg.lr_final + 0.5 * (cfg.lr - cfg.lr_final) * (1.0 + std::cos(std::numbers::pi * frac));
    }
    auto gen = RngStream{cfg.seed, static_cast<std::uint64_t>(epoch)}.engine();
    std::uniform_int_distribution<Index> pick(0, pool_len - arch.n_in_symbols);
    for (auto& s : starts) s = pick(gen);
    auto noise_gen = RngStream{cfg.seed, static_cast<std::uint64_t>(epoch)}.child(1).engine();
    std::normal_distribution<double> normal(0.0, std::sqrt(cfg.augment_sigma2 / 2.0));
    auto phase_gen = RngStream{cfg.seed, static_cast<std::uint64_t>(epoch)}.child(2).engine();

    double loss_sum = 0.0;
    for (Index b0 = 0; b0 < n_win; b0 += per_batch) {
      const std::span<const Index> chunk(starts.data() + b0, static_cast<std::size_t>(std::min(per_batch, n_win - b0)));
      Batch batch = gather_batch(pool, chunk, arch);
      if (cfg.augment_phase) rotate_windows(batch, phase_gen);
      if (cfg.augment_sigma2 > 0.0) {
        for (Index i = 0; i < batch.input.data.size(); ++i) batch.input.data(i) += normal(noise_gen);
      }
      model.zero_grad();
      const SeqBatch<double> pred = model.forward(batch.input);
      SeqBatch<double> grad;
      grad.steps = pred.steps;
      grad.batch = pred.batch;
      const double loss = mse_loss(pred.data, batch.target.data, &grad.data);
      model.backward(grad);
      adam_step(model.parameters(), adam, adam_cfg);
      loss_sum += loss * static_cast<double>(chunk.size());
    }

    const ValScore score = validate_model(model, val);
    result.history.push_back({epoch, loss_sum / static_cast<double>(n_win), q_of(score.ber)});
    if (score.better_than(result.best)) {
      result.best = score;
      result.best_epoch = epoch;
      result.model = model;
    }
  }
  return result;
}

}  // namespace

TrainResult train(const EqModel<double>& init, const EqDataset& pool, const EqDataset& val, const TrainConfig& cfg) {
  return run_training(init, pool, val, cfg, cfg.epochs, true);
}

TrainResult transfer_fit(const EqModel<double>& model, const EqDataset& pool, const EqDataset& val,
                         const TrainConfig& cfg, int max_epochs) {
  if (max_epochs < 0 || max_epochs > 5) throw std::invalid_argument("transfer_fit: max_epochs must be in [0, 5]");
  return run_training(model, pool, val, cfg, max_epochs, false);
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,loss,val_q_db\n";
  char line[128];
  for (const auto& r : history) {
    std::snprintf(line, sizeof line, "%d,%.9e,%.4f\n", r.epoch, r.loss, r.val_q_db);
    out << line;
  }
}

}  // namespace ceq::nn
