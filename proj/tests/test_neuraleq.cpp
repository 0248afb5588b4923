#include "doctest.h"

#include "ceq/modem.hpp"
#include "ceq/nn/train.hpp"

#include <boost/multiprecision/cpp_dec_float.hpp>

#include <random>
#include <sstream>

using namespace ceq;
using namespace ceq::nn;
using Mat = Matrix<double>;

namespace {

Mat random_mat(Index r, Index c, std::uint32_t seed, double scale = 1.0) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat m(r, c);
  for (Index j = 0; j < c; ++j) {
    for (Index i = 0; i < r; ++i) m(i, j) = u(gen);
  }
  return m;
}

SeqBatch<double> random_seq(Index channels, Index steps, Index batch, std::uint32_t seed) {
  return {random_mat(channels, steps * batch, seed), steps, batch};
}

// Relative error with a 1e-4 floor so central-difference roundoff on near-zero
// gradients does not dominate.
double rel_err(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-4}); }

/// Checks dL/dparams and dL/dinput for L = sum(probe .* layer(input)) by
/// central differences.
template <typename Layer>
double gradient_check(Layer& layer, std::vector<Tensor<double>*> params, SeqBatch<double> input, double eps) {
  const SeqBatch<double> out0 = layer.forward(input);
  const Mat probe = random_mat(out0.data.rows(), out0.data.cols(), 777);
  auto loss = [&](const SeqBatch<double>& in) { return layer.forward(in).data.cwiseProduct(probe).sum(); };

  for (auto* p : params) p->zero_grad();
  layer.forward(input);
  const SeqBatch<double> grad_in = layer.backward({probe, out0.steps, out0.batch});

  double worst = 0.0;
  for (auto* p : params) {
    for (Index i = 0; i < p->value.size(); ++i) {
      const double keep = p->value(i);
      p->value(i) = keep + eps;
      const double lp = loss(input);
      p->value(i) = keep - eps;
      const double lm = loss(input);
      p->value(i) = keep;
      worst = std::max(worst, rel_err(p->grad(i), (lp - lm) / (2 * eps)));
    }
  }
  for (Index i = 0; i < input.data.size(); ++i) {
    const double keep = input.data(i);
    input.data(i) = keep + eps;
    const double lp = loss(input);
    input.data(i) = keep - eps;
    const double lm = loss(input);
    input.data(i) = keep;
    worst = std::max(worst, rel_err(grad_in.data(i), (lp - lm) / (2 * eps)));
  }
  return worst;
}

DualPolSymbols toy_channel(const DualPolSymbols& tx) {
  // Mild ISI and cross-polarization leakage, no noise.
  DualPolSymbols rx = tx;
  const Index n = tx.size();
  for (Index k = 1; k + 1 < n; ++k) {
    rx.x(k) = tx.x(k) + 0.15 * tx.x(k - 1) - 0.1 * tx.x(k + 1) + 0.05 * tx.y(k);
    rx.y(k) = tx.y(k) - 0.12 * tx.y(k - 1) + 0.08 * tx.y(k + 1) + 0.05 * tx.x(k);
  }
  return rx;
}

TrainConfig small_cfg() {
  TrainConfig cfg;
  cfg.lr = 2e-3;
  cfg.batch = 61 * 8;
  cfg.epochs = 10;
  cfg.pool_size = 4096;
  cfg.epoch_subset = 61 * 32;
  cfg.seed = 11;
  return cfg;
}

EqArch tiny_lstm() {
  EqArch a;
  a.n_hidden = 4;
  a.n_in_symbols = 21;
  a.out_kernel = 11;
  a.n_out_symbols = 11;
  return a;
}

}  // namespace

TEST_CASE("conv1d forward convention") {
  SUBCASE("K = 1 unit kernel is the identity") {
    Conv1d<double> conv(1, 1, 1, Padding::Valid);
    conv.weight.value(0, 0) = 1.0;
    const SeqBatch<double> in = random_seq(1, 7, 1, 1);
    CHECK(conv.forward(in).data == in.data);
  }
  SUBCASE("[1, 2, 3] * [0, 1] valid -> [2, 3]") {
    Conv1d<double> conv(1, 1, 2, Padding::Valid);
    conv.weight.value << 0.0, 1.0;
    SeqBatch<double> in{Mat(1, 3), 3, 1};
    in.data << 1, 2, 3;
    const auto out = conv.forward(in);
    CHECK(out.steps == 2);
    CHECK(out.data(0, 0) == 2.0);
    CHECK(out.data(0, 1) == 3.0);
  }
  SUBCASE("same-zero keeps the length and pads with zeros") {
    Conv1d<double> conv(1, 1, 3, Padding::SameZero);
    conv.weight.value << 1.0, 1.0, 1.0;
    SeqBatch<double> in{Mat(1, 3), 3, 1};
    in.data << 1, 2, 3;
    const auto out = conv.forward(in);
    CHECK(out.steps == 3);
    CHECK(out.data(0, 0) == 3.0);
    CHECK(out.data(0, 1) == 6.0);
    CHECK(out.data(0, 2) == 5.0);
  }
  SUBCASE("errors") {
    Conv1d<double> conv(2, 1, 5, Padding::Valid);
    CHECK_THROWS_AS(conv.forward(random_seq(3, 8, 1, 2)), std::invalid_argument);
    CHECK_THROWS_AS(conv.forward(random_seq(2, 4, 1, 2)), std::invalid_argument);
  }
}

TEST_CASE("conv1d gradients match central differences") {
  // Covers both the narrow-output (C_out < C_in) and the wide-output code paths.
  for (auto [c_in, c_out] : {std::pair<Index, Index>{3, 2}, {2, 3}}) {
    for (Padding pad : {Padding::Valid, Padding::SameZero}) {
      for (Index k : {1, 3, 4}) {
        Conv1d<double> conv(c_in, c_out, k, pad);
        conv.weight.value = random_mat(c_out, c_in * k, 5);
        conv.bias.value = random_mat(c_out, 1, 6);
        const double err = gradient_check(conv, {&conv.weight, &conv.bias}, random_seq(c_in, 8, 2, 7), 1e-6);
        CHECK(err < 1e-6);
      }
    }
  }
}

TEST_CASE("tanh layer gradient") {
  TanhLayer<double> layer;
  CHECK(gradient_check(layer, {}, random_seq(3, 5, 2, 9), 1e-6) < 1e-6);
}

TEST_CASE("LSTM with zero parameters outputs zeros") {
  BiLstm<double> lstm(3, 4);
  const auto out = lstm.forward(random_seq(3, 6, 2, 3));
  CHECK(out.data.rows() == 8);
  CHECK(out.data.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scalar LSTM cell matches a high-precision hand trace") {
  using boost::multiprecision::cpp_dec_float_50;
  using D = cpp_dec_float_50;
  const double W[4] = {0.5, -0.3, 0.8, 0.2};
  const double U[4] = {0.1, 0.4, -0.6, 0.3};
  const double B[4] = {0.05, 1.0, -0.1, 0.2};
  const double xs[2] = {1.0, -0.5};

  auto sig = [](D v) { return D(1) / (D(1) + exp(-v)); };
  auto trace = [&](bool reversed) {
    std::vector<double> hs(2);
    D h = 0, c = 0;
    for (int s = 0; s < 2; ++s) {
      const int t = reversed ? 1 - s : s;
      D z[4];
      for (int g = 0; g < 4; ++g) z[g] = D(W[g]) * D(xs[t]) + D(U[g]) * h + D(B[g]);
      c = sig(z[1]) * c + sig(z[0]) * tanh(z[2]);
      h = sig(z[3]) * tanh(c);
      hs[static_cast<std::size_t>(t)] = static_cast<double>(h);
    }
    return hs;
  };

  BiLstm<double> lstm(1, 1);
  for (auto* d : {&lstm.fwd, &lstm.bwd}) {
    for (int g = 0; g < 4; ++g) {
      d->W.value(g, 0) = W[g];
      d->U.value(g, 0) = U[g];
      d->b.value(g, 0) = B[g];
    }
  }
  SeqBatch<double> in{Mat(1, 2), 2, 1};
  in.data << xs[0], xs[1];
  const auto out = lstm.forward(in);
  const auto fwd = trace(false);
  const auto bwd = trace(true);
  for (Index t = 0; t < 2; ++t) {
    CHECK(std::abs(out.data(0, t) - fwd[static_cast<std::size_t>(t)]) < 1e-14);
    CHECK(std::abs(out.data(1, t) - bwd[static_cast<std::size_t>(t)]) < 1e-14);
  }
}

TEST_CASE("biLSTM BPTT gradients match central differences") {
  BiLstm<double> lstm(2, 3);
  std::uint32_t seed = 20;
  for (auto* d : {&lstm.fwd, &lstm.bwd}) {
    d->W.value = random_mat(12, 2, seed++, 0.8);
    d->U.value = random_mat(12, 3, seed++, 0.8);
    d->b.value = random_mat(12, 1, seed++, 0.5);
  }
  std::vector<Tensor<double>*> params{&lstm.fwd.W, &lstm.fwd.U, &lstm.fwd.b, &lstm.bwd.W, &lstm.bwd.U, &lstm.bwd.b};
  CHECK(gradient_check(lstm, params, random_seq(2, 5, 1, 30), 1e-6) < 1e-5);
  CHECK(gradient_check(lstm, params, random_seq(2, 5, 3, 31), 1e-6) < 1e-5);
}

TEST_CASE("full model gradients match central differences") {
  for (EqArch arch : {tiny_lstm(), EqArch::deep_cnn()}) {
    if (arch.kind == ArchKind::DEEP_CNN) {
      arch.hidden_filters = {3, 2};
      arch.hidden_kernel = 3;
      arch.n_in_symbols = 9;
      arch.out_kernel = 5;
      arch.n_out_symbols = 5;
    }
    auto model = build_model(arch, 3);
    CHECK(gradient_check(model, model.parameters(), random_seq(4, arch.n_in_symbols, 2, 40), 1e-6) < 1e-5);
  }
}

TEST_CASE("mse_loss") {
  const Mat target = random_mat(2, 61, 1);
  CHECK(mse_loss<double>(target, target) == 0.0);
  CHECK(mse_loss<double>(Mat(target.array() + 1.0), target) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(mse_loss<double>(Mat(2, 60), target), std::invalid_argument);

  Mat pred = random_mat(2, 61, 2);
  Mat grad;
  mse_loss<double>(pred, target, &grad);
  double worst = 0.0;
  for (Index i = 0; i < pred.size(); ++i) {
    const double keep = pred(i);
    pred(i) = keep + 1e-6;
    const double lp = mse_loss<double>(pred, target);
    pred(i) = keep - 1e-6;
    const double lm = mse_loss<double>(pred, target);
    pred(i) = keep;
    worst = std::max(worst, rel_err(grad(i), (lp - lm) / 2e-6));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("adam_step") {
  Tensor<double> p({1}, 1, 1);
  std::vector<Tensor<double>*> params{&p};
  AdamState<double> state;
  AdamConfig cfg;

  SUBCASE("first step with unit gradient") {
    p.grad(0) = 1.0;
    adam_step(params, state, cfg);
    CHECK(p.value(0) == doctest::Approx(-5e-4 / (1.0 + 1e-8)).epsilon(1e-12));
  }
  SUBCASE("zero gradient does not move") {
    adam_step(params, state, cfg);
    CHECK(p.value(0) == 0.0);
  }
  SUBCASE("two steps with a constant gradient") {
    const double g = 0.3;
    double w = 0.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 2; ++t) {
      p.grad(0) = g;
      adam_step(params, state, cfg);
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      w -= 5e-4 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    }
    CHECK(p.value(0) == doctest::Approx(w).epsilon(1e-14));
    CHECK(state.step == 2);
  }
  SUBCASE("non-finite gradient is rejected") {
    p.grad(0) = NAN;
    CHECK_THROWS_AS(adam_step(params, state, cfg), std::domain_error);
  }
}

TEST_CASE("build_model") {
  const auto lstm = build_model(EqArch::bilstm(), 1);
  const auto cnn = build_model(EqArch::deep_cnn(), 1);
  CHECK(lstm.parameter_count() == 2 * (4 * 35 * (4 + 35 + 1)) + (2 * 21 * 70 + 2));
  CHECK(lstm.parameter_count() == 14142);
  CHECK(cnn.parameter_count() == (35 * 21 * 4 + 35) + (35 * 21 * 35 + 35) + (2 * 21 * 35 + 2));
  CHECK(cnn.parameter_count() == 30207);

  const auto again = build_model(EqArch::bilstm(), 1);
  const auto other = build_model(EqArch::bilstm(), 2);
  const auto a = lstm.parameters(), b = again.parameters(), c = other.parameters();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);
  CHECK(a[0]->value != c[0]->value);

  for (auto model : {lstm, cnn}) {
    for (std::uint32_t s : {1u, 2u}) {
      const auto out = model.forward(random_seq(4, 81, 3, s));
      CHECK(out.steps == 61);
      CHECK(out.data.rows() == 2);
      CHECK(out.batch == 3);
    }
  }

  EqArch bad;
  bad.n_out_symbols = 60;
  CHECK_THROWS_AS(build_model(bad, 1), std::invalid_argument);
}

TEST_CASE("windows") {
  const auto frame = modem::make_frame(3, 203);
  const auto data = make_dataset(frame.tx, frame.tx, Pol::X);
  const EqArch arch;

  CHECK(window_starts(81, arch) == std::vector<Index>{0});
  CHECK(window_starts(203, arch) == std::vector<Index>{0, 61, 122});
  CHECK(window_starts(141, arch).size() == 1);
  CHECK_THROWS_AS(window_starts(80, arch), std::invalid_argument);

  const auto windows = make_windows(data, arch);
  REQUIRE(windows.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    const Index s = 61 * static_cast<Index>(k);
    CHECK(windows[k].start == s);
    CHECK(windows[k].input.rows() == 81);
    CHECK(windows[k].input.cols() == 4);
    for (Index t = 0; t < 61; ++t) {
      CHECK(windows[k].target(t, 0) == frame.tx.x(s + 10 + t).real());
      CHECK(windows[k].target(t, 1) == frame.tx.x(s + 10 + t).imag());
    }
    CHECK(windows[k].input(0, 2) == frame.tx.y(s).real());
  }

  const auto ydata = make_dataset(frame.tx, frame.tx, Pol::Y);
  CHECK(ydata.features.row(0) == data.features.row(2));
  CHECK(ydata.features.row(3) == data.features.row(1));
  CHECK(ydata.targets.row(1) == data.features.row(3));
}

TEST_CASE("equalize") {
  const auto frame = modem::make_frame(5, 81 + 61);
  auto model = build_model(EqArch::bilstm(), 4);

  const CVec a = equalize(model, frame.tx, Pol::X);
  CHECK(a.size() == 142);
  CHECK(a == equalize(model, frame.tx, Pol::X));
  CHECK(a.head(10) == frame.tx.x.head(10));
  CHECK(a.tail(10) == frame.tx.x.tail(10));

  auto params = model.parameters();
  params[params.size() - 2]->value.setZero();
  params.back()->value.setZero();
  const CVec z = equalize(model, frame.tx, Pol::Y);
  CHECK(z.segment(10, 122).cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.head(10) == frame.tx.y.head(10));
  CHECK(z.tail(10) == frame.tx.y.tail(10));

  CHECK_THROWS_AS(equalize(model, DualPolSymbols{CVec::Zero(80), CVec::Zero(80)}, Pol::X), std::invalid_argument);
}

TEST_CASE("equalize_periodic") {
  const auto frame = modem::make_frame(7, 4 * 61);
  const auto model = build_model(EqArch::deep_cnn(), 2);
  const CVec a = equalize_periodic(model, frame.tx, Pol::X);
  REQUIRE(a.size() == frame.tx.size());

  SUBCASE("a block matches the plain window that covers it") {
    DualPolSymbols sub{frame.tx.x.segment(51, 81), frame.tx.y.segment(51, 81)};
    const CVec plain = equalize(model, sub, Pol::X);
    CHECK((a.segment(61, 61) - plain.segment(10, 61)).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("rotating the frame by whole windows rotates the output") {
    const Index k = 61;
    const Index n = frame.tx.size();
    DualPolSymbols rot;
    rot.x.resize(n);
    rot.y.resize(n);
    for (Index i = 0; i < n; ++i) {
      rot.x(i) = frame.tx.x((i + k) % n);
      rot.y(i) = frame.tx.y((i + k) % n);
    }
    const CVec b = equalize_periodic(model, rot, Pol::X);
    for (Index i = 0; i < n; ++i) CHECK(std::abs(b(i) - a((i + k) % n)) < 1e-12);
  }
  SUBCASE("short streams wrap") {
    DualPolSymbols s{frame.tx.x.head(20), frame.tx.y.head(20)};
    CHECK(equalize_periodic(model, s, Pol::Y).size() == 20);
  }
}

TEST_CASE("float inference tracks double inference") {
  const auto frame = modem::make_frame(6, 500);
  const auto model = build_model(EqArch::bilstm(), 9);
  const CVec d = equalize(model, frame.tx, Pol::X);
  const CVec f = equalize(model.cast<float>(), frame.tx, Pol::X);
  CHECK((d - f).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("training") {
  const auto pool_frame = modem::make_frame(100, 4096);
  const auto val_frame = modem::make_frame(101, 1024);
  const auto pool = make_dataset(toy_channel(pool_frame.tx), pool_frame.tx, Pol::X);
  const auto val = make_dataset(toy_channel(val_frame.tx), val_frame.tx, Pol::X);
  const EqArch arch = tiny_lstm();
  const auto init = build_model(arch, 7);

  SUBCASE("zero epochs returns the initial model") {
    TrainConfig cfg = small_cfg();
    cfg.epochs = 0;
    const auto r = train(init, pool, val, cfg);
    CHECK(r.history.empty());
    CHECK(r.best_epoch == 0);
    const auto a = r.model.parameters(), b = init.parameters();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);
  }

  SUBCASE("loss decreases on a noiseless toy channel") {
    const auto r = train(init, pool, val, small_cfg());
    REQUIRE(r.history.size() == 10);
    for (std::size_t e = 1; e < r.history.size(); ++e) CHECK(r.history[e].loss < r.history[e - 1].loss);
    CHECK(r.best.better_than(r.initial));
  }

  SUBCASE("identical seeds give identical trajectories") {
    TrainConfig cfg = small_cfg();
    cfg.epochs = 3;
    const auto a = train(init, pool, val, cfg);
    const auto b = train(init, pool, val, cfg);
    for (std::size_t e = 0; e < 3; ++e) CHECK(a.history[e].loss == b.history[e].loss);
    const auto pa = a.model.parameters(), pb = b.model.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
  }

  SUBCASE("polarization Y with swapped inputs mirrors polarization X") {
    TrainConfig cfg = small_cfg();
    cfg.epochs = 3;
    auto swap = [](DualPolSymbols s) {
      std::swap(s.x, s.y);
      return s;
    };
    const auto x_run = train(init, pool, val, cfg);
    const auto ypool = make_dataset(swap(toy_channel(pool_frame.tx)), swap(pool_frame.tx), Pol::Y);
    const auto yval = make_dataset(swap(toy_channel(val_frame.tx)), swap(val_frame.tx), Pol::Y);
    const auto y_run = train(init, ypool, yval, cfg);
    for (std::size_t e = 0; e < 3; ++e) CHECK(x_run.history[e].loss == y_run.history[e].loss);
  }

  SUBCASE("transfer_fit") {
    TrainConfig cfg = small_cfg();
    const auto trained = train(init, pool, val, cfg);
    const auto zero = transfer_fit(trained.model, pool, val, cfg, 0);
    CHECK(zero.history.empty());
    const auto t = transfer_fit(trained.model, pool, val, cfg);
    CHECK(t.history.size() <= 5);
    CHECK(!t.initial.better_than(t.best));
    CHECK_THROWS_AS(transfer_fit(trained.model, pool, val, cfg, 6), std::invalid_argument);
  }

  SUBCASE("cosine schedule and phase augmentation") {
    TrainConfig cfg = small_cfg();
    cfg.epochs = 4;
    const auto plain = train(init, pool, val, cfg);
    cfg.lr_final = cfg.lr / 10;
    const auto decayed = train(init, pool, val, cfg);
    CHECK(decayed.history[0].loss == plain.history[0].loss);
    CHECK(decayed.history[1].loss != plain.history[1].loss);
    cfg.augment_phase = true;
    const auto a = train(init, pool, val, cfg);
    const auto b = train(init, pool, val, cfg);
    CHECK(a.history.back().loss == b.history.back().loss);
    CHECK(a.history[0].loss != decayed.history[0].loss);
    CHECK(a.history.back().loss < a.history.front().loss);
    cfg.lr_final = cfg.lr * 2;
    CHECK_THROWS_AS(train(init, pool, val, cfg), std::invalid_argument);
  }

  SUBCASE("history CSV") {
    std::ostringstream os;
    write_history_csv(os, {{1, 0.5, 3.25}});
    CHECK(os.str() == "epoch,loss,val_q_db\n1,5.000000000e-01,3.2500\n");
  }

  SUBCASE("invalid configuration") {
    TrainConfig cfg = small_cfg();
    cfg.epoch_subset = cfg.pool_size + 1;
    CHECK_THROWS_AS(train(init, pool, val, cfg), std::invalid_argument);
    cfg = small_cfg();
    cfg.batch = cfg.epoch_subset * 2;
    CHECK_THROWS_AS(train(init, pool, val, cfg), std::invalid_argument);
    EqDataset empty;
    CHECK_THROWS_AS(train(init, empty, val, small_cfg()), std::invalid_argument);
  }
}
