#include "doctest.h"

#include "ceq/fft.hpp"
#include "ceq/rxdsp.hpp"

#include <random>

using namespace ceq;
using namespace ceq::rx;
using fiber::LinkConfig;

namespace {

CVec random_cvec(Index n, std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<double> normal;
  CVec v(n);
  for (Index i = 0; i < n; ++i) v(i) = Complex(normal(gen), normal(gen));
  return v;
}

LinkConfig linear_noiseless() {
  LinkConfig cfg;
  cfg.gamma = 0.0;
  cfg.ase_enabled = false;
  return cfg;
}

DualPolWaveform transmit(const modem::SymbolFrame& frame, double power_dbm, int sps) {
  const auto rrc = sig::RrcFilter::design(0.1, 64, sps);
  return sig::pulse_shape(frame.tx, rrc, sig::dbm_to_watts(power_dbm), 34e9);
}

}  // namespace

TEST_CASE("cdc_design") {
  SUBCASE("zero dispersion gives a unit impulse") {
    LinkConfig cfg;
    cfg.dispersion_D = 0.0;
    const auto f = cdc_design(cfg, 68e9, 557);
    CHECK(std::abs(f.taps(278) - Complex(1.0, 0.0)) < 1e-12);
    double others = 0.0;
    for (Index k = 0; k < f.taps.size(); ++k) {
      if (k != 278) others = std::max(others, std::abs(f.taps(k)));
    }
    CHECK(others < 1e-12);
  }

  SUBCASE("re-compresses a link-dispersed impulse") {
    const LinkConfig cfg = linear_noiseless();
    const Index n = 4096;
    DualPolWaveform impulse{CVec::Zero(n), CVec::Zero(n), 34e9, Rational(2, 1)};
    impulse.x(n / 2) = 1.0;
    impulse.y(n / 2) = 1.0;
    const auto dispersed = fiber::propagate_link(impulse, cfg);
    CHECK(dispersed.x.cwiseAbs2().maxCoeff() < 0.1);
    const auto f = cdc_design(cfg, dispersed.sample_rate(), 556);
    CHECK(f.taps.size() == 556);
    CHECK(f.total_dispersion == doctest::Approx(4.2 * 1190.0));
    const CVec back = apply_fir(dispersed.x, f.taps);
    CHECK(back.cwiseAbs2().maxCoeff() / back.squaredNorm() > 0.99);
  }

  SUBCASE("magnitude response stays flat in band") {
    const LinkConfig cfg = linear_noiseless();
    const auto f = cdc_design(cfg, 68e9, 556);
    CVec padded = CVec::Zero(8192);
    padded.head(556) = f.taps;
    Fft fft;
    const CVec resp = fft.forward(padded);
    double worst = 0.0;
    for (Index k = 0; k < 8192; ++k) {
      const Index kk = k < 4096 ? k : k - 8192;
      if (std::abs(kk) * 68e9 / 8192 <= 0.55 * 34e9) {
        worst = std::max(worst, std::abs(20.0 * std::log10(std::abs(resp(k)))));
      }
    }
    CHECK(worst < 0.5);
  }

  SUBCASE("rejects a tiny filter") { CHECK_THROWS_AS(cdc_design(LinkConfig{}, 68e9, 2), std::invalid_argument); }
}

TEST_CASE("apply_fir") {
  const CVec in = random_cvec(4096, 1);

  SUBCASE("unit impulse taps are the identity") {
    CVec taps = CVec::Zero(5);
    taps(2) = 1.0;
    CHECK((apply_fir(in, taps) - in).cwiseAbs().maxCoeff() < 1e-13);
  }

  SUBCASE("a delayed impulse shifts the output") {
    CVec taps = CVec::Zero(9);
    taps(4 + 3) = 1.0;  // 3 samples of delay relative to the center
    const CVec out = apply_fir(in, taps);
    CHECK(out.head(3).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((out.tail(4093) - in.head(4093)).cwiseAbs().maxCoeff() < 1e-13);
  }

  SUBCASE("overlap-save equals direct convolution") {
    for (Index m : {1, 2, 31, 556, 557}) {
      const CVec taps = random_cvec(m, 100 + static_cast<std::uint32_t>(m));
      const CVec fast = apply_fir(in, taps);
      const CVec slow = convolve_direct(in, taps);
      CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  SUBCASE("empty taps") { CHECK_THROWS_AS(apply_fir(in, CVec(0)), std::invalid_argument); }
}

TEST_CASE("CDC inverts a purely dispersive link") {
  const LinkConfig cfg = linear_noiseless();
  const auto frame = modem::make_frame(21, 1 << 12);
  const auto link_out = fiber::propagate_link(transmit(frame, 0.0, 4), cfg);
  const auto soft = receive_cdc(link_out, frame.tx, cfg, RxConfig{});
  const auto m = modem::measure(soft, frame);
  CHECK(m.ber == 0.0);
  CHECK(m.evm < 0.01);
}

TEST_CASE("dbp") {
  SUBCASE("xi = 0 degenerates to frequency-domain CDC") {
    LinkConfig cfg;
    cfg.ase_enabled = false;
    cfg.steps_per_span_sim = 5;
    const auto frame = modem::make_frame(3, 1000);
    const auto link_out = sig::resample_rational(fiber::propagate_link(transmit(frame, 2.0, 2), cfg), 23, 20);
    DbpConfig d;
    d.xi = 0.0;
    const auto a = dbp(link_out, cfg, d);
    const auto b = cdc_frequency_domain(link_out, cfg);
    const double err = std::sqrt(((a.x - b.x).squaredNorm() + (a.y - b.y).squaredNorm()) /
                                 (b.x.squaredNorm() + b.y.squaredNorm()));
    CHECK(err < 1e-9);
  }

  SUBCASE("fine-step DBP inverts the noiseless nonlinear channel") {
    LinkConfig cfg;
    cfg.ase_enabled = false;
    cfg.steps_per_span_sim = 20;
    const auto frame = modem::make_frame(4, 2048);
    const auto tx = transmit(frame, 4.0, 2);
    const auto link_out = fiber::propagate_link(tx, cfg);
    DbpConfig d;
    d.steps_per_span = 20;
    d.sa_per_symbol = Rational(2, 1);
    d.xi = 1.0;
    RxConfig rx_cfg;
    const auto soft = receive_dbp(link_out, frame.tx, cfg, d, rx_cfg);
    CHECK(modem::measure(soft, frame).evm < 0.005);
  }

  SUBCASE("invalid configuration") {
    DbpConfig d;
    d.steps_per_span = 0;
    CHECK_THROWS_AS(d.validate(), std::invalid_argument);
    d = DbpConfig{};
    d.xi = 2.0;
    CHECK_THROWS_AS(d.validate(), std::invalid_argument);
  }
}

TEST_CASE("optimize_dbp_xi") {
  LinkConfig cfg;
  cfg.ase_enabled = false;
  cfg.steps_per_span_sim = 10;
  cfg.n_spans = 4;
  const auto frame = modem::make_frame(8, 2048);
  ValidationCapture cap{fiber::propagate_link(transmit(frame, 6.0, 2), cfg), frame, 0.0, RngStream{1, 1}};
  DbpConfig d;
  d.steps_per_span = 10;
  d.sa_per_symbol = Rational(2, 1);
  RxConfig rx_cfg;

  std::vector<double> grid;
  for (int i = 0; i <= 30; ++i) grid.push_back(0.05 * i);
  const double xi = optimize_dbp_xi(cap, cfg, d, rx_cfg, grid);
  CHECK(xi == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::find(grid.begin(), grid.end(), xi) != grid.end());
  CHECK(optimize_dbp_xi(cap, cfg, d, rx_cfg, {0.0}) == 0.0);
  CHECK_THROWS_AS(optimize_dbp_xi(cap, cfg, d, rx_cfg, {}), std::invalid_argument);
}

TEST_CASE("normalize_to_reference") {
  const CVec tx = modem::make_frame(2, 500).tx.x;
  CHECK((normalize_to_reference(CVec(2.0 * tx), tx) - tx).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((normalize_to_reference(CVec(Complex(0, 1) * tx), tx) - tx).cwiseAbs().maxCoeff() < 1e-12);

  const CVec rx = random_cvec(500, 3);
  const CVec out = normalize_to_reference(rx, tx);
  CHECK(std::abs(rx.dot(CVec(tx - out))) < 1e-10);  // residual orthogonal to rx
  const CVec twice = normalize_to_reference(out, tx);
  CHECK((twice - out).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(normalize_to_reference(CVec::Zero(500), tx), std::invalid_argument);
  CHECK_THROWS_AS(normalize_to_reference(CVec(rx.head(3)), tx), std::invalid_argument);
}

TEST_CASE("add_transceiver_noise") {
  const Index n = 1 << 16;
  DualPolSymbols zero{CVec::Zero(n), CVec::Zero(n)};
  const auto same = add_transceiver_noise(zero, 0.0, RngStream{1, 2});
  CHECK(same.x.cwiseAbs().maxCoeff() == 0.0);

  const double sigma2 = 0.05;
  const auto noisy = add_transceiver_noise(zero, sigma2, RngStream{1, 2});
  // Sample variance of |n|^2 with n complex Gaussian has std sigma2 / sqrt(N).
  const double bound = 3.0 * sigma2 / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(noisy.x.squaredNorm() / n - sigma2) < bound);
  CHECK(std::abs(noisy.y.squaredNorm() / n - sigma2) < bound);

  const auto again = add_transceiver_noise(zero, sigma2, RngStream{1, 2});
  CHECK(again.x == noisy.x);
  CHECK_THROWS_AS(add_transceiver_noise(zero, -1.0, RngStream{}), std::invalid_argument);
}

TEST_CASE("calibrate_transceiver_noise") {
  const auto frame = modem::make_frame(12, 1 << 13);
  // Start from a channel with mild impairment so the noiseless Q is finite.
  const auto base = add_transceiver_noise(frame.tx, 0.02, RngStream{9, 0});
  auto q_of = [&](double sigma2) {
    return modem::measure(add_transceiver_noise(base, sigma2, RngStream{9, 1}), frame).q_db;
  };

  const double q0 = q_of(0.0);
  CHECK(calibrate_transceiver_noise(q0, q_of) < 1e-8);

  const double target = q0 - 3.0;
  const double sigma2 = calibrate_transceiver_noise(target, q_of);
  CHECK(sigma2 > 0.0);
  CHECK(std::abs(q_of(sigma2) - target) < 0.05);
  CHECK(q_of(2.0 * sigma2) < q_of(sigma2));

  CHECK_THROWS_AS(calibrate_transceiver_noise(q0 + 1.0, q_of), std::domain_error);
}
