#include "doctest.h"

#include "ceq/fft.hpp"
#include "ceq/fiberlink.hpp"
#include "ceq/modem.hpp"
#include "ceq/sigkit.hpp"

#include <cmath>

using namespace ceq;
using namespace ceq::fiber;

namespace {

DualPolWaveform shaped_frame(std::uint32_t seed, Index n_sym, double power_dbm, int sps = 4) {
  const auto frame = modem::make_frame(seed, n_sym);
  const auto rrc = sig::RrcFilter::design(0.1, 64, sps);
  return sig::pulse_shape(frame.tx, rrc, sig::dbm_to_watts(power_dbm), 34e9);
}

LinkConfig noiseless_linear() {
  LinkConfig cfg;
  cfg.gamma = 0.0;
  cfg.ase_enabled = false;
  return cfg;
}

double waveform_evm(const DualPolWaveform& a, const DualPolWaveform& ref) {
  const double err = (a.x - ref.x).squaredNorm() + (a.y - ref.y).squaredNorm();
  return std::sqrt(err / (ref.x.squaredNorm() + ref.y.squaredNorm()));
}

}  // namespace

TEST_CASE("beta2_from_d") {
  // -D lambda^2 / (2 pi c) with c = 2.99792458e8 m/s, evaluated by hand in SI.
  const double c = 2.99792458e8;
  auto by_hand = [&](double d) {
    const double d_si = d * 1e-12 / (1e-9 * 1e3);  // s/m^2
    const double lambda = 1550e-9;
    const double b2_si = -d_si * lambda * lambda / (2 * std::numbers::pi * c);  // s^2/m
    return b2_si / 1e-24 * 1e3;                                                // ps^2/km
  };
  CHECK(beta2_from_d(4.2, 1550) == doctest::Approx(-5.36).epsilon(0.01 / 5.36));
  CHECK(beta2_from_d(4.2, 1550) == doctest::Approx(by_hand(4.2)).epsilon(1e-12));
  CHECK(beta2_from_d(0.0, 1550) == 0.0);
  CHECK(std::abs(beta2_from_d(17.0, 1550) + 21.7) < 0.1);
  CHECK(beta2_from_d(17.0, 1550) == doctest::Approx(by_hand(17.0)).epsilon(1e-12));
}

TEST_CASE("ssfm_span: lossless linear fiber is all-pass") {
  LinkConfig cfg = noiseless_linear();
  cfg.alpha_db_km = 0.0;
  const auto in = shaped_frame(1, 512, 0.0);
  const auto out = ssfm_span(in, cfg);
  Fft fft;
  const RVec mag_in = fft.forward(in.x).cwiseAbs();
  const RVec mag_out = fft.forward(out.x).cwiseAbs();
  CHECK((mag_out - mag_in).cwiseAbs().maxCoeff() / mag_in.maxCoeff() < 1e-10);
}

TEST_CASE("ssfm_span: self-phase modulation of a CW field") {
  LinkConfig cfg;
  cfg.alpha_db_km = 0.0;
  cfg.dispersion_D = 0.0;
  cfg.gamma = 2.0;
  cfg.span_km = 1.0;
  cfg.steps_per_span_sim = 1;
  const Index n = 64;
  const double p_total = 1e-3;
  DualPolWaveform cw{CVec::Constant(n, Complex(std::sqrt(0.6 * p_total), 0.0)),
                     CVec::Constant(n, Complex(0.0, std::sqrt(0.4 * p_total))), 34e9, Rational(4, 1)};
  const auto out = ssfm_span(cw, cfg);
  const double expected = (8.0 / 9.0) * 2.0 * 1e-3 * 1.0;
  CHECK(expected == doctest::Approx(1.778e-3).epsilon(1e-3));
  for (Index i = 0; i < n; ++i) {
    CHECK(std::arg(out.x(i) / cw.x(i)) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(std::arg(out.y(i) / cw.y(i)) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(std::abs(out.x(i)) == doctest::Approx(std::abs(cw.x(i))).epsilon(1e-12));
  }
}

TEST_CASE("ssfm_span: attenuation only") {
  LinkConfig cfg = noiseless_linear();
  const auto in = shaped_frame(2, 256, 0.0);
  const auto out = ssfm_span(in, cfg);
  CHECK(mean_power(out) / mean_power(in) == doctest::Approx(std::pow(10.0, -15.75 / 10.0)).epsilon(1e-12));
}

TEST_CASE("ssfm_span rejects non-finite samples") {
  LinkConfig cfg;
  DualPolWaveform bad{CVec::Ones(8), CVec::Ones(8), 34e9, Rational(4, 1)};
  bad.y(3) = Complex(INFINITY, 0.0);
  CHECK_THROWS_AS(ssfm_span(bad, cfg), std::invalid_argument);
}

TEST_CASE("edfa") {
  const auto in = shaped_frame(3, 128, -3.0);
  const double nu = LinkConfig{}.carrier_hz();

  SUBCASE("0 dB gain is the identity") {
    const auto out = edfa(in, 0.0, 4.5, nu, RngStream{1, 0});
    CHECK(out.x == in.x);
    CHECK(out.y == in.y);
  }

  SUBCASE("ASE power follows the closed form") {
    const double closed = (std::pow(10.0, 1.575) - 1.0) * 6.62607e-34 * 1.93414e14 * std::pow(10.0, 0.45) / 2.0 * 68e9;
    CHECK(ase_power_per_pol(15.75, 4.5, nu, 68e9) == doctest::Approx(closed).epsilon(1e-5));
    CHECK(nu == doctest::Approx(1.93414e14).epsilon(1e-5));

    const Index n = 1 << 17;
    DualPolWaveform zero{CVec::Zero(n), CVec::Zero(n), 34e9, Rational(2, 1)};
    const auto out = edfa(zero, 15.75, 4.5, nu, RngStream{7, 0});
    const double expected = ase_power_per_pol(15.75, 4.5, nu, 68e9);
    const double sigma_rel = 1.0 / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(out.x.squaredNorm() / n / expected - 1.0) < 4 * sigma_rel);
    CHECK(std::abs(out.y.squaredNorm() / n / expected - 1.0) < 4 * sigma_rel);
  }

  SUBCASE("noise is seed-deterministic") {
    const auto a = edfa(in, 15.75, 4.5, nu, RngStream{5, 2});
    const auto b = edfa(in, 15.75, 4.5, nu, RngStream{5, 2});
    const auto c = edfa(in, 15.75, 4.5, nu, RngStream{5, 3});
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);
    CHECK(a.x != c.x);
  }

  SUBCASE("negative gain is rejected") { CHECK_THROWS_AS(edfa(in, -1.0, 4.5, nu, RngStream{}), std::invalid_argument); }
}

TEST_CASE("propagate_link: linear noiseless closed form") {
  const LinkConfig cfg = noiseless_linear();
  const auto in = shaped_frame(4, 1024, 0.0);
  const auto out = propagate_link(in, cfg);
  CHECK(mean_power(out) / mean_power(in) == doctest::Approx(1.0).epsilon(1e-9));

  const CVec h = dispersion_response(in.size(), in.sample_rate(), cfg.beta2(), 17 * 70.0);
  Fft fft;
  const CVec expect_x = fft.inverse(CVec(fft.forward(in.x).cwiseProduct(h)));
  const CVec expect_y = fft.inverse(CVec(fft.forward(in.y).cwiseProduct(h)));
  const double scale = std::sqrt(mean_power(in));
  CHECK((out.x - expect_x).cwiseAbs().maxCoeff() / scale < 1e-9);
  CHECK((out.y - expect_y).cwiseAbs().maxCoeff() / scale < 1e-9);
}

TEST_CASE("propagate_link: x/y swap symmetry") {
  LinkConfig cfg;
  cfg.ase_enabled = false;
  cfg.n_spans = 3;
  cfg.steps_per_span_sim = 10;
  const auto in = shaped_frame(5, 512, 4.0);
  DualPolWaveform swapped = in;
  std::swap(swapped.x, swapped.y);
  const auto a = propagate_link(in, cfg);
  const auto b = propagate_link(swapped, cfg);
  CHECK(a.x == b.y);
  CHECK(a.y == b.x);
}

TEST_CASE("propagate_link: step-size convergence at 0 dBm") {
  LinkConfig cfg;
  cfg.ase_enabled = false;
  const auto in = shaped_frame(6, 2048, 0.0);
  auto run = [&](int steps) {
    LinkConfig c = cfg;
    c.steps_per_span_sim = steps;
    return propagate_link(in, c);
  };
  const auto ref = run(200);
  const auto k50 = run(50);
  const auto k100 = run(100);
  const double evm50 = waveform_evm(k50, ref);
  const double evm100 = waveform_evm(k100, ref);
  CHECK(std::abs(evm50 - evm100) < 1e-3);

  double prev = INFINITY;
  for (int k : {10, 25, 50, 100}) {
    const double e = waveform_evm(run(k), run(2 * k));
    CHECK(e < prev);
    prev = e;
  }
}

TEST_CASE("propagate_link: ASE accumulation from a dark input") {
  LinkConfig cfg;
  cfg.steps_per_span_sim = 2;
  const Index n = 1 << 15;
  DualPolWaveform dark{CVec::Zero(n), CVec::Zero(n), 34e9, Rational(4, 1)};
  const auto out = propagate_link(dark, cfg);
  const double per_amp = ase_power_per_pol(cfg.span_loss_db(), cfg.nf_db, cfg.carrier_hz(), dark.sample_rate());
  const double measured = 0.5 * (out.x.squaredNorm() + out.y.squaredNorm()) / n;
  CHECK(measured / (17.0 * per_amp) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("LinkConfig validation") {
  LinkConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.n_spans = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = LinkConfig{};
  cfg.dispersion_D = -3.0;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.beta2() > 0.0);
  cfg.steps_per_span_sim = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
