#include "ceq/bench/sweep.hpp"

#include "ceq/bench/parallel.hpp"
#include "ceq/fft.hpp"
#include "ceq/sigkit.hpp"
#include "ceq/waveform_io.hpp"

#include "json.hpp"

#include <cmath>
#include <cstring>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <unordered_set>

namespace ceq::bench {

namespace fs = std::filesystem;
using json = nlohmann::json;

int resolve_threads(int requested, bool deterministic) {
  if (deterministic) return 1;
  if (const char* env = std::getenv("CEQ_THREADS"); env != nullptr && *env != '\0') {
    const int n = std::atoi(env);
    if (n < 1) throw std::invalid_argument("CEQ_THREADS must be a positive integer");
    return n;
  }
  if (requested > 0) return requested;
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

std::string_view to_string(Role r) {
  switch (r) {
    case Role::Pool: return "pool";
    case Role::Val: return "val";
    case Role::Test: return "test";
  }
  return "?";
}

namespace {

std::int64_t centi_dbm(double power_dbm) { return std::llround(power_dbm * 100.0); }

std::uint64_t tag(Role role, double power_dbm) {
  return (static_cast<std::uint64_t>(role) + 1) << 32 | static_cast<std::uint32_t>(centi_dbm(power_dbm) + 1000000);
}

fiber::LinkConfig link_at(const RunConfig& cfg, double power_dbm, std::uint64_t noise_seed) {
  fiber::LinkConfig link = cfg.link;
  link.launch_power_dbm = power_dbm;
  link.noise_seed = noise_seed;
  return link;
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

std::uint64_t fnv_mix(std::uint64_t h, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int b = 0; b < 8; ++b) {
    h ^= (bits >> (8 * b)) & 0xff;
    h *= kFnvPrime;
  }
  return h;
}

fs::path file_of(const fs::path& dir, Role role, const char* kind) {
  return dir / (std::string(to_string(role)) + "_" + kind + ".ceqw");
}

json q_to_json(double q) { return std::isfinite(q) ? json(q) : json(nullptr); }

}  // namespace

std::string power_tag(double power_dbm) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%+.2f", static_cast<double>(centi_dbm(power_dbm)) / 100.0);
  return buf;
}

std::uint32_t frame_seed(const Seeds& seeds, Role role, double power_dbm) {
  auto gen = RngStream{seeds.data, tag(role, power_dbm)}.engine();
  return static_cast<std::uint32_t>(gen() >> 32);
}

std::uint64_t ase_seed(const Seeds& seeds, Role role, double power_dbm) {
  return RngStream{seeds.noise, tag(role, power_dbm)}.child(0).engine()();
}

RngStream transceiver_stream(const Seeds& seeds, Role role, double power_dbm) {
  return RngStream{seeds.noise, tag(role, power_dbm)}.child(1);
}

Index dataset_symbols(const RunConfig& cfg, Role role) {
  switch (role) {
    case Role::Pool: return cfg.sizes.pool;
    case Role::Val: return cfg.sizes.val;
    case Role::Test: return cfg.sizes.test;
  }
  return 0;
}

Dataset generate_dataset(const RunConfig& cfg, double power_dbm, Role role) {
  Dataset ds;
  ds.frame = modem::make_frame(frame_seed(cfg.seeds, role, power_dbm), dataset_symbols(cfg, role));
  const auto link = link_at(cfg, power_dbm, ase_seed(cfg.seeds, role, power_dbm));
  const auto rrc = sig::RrcFilter::design(cfg.rx.rrc_rolloff, cfg.rx.rrc_span, cfg.sim_sps);
  const auto wave = sig::pulse_shape(ds.frame.tx, rrc, sig::dbm_to_watts(power_dbm), cfg.symbol_rate);
  auto out = fiber::propagate_link(wave, link);
  ds.cdc = rx::receive_cdc(out, ds.frame.tx, link, cfg.rx);
  if (role != Role::Pool) ds.link_out = std::move(out);
  return ds;
}

fs::path dataset_dir(const RunConfig& cfg, double power_dbm) { return cfg.output_dir / "data" / power_tag(power_dbm); }

void save_dataset(const fs::path& dir, Role role, const Dataset& ds, double symbol_rate) {
  fs::create_directories(dir);
  io::save_symbols(file_of(dir, role, "tx"), ds.frame.tx, symbol_rate);
  io::save_symbols(file_of(dir, role, "cdc"), ds.cdc, symbol_rate);
  if (ds.has_link()) io::save_waveform(file_of(dir, role, "link"), ds.link_out);
}

Dataset load_dataset(const fs::path& dir, Role role) {
  Dataset ds;
  ds.frame = modem::frame_from_symbols(io::load_symbols(file_of(dir, role, "tx")));
  ds.cdc = io::load_symbols(file_of(dir, role, "cdc"));
  if (ds.cdc.size() != ds.frame.n_symbols) throw std::runtime_error("dataset " + dir.string() + ": length mismatch");
  if (fs::exists(file_of(dir, role, "link"))) ds.link_out = io::load_waveform(file_of(dir, role, "link"));
  return ds;
}

bool dataset_exists(const fs::path& dir, Role role) {
  return fs::exists(file_of(dir, role, "tx")) && fs::exists(file_of(dir, role, "cdc")) &&
         (role == Role::Pool || fs::exists(file_of(dir, role, "link")));
}

std::vector<std::uint64_t> window_hashes(const DualPolSymbols& tx, Index window, Index stride) {
  std::vector<std::uint64_t> out;
  for (Index s = 0; s + window <= tx.size(); s += stride) {
    std::uint64_t h = kFnvOffset;
    for (Index i = s; i < s + window; ++i) {
      h = fnv_mix(h, tx.x(i).real());
      h = fnv_mix(h, tx.x(i).imag());
      h = fnv_mix(h, tx.y(i).real());
      h = fnv_mix(h, tx.y(i).imag());
    }
    out.push_back(h);
  }
  return out;
}

Calibration calibrate(const RunConfig& cfg, const Dataset& test) {
  Calibration c;
  c.power_dbm = cfg.calibration.power_dbm;
  const auto stream = transceiver_stream(cfg.seeds, Role::Test, c.power_dbm);
  auto q_of = [&](double s2) { return modem::measure(rx::add_transceiver_noise(test.cdc, s2, stream), test.frame).q_db; };
  if (cfg.calibration.enabled) {
    rx::CalibrationOptions opts;
    opts.tolerance_db = cfg.calibration.tolerance_db;
    c.sigma2 = rx::calibrate_transceiver_noise(cfg.calibration.q_db, q_of, opts);
  }
  c.q_db = q_of(c.sigma2);
  return c;
}

void save_calibration(const fs::path& path, const Calibration& c) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << json{{"power_dbm", c.power_dbm}, {"sigma2", c.sigma2}, {"q_db", q_to_json(c.q_db)}}.dump(2) << "\n";
}

Calibration load_calibration(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open calibration: " + path.string());
  const json j = json::parse(in);
  Calibration c;
  c.power_dbm = j.at("power_dbm").get<double>();
  c.sigma2 = j.at("sigma2").get<double>();
  c.q_db = j.at("q_db").is_null() ? INFINITY : j.at("q_db").get<double>();
  return c;
}

DualPolSymbols noisy_cdc(const RunConfig& cfg, const Dataset& ds, Role role, double power_dbm, double sigma2) {
  return rx::add_transceiver_noise(ds.cdc, sigma2, transceiver_stream(cfg.seeds, role, power_dbm));
}

void write_quantization_csv(std::ostream& out, const std::vector<QuantizationRow>& rows) {
  out << "arch,power_dbm,q_float_db,q_fixed_db,delta_db\n";
  char line[160];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%s,%.2f,%.6f,%.6f,%.6f\n", std::string(nn::to_string(r.arch)).c_str(),
                  r.power_dbm, r.q_float_db, r.q_fixed_db, r.q_float_db - r.q_fixed_db);
    out << line;
  }
}

void write_xi_csv(std::ostream& out, const std::vector<XiRow>& rows) {
  out << "power_dbm,xi\n";
  char line[64];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%.2f,%.2f\n", r.power_dbm, r.xi);
    out << line;
  }
}

Bench::Bench(RunConfig cfg, RunOptions opts) : cfg_(std::move(cfg)), opts_(opts) {
  cfg_.validate();
  threads_ = resolve_threads(opts_.threads, opts_.deterministic);
  enable_threaded_fft_planning();
}

void Bench::log(const std::string& line) const {
  static std::mutex m;
  if (opts_.log == nullptr) return;
  std::lock_guard lock(m);
  *opts_.log << line << std::endl;
}

const nn::EqArch& Bench::arch_of(nn::ArchKind kind) const {
  return kind == nn::ArchKind::BILSTM ? cfg_.bilstm : cfg_.cnn;
}

std::vector<nn::ArchKind> Bench::nn_archs() const {
  std::vector<nn::ArchKind> out;
  if (cfg_.has(modem::EqualizerId::BILSTM)) out.push_back(nn::ArchKind::BILSTM);
  if (cfg_.has(modem::EqualizerId::CNN)) out.push_back(nn::ArchKind::DEEP_CNN);
  return out;
}

std::vector<double> Bench::data_powers() const {
  std::set<std::int64_t> seen;
  std::vector<double> out;
  for (double p : cfg_.sweep_powers) {
    if (seen.insert(centi_dbm(p)).second) out.push_back(p);
  }
  if (cfg_.calibration.enabled && seen.insert(centi_dbm(cfg_.calibration.power_dbm)).second) {
    out.push_back(cfg_.calibration.power_dbm);
  }
  return out;
}

Dataset Bench::dataset(double power_dbm, Role role) const {
  const auto dir = dataset_dir(cfg_, power_dbm);
  if (!dataset_exists(dir, role)) {
    throw std::runtime_error("missing dataset " + std::string(to_string(role)) + " at " + dir.string() + "; run generate");
  }
  return load_dataset(dir, role);
}

void Bench::generate() {
  const bool need_val = cfg_.has(modem::EqualizerId::DBP) || !nn_archs().empty();
  const bool need_pool = !nn_archs().empty();
  std::vector<std::pair<double, Role>> jobs;
  std::set<std::uint32_t> seeds;
  std::size_t n_sets = 0;
  for (double p : data_powers()) {
    const bool in_sweep = std::find(cfg_.sweep_powers.begin(), cfg_.sweep_powers.end(), p) != cfg_.sweep_powers.end();
    std::vector<Role> roles{Role::Test};
    if (in_sweep && need_val) roles.push_back(Role::Val);
    if (in_sweep && need_pool) roles.push_back(Role::Pool);
    for (Role r : roles) {
      seeds.insert(frame_seed(cfg_.seeds, r, p));
      ++n_sets;
      if (!dataset_exists(dataset_dir(cfg_, p), r)) jobs.emplace_back(p, r);
    }
  }
  if (seeds.size() != n_sets) throw std::runtime_error("generate: two datasets share a bit-stream seed");

  log("generate: " + std::to_string(jobs.size()) + " dataset(s) on " + std::to_string(threads_) + " thread(s)");
  parallel_for(jobs.size(), threads_, [&](std::size_t i) {
    const auto [p, role] = jobs[i];
    save_dataset(dataset_dir(cfg_, p), role, generate_dataset(cfg_, p, role), cfg_.symbol_rate);
    log("  " + power_tag(p) + " " + std::string(to_string(role)) + " done");
  });

  if (need_pool) {
    std::unordered_set<std::uint64_t> pool_windows;
    const Index w = std::max(cfg_.bilstm.n_in_symbols, cfg_.cnn.n_in_symbols);
    for (double p : cfg_.sweep_powers) {
      for (auto h : window_hashes(dataset(p, Role::Pool).frame.tx, w, 1)) pool_windows.insert(h);
    }
    for (double p : data_powers()) {
      for (Role r : {Role::Test, Role::Val}) {
        if (!dataset_exists(dataset_dir(cfg_, p), r)) continue;
        for (auto h : window_hashes(dataset(p, r).frame.tx, w, 1)) {
          if (pool_windows.count(h)) {
            throw std::runtime_error("generate: a " + std::string(to_string(r)) + " window at " + power_tag(p) +
                                     " also occurs in a training pool");
          }
        }
      }
    }
    log("generate: evaluation windows are disjoint from the training pools");
  }

  Calibration c;
  c.power_dbm = cfg_.calibration.power_dbm;
  if (cfg_.calibration.enabled) c = calibrate(cfg_, dataset(cfg_.calibration.power_dbm, Role::Test));
  fs::create_directories(cfg_.output_dir);
  save_calibration(cfg_.output_dir / "calibration.json", c);
  char buf[128];
  std::snprintf(buf, sizeof buf, "calibration: sigma2 = %.6g, CDC Q = %.3f dB at %.2f dBm", c.sigma2, c.q_db, c.power_dbm);
  log(buf);
}

Calibration Bench::calibration() {
  const auto path = cfg_.output_dir / "calibration.json";
  if (!fs::exists(path)) generate();
  return load_calibration(path);
}

fs::path Bench::model_path(nn::ArchKind arch, nn::Pol pol, double power_dbm) const {
  return cfg_.output_dir / "models" /
         (std::string(nn::to_string(arch)) + (pol == nn::Pol::X ? "_x_" : "_y_") + power_tag(power_dbm) + ".ceqn");
}

nn::TrainConfig Bench::train_config(nn::ArchKind kind, nn::Pol pol, double power_dbm, double sigma2) const {
  nn::TrainConfig tc = cfg_.nn.train;
  const std::uint64_t id = static_cast<std::uint64_t>(kind) << 40 | static_cast<std::uint64_t>(pol) << 36 |
                           static_cast<std::uint32_t>(centi_dbm(power_dbm) + 1000000);
  tc.seed = RngStream{cfg_.seeds.train, id}.engine()();
  tc.augment_sigma2 = cfg_.nn.augment_noise ? sigma2 : 0.0;
  return tc;
}

namespace {

struct NnTask {
  nn::ArchKind arch;
  nn::Pol pol;
  double power;
};

const modem::Bits& bits_of(const modem::SymbolFrame& f, nn::Pol pol) { return pol == nn::Pol::X ? f.bits_x : f.bits_y; }

}  // namespace

std::vector<QuantizationRow> Bench::train() {
  const double sigma2 = calibration().sigma2;
  std::vector<double> powers{cfg_.max_power()};
  if (cfg_.nn.retrain_all) powers = cfg_.sweep_powers;
  std::vector<NnTask> tasks;
  for (auto a : nn_archs()) {
    for (double p : powers) {
      for (auto pol : {nn::Pol::X, nn::Pol::Y}) tasks.push_back({a, pol, p});
    }
  }
  fs::create_directories(cfg_.output_dir / "models");
  struct BerPair {
    double flt = 0, fix = 0;
  };
  std::vector<BerPair> bers(tasks.size());
  log("train: " + std::to_string(tasks.size()) + " model(s)");

  parallel_for(tasks.size(), threads_, [&](std::size_t i) {
    const auto& t = tasks[i];
    const auto& arch = arch_of(t.arch);
    const Dataset pool = dataset(t.power, Role::Pool);
    const Dataset val = dataset(t.power, Role::Val);
    const Dataset test = dataset(t.power, Role::Test);
    const nn::TrainConfig tc = train_config(t.arch, t.pol, t.power, sigma2);
    const DualPolSymbols pool_in = tc.augment_sigma2 > 0 ? pool.cdc : noisy_cdc(cfg_, pool, Role::Pool, t.power, sigma2);
    const auto train_set = nn::make_dataset(pool_in, pool.frame.tx, t.pol);
    const auto val_set = nn::make_dataset(noisy_cdc(cfg_, val, Role::Val, t.power, sigma2), val.frame.tx, t.pol);
    const auto init = nn::build_model(arch, RngStream{tc.seed, 0}.engine()());
    const auto result = nn::train(init, train_set, val_set, tc);

    const auto blob = fx::quantize_weights(result.model, cfg_.nn.fraction_bits);
    for (const auto& w : blob.warnings) log("  warning: " + w);
    const auto path = model_path(t.arch, t.pol, t.power);
    fx::save_blob(path, blob);
    std::ofstream hist(fs::path(path).replace_extension("").string() + "_history.csv");
    nn::write_history_csv(hist, result.history);

    const auto test_in = noisy_cdc(cfg_, test, Role::Test, t.power, sigma2);
    const auto& ref = bits_of(test.frame, t.pol);
    bers[i].flt = modem::ber(modem::demap_16qam_hard(nn::equalize_periodic(result.model, test_in, t.pol)), ref);
    const auto fixed = fx::dequantize(blob, arch);
    bers[i].fix = modem::ber(modem::demap_16qam_hard(nn::equalize_periodic(fixed, test_in, t.pol)), ref);
    char buf[200];
    std::snprintf(buf, sizeof buf, "  %s %s %s: best epoch %d, val BER %.4e", std::string(nn::to_string(t.arch)).c_str(),
                  t.pol == nn::Pol::X ? "x" : "y", power_tag(t.power).c_str(), result.best_epoch, result.best.ber);
    log(buf);
  });

  std::vector<QuantizationRow> rows;
  for (std::size_t i = 0; i + 1 < tasks.size(); i += 2) {
    QuantizationRow r;
    r.arch = tasks[i].arch;
    r.power_dbm = tasks[i].power;
    r.q_float_db = modem::q_factor_db_or_inf(0.5 * (bers[i].flt + bers[i + 1].flt));
    r.q_fixed_db = modem::q_factor_db_or_inf(0.5 * (bers[i].fix + bers[i + 1].fix));
    rows.push_back(r);
  }
  std::ofstream out(cfg_.output_dir / "quantization.csv");
  write_quantization_csv(out, rows);
  return rows;
}

void Bench::transfer() {
  if (cfg_.nn.retrain_all) {
    log("transfer: skipped, every power was trained from scratch");
    return;
  }
  const double sigma2 = calibration().sigma2;
  const double pmax = cfg_.max_power();
  std::vector<NnTask> tasks;
  for (auto a : nn_archs()) {
    for (double p : cfg_.sweep_powers) {
      if (centi_dbm(p) == centi_dbm(pmax)) continue;
      for (auto pol : {nn::Pol::X, nn::Pol::Y}) tasks.push_back({a, pol, p});
    }
  }
  log("transfer: " + std::to_string(tasks.size()) + " model(s), " + std::to_string(cfg_.nn.transfer_epochs) +
      " epoch(s) each");
  parallel_for(tasks.size(), threads_, [&](std::size_t i) {
    const auto& t = tasks[i];
    const auto src = model_path(t.arch, t.pol, pmax);
    if (!fs::exists(src)) throw std::runtime_error("missing trained model " + src.string() + "; run train");
    const auto start = fx::dequantize(fx::load_blob(src), arch_of(t.arch));
    const Dataset pool = dataset(t.power, Role::Pool);
    const Dataset val = dataset(t.power, Role::Val);
    const nn::TrainConfig tc = train_config(t.arch, t.pol, t.power, sigma2);
    const DualPolSymbols pool_in = tc.augment_sigma2 > 0 ? pool.cdc : noisy_cdc(cfg_, pool, Role::Pool, t.power, sigma2);
    const auto result =
        nn::transfer_fit(start, nn::make_dataset(pool_in, pool.frame.tx, t.pol),
                         nn::make_dataset(noisy_cdc(cfg_, val, Role::Val, t.power, sigma2), val.frame.tx, t.pol), tc,
                         cfg_.nn.transfer_epochs);
    const auto blob = fx::quantize_weights(result.model, cfg_.nn.fraction_bits);
    for (const auto& w : blob.warnings) log("  warning: " + w);
    fx::save_blob(model_path(t.arch, t.pol, t.power), blob);
  });
}

std::vector<modem::QReport> Bench::evaluate() {
  const double sigma2 = calibration().sigma2;
  const auto& powers = cfg_.sweep_powers;
  std::vector<std::vector<modem::QReport>> per_power(powers.size());
  std::vector<XiRow> xi_rows(powers.size());
  log("evaluate: " + std::to_string(powers.size()) + " power(s)");

  parallel_for(powers.size(), threads_, [&](std::size_t i) {
    const double p = powers[i];
    const Dataset test = dataset(p, Role::Test);
    const auto test_in = noisy_cdc(cfg_, test, Role::Test, p, sigma2);
    auto report = [&](modem::EqualizerId id, const DualPolSymbols& est) {
      const auto m = modem::measure(est, test.frame);
      per_power[i].push_back({id, p, m.ber, m.q_db, m.evm, m.n_symbols});
    };
    for (auto id : cfg_.equalizers) {
      if (id == modem::EqualizerId::CDC) {
        report(id, test_in);
      } else if (id == modem::EqualizerId::DBP) {
        const Dataset val = dataset(p, Role::Val);
        const auto link = link_at(cfg_, p, 0);
        rx::ValidationCapture cap{val.link_out, val.frame, sigma2, transceiver_stream(cfg_.seeds, Role::Val, p)};
        rx::DbpConfig dcfg = cfg_.dbp;
        dcfg.xi = rx::optimize_dbp_xi(cap, link, dcfg, cfg_.rx, cfg_.xi_grid());
        xi_rows[i] = {p, dcfg.xi};
        const auto soft = rx::receive_dbp(test.link_out, test.frame.tx, link, dcfg, cfg_.rx);
        report(id, rx::add_transceiver_noise(soft, sigma2, transceiver_stream(cfg_.seeds, Role::Test, p)));
      } else {
        const auto kind = id == modem::EqualizerId::BILSTM ? nn::ArchKind::BILSTM : nn::ArchKind::DEEP_CNN;
        DualPolSymbols est;
        for (auto pol : {nn::Pol::X, nn::Pol::Y}) {
          const auto path = model_path(kind, pol, p);
          if (!fs::exists(path)) throw std::runtime_error("missing trained model " + path.string() + "; run train");
          const auto model = fx::dequantize(fx::load_blob(path), arch_of(kind));
          (pol == nn::Pol::X ? est.x : est.y) = nn::equalize_periodic(model, test_in, pol);
        }
        report(id, est);
      }
    }
    log("  " + power_tag(p) + " done");
  });

  std::vector<modem::QReport> rows;
  for (auto& v : per_power) rows.insert(rows.end(), v.begin(), v.end());
  modem::sort_reports(rows);
  fs::create_directories(cfg_.output_dir);
  std::ofstream out(cfg_.output_dir / "qreport.csv");
  modem::write_qreport_csv(out, rows);
  if (cfg_.has(modem::EqualizerId::DBP)) {
    std::sort(xi_rows.begin(), xi_rows.end(), [](const XiRow& a, const XiRow& b) { return a.power_dbm < b.power_dbm; });
    std::ofstream xo(cfg_.output_dir / "dbp_xi.csv");
    write_xi_csv(xo, xi_rows);
  }
  return rows;
}

std::vector<modem::QReport> Bench::sweep() {
  fs::create_directories(cfg_.output_dir);
  {
    std::ofstream out(cfg_.output_dir / "config.json");
    out << dump_run_config(cfg_) << "\n";
  }
  generate();
  if (!nn_archs().empty()) {
    train();
    transfer();
  }
  return evaluate();
}

}  // namespace ceq::bench
