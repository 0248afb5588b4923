#include "ceq/bench/config.hpp"

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace ceq::bench {

using json = nlohmann::json;

namespace {

/// Reads known keys out of one JSON object and rejects everything else.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw std::invalid_argument(path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument(path_ + "." + key + ": " + e.what());
    }
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  Section child(const char* key) {
    seen_.insert(key);
    return Section(j_.at(key), path_ + "." + key);
  }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw std::invalid_argument(path_ + ": unknown key '" + item.key() + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_link(Section s, fiber::LinkConfig& l) {
  s.get("alpha_db_km", l.alpha_db_km);
  s.get("dispersion_D", l.dispersion_D);
  s.get("gamma", l.gamma);
  s.get("span_km", l.span_km);
  s.get("n_spans", l.n_spans);
  s.get("nf_db", l.nf_db);
  s.get("wavelength_nm", l.wavelength_nm);
  s.get("steps_per_span_sim", l.steps_per_span_sim);
  s.get("ase_enabled", l.ase_enabled);
  s.finish();
}

json write_link(const fiber::LinkConfig& l) {
  return {{"alpha_db_km", l.alpha_db_km}, {"dispersion_D", l.dispersion_D},
          {"gamma", l.gamma},             {"span_km", l.span_km},
          {"n_spans", l.n_spans},         {"nf_db", l.nf_db},
          {"wavelength_nm", l.wavelength_nm}, {"steps_per_span_sim", l.steps_per_span_sim},
          {"ase_enabled", l.ase_enabled}};
}

void read_arch(Section s, nn::EqArch& a) {
  s.get("n_in_symbols", a.n_in_symbols);
  s.get("n_hidden", a.n_hidden);
  s.get("hidden_filters", a.hidden_filters);
  s.get("hidden_kernel", a.hidden_kernel);
  s.get("out_filters", a.out_filters);
  s.get("out_kernel", a.out_kernel);
  s.finish();
  a.n_out_symbols = a.n_in_symbols - a.out_kernel + 1;
}

json write_arch(const nn::EqArch& a) {
  json j = {{"n_in_symbols", a.n_in_symbols}, {"out_filters", a.out_filters}, {"out_kernel", a.out_kernel}};
  if (a.kind == nn::ArchKind::BILSTM) {
    j["n_hidden"] = a.n_hidden;
  } else {
    j["hidden_filters"] = a.hidden_filters;
    j["hidden_kernel"] = a.hidden_kernel;
  }
  return j;
}

}  // namespace

void RunConfig::validate() const {
  link.validate();
  dbp.validate();
  bilstm.validate();
  cnn.validate();
  if (sim_sps < 2) throw std::invalid_argument("sim_sps must be at least 2");
  if (!(symbol_rate > 0)) throw std::invalid_argument("symbol_rate must be positive");
  if (rx.rx_sps < 2 || rx.cdc_taps < 3 || rx.rrc_span < 1) throw std::invalid_argument("invalid rx settings");
  if (sweep_powers.empty()) throw std::invalid_argument("sweep_powers must not be empty");
  if (equalizers.empty()) throw std::invalid_argument("equalizers must not be empty");
  auto sorted = sweep_powers;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("sweep_powers must be distinct");
  }
  if (sizes.pool < bilstm.n_in_symbols || sizes.val < bilstm.n_in_symbols || sizes.test < bilstm.n_in_symbols) {
    throw std::invalid_argument("dataset sizes must hold at least one window");
  }
  if (nn.train.pool_size > sizes.pool) throw std::invalid_argument("train.pool_size exceeds the generated pool");
  nn.train.validate(bilstm);
  nn.train.validate(cnn);
  if (nn.transfer_epochs < 0 || nn.transfer_epochs > 5) throw std::invalid_argument("transfer_epochs must be in [0, 5]");
  if (nn.fraction_bits < 0 || nn.fraction_bits > 31) throw std::invalid_argument("fraction_bits must be in [0, 31]");
  for (double xi : xi_grid()) {
    if (xi < 0 || xi > 1.5) throw std::invalid_argument("dbp_xi_grid values must be in [0, 1.5]");
  }
}

double RunConfig::max_power() const { return *std::max_element(sweep_powers.begin(), sweep_powers.end()); }

std::vector<double> RunConfig::xi_grid() const {
  if (!dbp_xi_grid.empty()) return dbp_xi_grid;
  std::vector<double> g;
  for (int i = 0; i <= 12; ++i) g.push_back(0.1 * i);
  return g;
}

bool RunConfig::has(modem::EqualizerId id) const {
  return std::find(equalizers.begin(), equalizers.end(), id) != equalizers.end();
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  Section s(root, "config");
  if (s.has("link")) read_link(s.child("link"), cfg.link);
  s.get("sim_sps", cfg.sim_sps);
  s.get("symbol_rate", cfg.symbol_rate);
  if (s.has("rx")) {
    Section r = s.child("rx");
    r.get("rx_sps", cfg.rx.rx_sps);
    r.get("cdc_taps", cfg.rx.cdc_taps);
    r.get("rrc_rolloff", cfg.rx.rrc_rolloff);
    r.get("rrc_span", cfg.rx.rrc_span);
    r.finish();
  }
  if (s.has("dbp")) {
    Section d = s.child("dbp");
    d.get("steps_per_span", cfg.dbp.steps_per_span);
    if (d.has("sa_per_symbol")) {
      std::vector<std::int64_t> ratio;
      d.get("sa_per_symbol", ratio);
      if (ratio.size() != 2) throw std::invalid_argument("dbp.sa_per_symbol must be [num, den]");
      cfg.dbp.sa_per_symbol = Rational(ratio[0], ratio[1]);
    }
    d.get("xi_grid", cfg.dbp_xi_grid);
    d.finish();
  }
  s.get("sweep_powers", cfg.sweep_powers);
  if (s.has("equalizers")) {
    std::vector<std::string> names;
    s.get("equalizers", names);
    cfg.equalizers.clear();
    for (const auto& n : names) cfg.equalizers.push_back(modem::parse_equalizer(n));
  }
  if (s.has("bilstm")) read_arch(s.child("bilstm"), cfg.bilstm);
  if (s.has("cnn")) read_arch(s.child("cnn"), cfg.cnn);
  if (s.has("train")) {
    Section t = s.child("train");
    t.get("lr", cfg.nn.train.lr);
    t.get("lr_final", cfg.nn.train.lr_final);
    t.get("batch", cfg.nn.train.batch);
    t.get("epochs", cfg.nn.train.epochs);
    t.get("pool_size", cfg.nn.train.pool_size);
    t.get("epoch_subset", cfg.nn.train.epoch_subset);
    t.get("transfer_epochs", cfg.nn.transfer_epochs);
    t.get("augment_noise", cfg.nn.augment_noise);
    t.get("augment_phase", cfg.nn.train.augment_phase);
    t.get("retrain_all", cfg.nn.retrain_all);
    t.get("fraction_bits", cfg.nn.fraction_bits);
    t.finish();
  }
  if (s.has("dataset")) {
    Section d = s.child("dataset");
    d.get("pool_symbols", cfg.sizes.pool);
    d.get("val_symbols", cfg.sizes.val);
    d.get("test_symbols", cfg.sizes.test);
    d.finish();
  }
  if (s.has("seeds")) {
    Section d = s.child("seeds");
    d.get("data", cfg.seeds.data);
    d.get("noise", cfg.seeds.noise);
    d.get("train", cfg.seeds.train);
    d.finish();
  }
  if (s.has("calibration")) {
    Section c = s.child("calibration");
    c.get("power_dbm", cfg.calibration.power_dbm);
    c.get("q_db", cfg.calibration.q_db);
    c.get("tolerance_db", cfg.calibration.tolerance_db);
    c.get("enabled", cfg.calibration.enabled);
    c.finish();
  }
  if (s.has("fpga")) {
    cfg.fpga_designs.clear();
    const json& list = s.raw("fpga");
    if (!list.is_array()) throw std::invalid_argument("config.fpga: expected an array");
    for (const auto& item : list) {
      Section f(item, "config.fpga[]");
      std::string eq;
      cx::FpgaDesign d{};
      f.get("equalizer", eq);
      f.get("clock_hz", d.clock_hz);
      f.get("max_util", d.max_util_fraction);
      f.finish();
      d.equalizer = modem::parse_equalizer(eq);
      cfg.fpga_designs.push_back(d);
    }
  }
  std::string out_dir = cfg.output_dir.string();
  s.get("output_dir", out_dir);
  cfg.output_dir = out_dir;
  s.finish();
  cfg.nn.train.seed = cfg.seeds.train;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string dump_run_config(const RunConfig& cfg) {
  json j;
  j["link"] = write_link(cfg.link);
  j["sim_sps"] = cfg.sim_sps;
  j["symbol_rate"] = cfg.symbol_rate;
  j["rx"] = {{"rx_sps", cfg.rx.rx_sps},
             {"cdc_taps", cfg.rx.cdc_taps},
             {"rrc_rolloff", cfg.rx.rrc_rolloff},
             {"rrc_span", cfg.rx.rrc_span}};
  j["dbp"] = {{"steps_per_span", cfg.dbp.steps_per_span},
              {"sa_per_symbol", {cfg.dbp.sa_per_symbol.num, cfg.dbp.sa_per_symbol.den}},
              {"xi_grid", cfg.xi_grid()}};
  j["sweep_powers"] = cfg.sweep_powers;
  std::vector<std::string> eqs;
  for (auto e : cfg.equalizers) eqs.emplace_back(modem::to_string(e));
  j["equalizers"] = eqs;
  j["bilstm"] = write_arch(cfg.bilstm);
  j["cnn"] = write_arch(cfg.cnn);
  j["train"] = {{"lr", cfg.nn.train.lr},
                {"lr_final", cfg.nn.train.lr_final},
                {"batch", cfg.nn.train.batch},
                {"epochs", cfg.nn.train.epochs},
                {"pool_size", cfg.nn.train.pool_size},
                {"epoch_subset", cfg.nn.train.epoch_subset},
                {"transfer_epochs", cfg.nn.transfer_epochs},
                {"augment_noise", cfg.nn.augment_noise},
                {"augment_phase", cfg.nn.train.augment_phase},
                {"retrain_all", cfg.nn.retrain_all},
                {"fraction_bits", cfg.nn.fraction_bits}};
  j["dataset"] = {{"pool_symbols", cfg.sizes.pool}, {"val_symbols", cfg.sizes.val}, {"test_symbols", cfg.sizes.test}};
  j["seeds"] = {{"data", cfg.seeds.data}, {"noise", cfg.seeds.noise}, {"train", cfg.seeds.train}};
  j["calibration"] = {{"power_dbm", cfg.calibration.power_dbm},
                      {"q_db", cfg.calibration.q_db},
                      {"tolerance_db", cfg.calibration.tolerance_db},
                      {"enabled", cfg.calibration.enabled}};
  json fpga = json::array();
  for (const auto& d : cfg.fpga_designs) {
    fpga.push_back({{"equalizer", std::string(modem::to_string(d.equalizer))},
                    {"clock_hz", d.clock_hz},
                    {"max_util", d.max_util_fraction}});
  }
  j["fpga"] = fpga;
  j["output_dir"] = cfg.output_dir.string();
  return j.dump(2);
}

}  // namespace ceq::bench
