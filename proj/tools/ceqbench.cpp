#include "ceq/bench/sweep.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

namespace {

using namespace ceq;

struct Common {
  std::string config;
  std::int64_t seed = -1;
  std::string out_dir;
  int threads = 0;
  bool deterministic = false;
  bool retrain_all = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Base seed; data, noise and training use seed, seed+1 and seed+2");
  cmd->add_option("--out-dir", c.out_dir, "Output directory (overrides the config)");
  cmd->add_option("--threads", c.threads, "Worker threads (CEQ_THREADS overrides)");
  cmd->add_flag("--deterministic", c.deterministic, "Single worker, reproducible byte for byte");
  cmd->add_flag("--retrain-all", c.retrain_all, "Train from scratch at every sweep power");
}

bench::RunConfig load(const Common& c) {
  auto cfg = bench::load_run_config(c.config);
  if (c.seed >= 0) {
    const auto s = static_cast<std::uint64_t>(c.seed);
    cfg.seeds.data = static_cast<std::uint32_t>(s);
    cfg.seeds.noise = s + 1;
    cfg.seeds.train = s + 2;
    cfg.nn.train.seed = cfg.seeds.train;
  }
  if (!c.out_dir.empty()) cfg.output_dir = c.out_dir;
  if (c.retrain_all) cfg.nn.retrain_all = true;
  cfg.validate();
  return cfg;
}

bench::Bench make_bench(const Common& c) {
  bench::RunOptions opts;
  opts.threads = c.threads;
  opts.deterministic = c.deterministic;
  opts.log = &std::cerr;
  return bench::Bench(load(c), opts);
}

void print_reports(const std::vector<modem::QReport>& rows) { modem::write_qreport_csv(std::cout, rows); }

nn::ArchKind arch_kind(const std::string& s) { return nn::parse_arch_kind(s); }

nn::Pol parse_pol(const std::string& s) {
  if (s == "x" || s == "X") return nn::Pol::X;
  if (s == "y" || s == "Y") return nn::Pol::Y;
  throw std::invalid_argument("polarization must be x or y");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ceqbench: coherent optical link equalizer testbench"};
  app.require_subcommand(1);

  Common common;
  auto* generate = app.add_subcommand("generate", "Simulate and store the datasets, then calibrate the noise");
  auto* train = app.add_subcommand("train", "Train the neural equalizers at the highest sweep power");
  auto* transfer = app.add_subcommand("transfer", "Fine-tune the trained models to the other powers");
  auto* evaluate = app.add_subcommand("evaluate", "Score every equalizer and power on the test sets");
  auto* sweep = app.add_subcommand("sweep", "generate, train, transfer and evaluate");
  auto* complexity = app.add_subcommand("complexity", "Multiplications per symbol, throughput and FPGA counts");
  for (auto* cmd : {generate, train, transfer, evaluate, sweep, complexity}) add_common(cmd, common);

  std::string arch_name, pol_name, file;
  double power = 0.0;
  int fraction_bits = fx::kDefaultFractionBits;
  auto* exp = app.add_subcommand("export-weights", "Write a trained model as a CEQN1 blob");
  auto* imp = app.add_subcommand("import-weights", "Install a CEQN1 blob as the model for one power and score it");
  for (auto* cmd : {exp, imp}) {
    add_common(cmd, common);
    cmd->add_option("--arch", arch_name, "BILSTM or DEEP_CNN")->required();
    cmd->add_option("--pol", pol_name, "Recovered polarization, x or y")->required();
    cmd->add_option("--power", power, "Launch power in dBm")->required();
  }
  exp->add_option("--out", file, "Destination blob")->required();
  exp->add_option("--fraction-bits", fraction_bits, "Fraction bits of the exported values")->check(CLI::Range(0, 31));
  imp->add_option("--in", file, "Source blob")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*generate) {
      make_bench(common).generate();
    } else if (*train) {
      auto rows = make_bench(common).train();
      bench::write_quantization_csv(std::cout, rows);
    } else if (*transfer) {
      make_bench(common).transfer();
    } else if (*evaluate) {
      print_reports(make_bench(common).evaluate());
    } else if (*sweep) {
      print_reports(make_bench(common).sweep());
    } else if (*complexity) {
      const auto cfg = load(common);
      const auto rows = cx::resource_table(cfg.fpga_designs, cfg.bilstm, cfg.cnn, cfg.rx.cdc_taps, cfg.rx.rx_sps,
                                           cfg.bilstm.n_out_symbols);
      std::filesystem::create_directories(cfg.output_dir);
      std::ofstream out(cfg.output_dir / "resources.csv");
      cx::write_resource_csv(out, rows);
      cx::write_resource_csv(std::cout, rows);
    } else if (*exp || *imp) {
      auto b = make_bench(common);
      const auto kind = arch_kind(arch_name);
      const auto pol = parse_pol(pol_name);
      const auto& arch = kind == nn::ArchKind::BILSTM ? b.config().bilstm : b.config().cnn;
      const auto installed = b.model_path(kind, pol, power);
      if (*exp) {
        if (!std::filesystem::exists(installed)) throw std::runtime_error("no trained model at " + installed.string());
        const auto model = fx::dequantize(fx::load_blob(installed), arch);
        const auto blob = fx::quantize_weights(model, fraction_bits);
        for (const auto& w : blob.warnings) std::cerr << "warning: " << w << "\n";
        fx::save_blob(file, blob);
        std::cout << "wrote " << file << " (" << model.parameter_count() << " weights, " << fraction_bits
                  << " fraction bits)\n";
      } else {
        const auto blob = fx::load_blob(file);
        fx::dequantize(blob, arch);
        std::filesystem::create_directories(installed.parent_path());
        fx::save_blob(installed, blob);
        std::cout << "installed " << installed.string() << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
