#include "lgv/error.hpp"
#include "lgv/harness.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

namespace lgv {

namespace {

nlohmann::json read_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file " + path);
  nlohmann::json j = nlohmann::json::parse(is, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file " + path + " is not valid JSON");
  return j;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Transfer attacks from large-geometry-vicinity surrogates on small MLP benchmarks"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir;
  app.add_option("-c,--config", config_path, "JSON run config (defaults apply when omitted)");
  app.add_option("-s,--set", overrides, "Override a config field, e.g. --set training.lr=0.05")->take_all();
  app.add_option("-o,--out", out_dir, "Output directory (overrides output_dir)");

  auto* train_cmd = app.add_subcommand("train", "Train base surrogates and targets");
  auto* collect_cmd = app.add_subcommand("collect", "Collect LGV weights from trained base models");
  auto* attack_cmd = app.add_subcommand("attack", "Attack with every surrogate recipe and score the targets");
  auto* geo_cmd = app.add_subcommand("geometry", "Loss-geometry probes");
  std::string probe;
  geo_cmd->add_option("probe", probe, "rays | interpolate | hessian | disk | pca")->required();
  auto* sweep_cmd = app.add_subcommand("sweep", "One pipeline per value, scored on the validation split");
  std::string param;
  std::vector<double> values;
  sweep_cmd->add_option("parameter", param, "lr | epochs | weights_per_epoch | iterations | sigma | gamma | C")
      ->required();
  sweep_cmd->add_option("--values", values, "Values to sweep")->required()->delimiter(',');
  auto* show_cmd = app.add_subcommand("show-config", "Print the effective config and its hash");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    nlohmann::json j = config_path.empty() ? nlohmann::json::object() : read_config_file(config_path);
    for (const auto& o : overrides) apply_override(j, o);
    if (!out_dir.empty()) j["output_dir"] = out_dir;
    const RunConfig cfg = parse_config(j);

    std::vector<std::filesystem::path> written;
    if (*train_cmd) written = cmd_train(cfg);
    else if (*collect_cmd) written = cmd_collect(cfg);
    else if (*attack_cmd) written = cmd_attack(cfg);
    else if (*geo_cmd) written = cmd_geometry(cfg, parse_probe(probe));
    else if (*sweep_cmd) written = cmd_sweep(cfg, parse_sweep_param(param), values);
    else if (*show_cmd) {
      std::cout << config_to_json(cfg).dump(2) << "\nconfig_hash " << config_hash(cfg) << '\n';
    }
    for (const auto& p : written) std::cout << p.string() << '\n';
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InsufficientExamples& e) {
    std::cerr << "config error: " << e.what() << " (lower attack.n_examples or enlarge the test split)\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 4;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace lgv
