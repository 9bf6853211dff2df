#include <iostream>

#include <CLI11.hpp>

#include "lleda/experiment.hpp"

namespace {

constexpr int kConfigError = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lifelong self-supervised domain adaptation experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Train, probe and write metrics");
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string method;
  std::string buffer_mode;
  run->add_option("--config", config_path, "YAML experiment config")->required();
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("--out", out_dir, "Override the output directory");
  run->add_option("--method", method, "lleda, baseline or both")->check(CLI::IsMember({"lleda", "baseline", "both"}));
  run->add_option("--buffer-mode", buffer_mode, "fill or quota")->check(CLI::IsMember({"fill", "quota"}));

  auto* report = app.add_subcommand("report", "Summarise a finished run directory");
  std::string run_dir;
  report->add_option("run_dir", run_dir, "Directory written by 'lleda run'")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  if (*report) return lleda::report_run(run_dir, std::cout, std::cerr);

  lleda::ExperimentConfig config;
  try {
    config = lleda::load_config(config_path);
  } catch (const lleda::ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << '\n';
    return kConfigError;
  }
  if (seed) config.apply_seed(*seed);
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (method == "lleda") config.method = lleda::Method::lleda;
  if (method == "baseline") config.method = lleda::Method::baseline;
  if (method == "both") config.method = lleda::Method::both;
  if (buffer_mode == "fill") config.train.buffer_mode = lleda::BufferMode::fill;
  if (buffer_mode == "quota") config.train.buffer_mode = lleda::BufferMode::quota;

  try {
    return lleda::run_experiment(config, std::cout, std::cerr);
  } catch (const lleda::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
