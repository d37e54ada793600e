#include <iostream>

#include "CLI11.hpp"
#include "kerrstab/cli_io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Linear-stability numerics for non-extreme Kerr"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  int threads = 0;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "JSON configuration or manifest")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (default: the configuration's output_dir)");
  auto* threads_opt = app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "seed for randomized families");

  kerr::CommandInputs inputs;
  std::vector<std::string> files;
  for (const auto& name : kerr::command_names()) {
    auto* sub = app.add_subcommand(name);
    if (name == "angular-modes") sub->add_flag("--oracle", inputs.angular_oracle, "finite-difference cross-check");
    if (name == "compare") sub->add_option("files", files, "two snapshot CSV files")->required()->expected(2);
  }
  CLI11_PARSE(app, argc, argv);

  try {
    kerr::RunConfig cfg = kerr::parse_config(config_path);
    if (*threads_opt) cfg.threads = threads;
    if (*seed_opt) cfg.seed = seed;
    const std::filesystem::path out = out_dir.empty() ? std::filesystem::path(cfg.output_dir) : std::filesystem::path(out_dir);
    for (const auto& f : files) inputs.files.emplace_back(f);
    const std::string name = app.get_subcommands().front()->get_name();
    const nlohmann::json manifest = kerr::run_command(name, cfg, out, inputs);
    std::cout << manifest["measured"].dump(2) << "\n";
  } catch (const kerr::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
