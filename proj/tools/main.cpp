#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "cli/config.hpp"
#include "cli/runner.hpp"
#include "infoalign/errors.hpp"

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Keep large matrix buffers on the heap instead of fresh mmap pages.
  mallopt(M_MMAP_THRESHOLD, 1 << 26);
#endif
  using namespace infoalign;

  CLI::App app{"Preference-alignment and mutual-information experiment runner"};
  app.set_version_flag("--version", cli::artifact_version());
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  bool dry_run = false;
  for (const char* name : {"toy", "gauss", "starvation", "gradcheck", "report"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "INI-style configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory")->capture_default_str();
    sub->add_option("--seed", seed, "Seed override");
    sub->add_option("--jobs", jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_flag("--dry-run", dry_run, "Validate and print the effective configuration");
  }
  app.get_subcommand("toy")->description("Toy preference experiment: DPO and MIO trajectories");
  app.get_subcommand("gauss")->description("Gaussian MI benchmark: MINE and JSD critics");
  app.get_subcommand("starvation")->description("Directional derivatives of the DV objective");
  app.get_subcommand("gradcheck")->description("Analytic and tape gradients against finite differences");
  app.get_subcommand("report")->description("Render SVG charts for the CSV files in a directory");

  CLI11_PARSE(app, argc, argv);

  try {
    cli::ExperimentConfig config;
    CLI::App* sub = app.get_subcommands().front();
    config.subcommand = cli::parse_subcommand(sub->get_name());
    config.out_dir = out_dir;
    config.jobs = jobs;
    if (sub->count("--seed")) config.seed = seed;
    if (!config_path.empty()) {
      config.config_path = config_path;
      config.params = cli::load_ini(config_path);
    }
    if (dry_run) {
      std::cout << cli::resolve_config(config);
      return 0;
    }
    const cli::RunResult result = cli::run(config);
    std::cout << cli::format_report(result);
    std::cout << "wrote " << result.manifest.files.size() << " files and manifest_"
              << result.manifest.subcommand << ".txt to " << config.out_dir.string() << "\n";
    return result.passed() ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
