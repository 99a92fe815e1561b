#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commute/pipeline.hpp"

namespace {

struct Options {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

void add_common(CLI::App& sub, Options& o) {
  sub.add_option("--config,-c", o.config, "Key-value config file")->required()->check(CLI::ExistingFile);
  sub.add_option("--out,-o", o.out, "Output directory (overrides `out`)");
  sub.add_option("--seed", o.seed, "Generator seed (overrides `synth_seed`)");
  sub.add_option("--workers,-j", o.workers, "Worker threads (overrides `workers`)")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mine commuting patterns from bike-sharing trip records."};
  app.require_subcommand(1);
  app.set_version_flag("--version", COMMUTE_MINER_VERSION);

  const std::pair<const char*, const char*> help[] = {
      {"synth", "Generate a synthetic city, trips and ground truth"},
      {"ingest", "Clean trips and select active users"},
      {"cluster", "Build spatial and spatiotemporal flow clusters"},
      {"classify", "Pair clusters into commutes and detect transfers"},
      {"aggregate", "Write commuter tables, histograms and flow maps"},
      {"validate", "Check inferred homes against residential parcels"},
      {"all", "Run ingest through validate in one process"},
      {"compare", "Layer 1 indicators for improved vs original parameters"},
  };
  Options opts;
  for (const auto& [name, text] : help) add_common(*app.add_subcommand(name, text), opts);

  CLI11_PARSE(app, argc, argv);

  commute::CommandLine cmd;
  cmd.subcommand = app.get_subcommands().front()->get_name();
  cmd.config = opts.config;
  cmd.out = opts.out;
  cmd.seed = opts.seed;
  cmd.workers = opts.workers;
  return commute::run_command(cmd, std::cerr, std::cerr);
}
