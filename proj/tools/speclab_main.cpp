// speclab: a numerical laboratory for the spectral concentration of damped
// quantum maps on the torus. Subcommands run the classical statistics, the
// transfer-operator pressure pipeline, the quantized spectra, or everything.
#include <cstdio>
#include <cstdlib>
#include <string>

#include <CLI11.hpp>

#include "speclab/lab.hpp"

namespace {

speclab::ExperimentConfig load_config(const std::string& path, const std::string& out_override,
                                      bool seed_set, std::uint64_t seed_override) {
  auto cfg = speclab::ExperimentConfig::from_json(speclab::read_json_file(path));
  if (const char* env = std::getenv("OUTPUT_DIR"); env && *env) cfg.output_dir = env;
  if (!out_override.empty()) cfg.output_dir = out_override;
  if (seed_set) cfg.seed = seed_override;
  return cfg;
}

void print_summary(const speclab::RunManifest& manifest) {
  std::printf("config %s, %zu stage(s)", manifest.config_hash.c_str(), manifest.stages.size());
  if (!manifest.cache_hits.empty())
    std::printf(", %zu served from cache", manifest.cache_hits.size());
  std::printf("\n");
  for (const auto& s : manifest.stages)
    std::printf("  %-14s %-6s %8.1f ms  (%zu artifact%s)\n", s.name.c_str(), s.status.c_str(),
                s.wall_ms, s.artifacts.size(), s.artifacts.size() == 1 ? "" : "s");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral concentration laboratory for damped quantum torus maps"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  int jobs = 1;

  app.add_option("--config", config_path, "experiment configuration (JSON)")->required();
  app.add_option("--out", out_override, "output directory override");
  app.add_option("--seed", seed_override, "seed override")->each([&](const std::string&) {
    seed_set = true;
  });
  app.add_option("--jobs", jobs, "worker threads (never changes numerical output)");

  auto* validate_cmd = app.add_subcommand("validate", "validate the configuration and exit");
  auto* variance_cmd = app.add_subcommand("variance", "exact and Monte-Carlo variance");
  auto* mdp_cmd = app.add_subcommand("mdp", "moderate-deviation probability tables");
  auto* pressure_cmd =
      app.add_subcommand("pressure", "transfer-operator pressure curve and rate function");
  auto* spectrum_cmd = app.add_subcommand("spectrum", "damped propagator eigenvalue dumps");
  auto* concentration_cmd =
      app.add_subcommand("concentration", "decay-rate concentration report");
  auto* full_cmd = app.add_subcommand("full", "classical + quantum pipelines and the join");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = load_config(config_path, out_override, seed_set, seed_override);
    if (validate_cmd->parsed()) {
      cfg.validate();
      std::printf("config OK (hash %s)\n", cfg.hash().c_str());
      return 0;
    }
    speclab::RunManifest manifest;
    if (variance_cmd->parsed())
      manifest = speclab::run_stages(cfg, {"variance"}, jobs);
    else if (mdp_cmd->parsed())
      manifest = speclab::run_stages(cfg, {"mdp"}, jobs);
    else if (pressure_cmd->parsed())
      manifest = speclab::run_stages(cfg, {"pressure", "rate_function"}, jobs);
    else if (spectrum_cmd->parsed())
      manifest = speclab::run_stages(cfg, {"spectrum"}, jobs);
    else if (concentration_cmd->parsed())
      manifest = speclab::run_stages(cfg, {"spectrum", "concentration"}, jobs);
    else if (full_cmd->parsed())
      manifest = speclab::run_full(cfg, jobs);
    print_summary(manifest);
    return 0;
  } catch (const speclab::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.validation() ? 2 : 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
