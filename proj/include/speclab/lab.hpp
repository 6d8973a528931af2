#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "speclab/deviation.hpp"
#include "speclab/dynamics.hpp"
#include "speclab/io.hpp"
#include "speclab/spectral.hpp"
#include "speclab/transfer.hpp"

namespace speclab {

// One flat JSON document drives every pipeline. The canonical serialized
// form (sorted keys, output location excluded) hashes to the cache key.
struct ExperimentConfig {
  HyperbolicToralAutomorphism map;
  TorusObservable observable;          // classical statistics input q
  TorusObservable damping;             // quantum damping g; defaults to observable
  bool damping_distinct = false;

  std::vector<std::int64_t> N_list;
  std::vector<std::int64_t> T_list;
  double gamma = 0.25;
  std::vector<double> mdp_epsilons;
  std::int64_t mdp_samples = 100000;

  std::int64_t variance_T = 100;
  std::int64_t variance_samples = 100000;
  std::int64_t max_lag = 32;

  double xi_max = 0.5;
  double xi_step = 0.05;
  std::int64_t K_op = 32;
  double eig_tol = 1e-11;

  double alpha = 0.5;
  double concentration_epsilon = 0.1;

  std::uint64_t seed = 1;
  std::string output_dir = "out";

  static ExperimentConfig from_json(const Json& j);
  Json to_json() const;         // full document, including output_dir
  Json canonical_json() const;  // sorted keys, output_dir stripped
  std::string hash() const;     // hex of fnv1a64 over the canonical dump
  void validate() const;        // every module precondition, distinct codes
};

struct ManifestArtifact {
  std::string path;  // relative to output_dir
  std::string fnv1a64;
};

struct ManifestStage {
  std::string name;
  std::string status;  // "ok" | "cached" | "FAILED"
  double wall_ms = 0.0;
  std::vector<ManifestArtifact> artifacts;
  std::string error;
};

struct RunManifest {
  std::string config_hash;
  std::string generated_at;
  int jobs = 1;
  std::vector<ManifestStage> stages;
  std::vector<std::string> warnings;
  std::vector<std::string> cache_hits;  // in-memory only, never serialized

  Json to_json() const;
  void write(const std::filesystem::path& output_dir) const;
  // every listed artifact exists under output_dir and matches its hash
  bool verify(const std::filesystem::path& output_dir) const;
};

// Stage results needed by later stages (reloaded from the cache on hits).
struct ClassicalState {
  double sigma_sq_exact = 0.0;
  double sigma_sq_mc = 0.0;
  double mc_std_error = 0.0;
  PressureCurve pressure;
  std::vector<DeviationEstimate> estimates;
  SpectralConstant constant;
};

struct QuantumState {
  std::vector<DecayRateSample> samples;
  ConcentrationReport fixed_report;
  ConcentrationReport shrinking_report;
};

RunManifest run_classical(const ExperimentConfig& config, int jobs = 1);
RunManifest run_quantum(const ExperimentConfig& config, int jobs = 1);
RunManifest run_full(const ExperimentConfig& config, int jobs = 1);

// Stage subsets for the narrower CLI subcommands.
RunManifest run_stages(const ExperimentConfig& config, const std::vector<std::string>& stages,
                       int jobs = 1);

std::vector<std::string> classical_stage_names();
std::vector<std::string> quantum_stage_names();

}  // namespace speclab
