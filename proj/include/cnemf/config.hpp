#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cnemf/model.hpp"

namespace cnemf {

/**
 * Fully materialized experiment configuration: a JSON file with optional
 * sections model / solver / nagent / chaos / transfer plus top-level seed and
 * output directory.  Parsing fills every default, validates every constraint,
 * and computes a canonical content hash that names the output files.
 */
struct ExperimentConfig {
  // model
  BuiltinModelConfig model;
  std::optional<double> lip_F, lip_f;   // declared Lipschitz constants
  std::string nagent_variant = "same";  // "same" | "perturbed-graphon"

  // solver
  int q = 10;
  long long search_budget = 1000000;
  double mf_tol = 1e-6;
  double n_tol = 1e-6;

  // nagent
  std::vector<int> Ns = {2, 4};
  long long n_budget = 10000000;
  int mc_samples = 2000;
  double mc_tol = 1e-3;

  // chaos
  std::vector<int> x0_profile;  // empty -> block b gets state b mod |X|
  int mn_samples = 200;
  long long gap_enum_cap = 1000000;
  int gap_samples = 2000;
  int lipschitz_probes = 24;
  double denom_floor = 0.01;
  std::string gamma_source = "dynamics";

  // transfer
  std::string transfer_mode = "direct";  // "direct" | "matching" | "both"
  int transfer_N = 4;
  long long matching_budget = 4096;
  int descent_sweeps = 64;

  std::uint64_t seed = 1;
  std::string output_dir = "out";

  std::string config_hash;  // 16 hex digits over the canonical materialized form
};

/// Carries every violation found during validation, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// All defaults materialized, hash computed; no file involved.
ExperimentConfig default_config();

/// Parses and validates a JSON config file.  Throws ConfigError listing every
/// schema violation (unknown keys, type mismatches, constraint breaches,
/// unknown model families) or std::runtime_error when the file is unreadable.
ExperimentConfig parse_config(const std::string& path);

/// Same validation applied to an in-memory JSON document.
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<text>");

/// Canonical JSON rendering of the materialized config (sorted keys, all
/// defaults explicit).  The config hash is the FNV-1a64 of this string.
/// The output directory is deliberately excluded: it names where artifacts
/// land, not what experiment they describe, so reruns into different
/// directories hash (and byte-compare) identically.
std::string canonical_config_json(const ExperimentConfig& cfg);

/// Recomputes the hash field from the canonical rendering.
std::string compute_config_hash(const ExperimentConfig& cfg);

/// Builds the model, applying declared Lipschitz constants when present.
ModelSpec model_from_config(const ExperimentConfig& cfg);

/// Per-block initial profile with defaults resolved against the model spaces.
std::vector<int> x0_profile_from_config(const ExperimentConfig& cfg);

}  // namespace cnemf
