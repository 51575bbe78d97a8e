#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spiketempo/delay_net.hpp"
#include "spiketempo/spike_core.hpp"
#include "spiketempo/trainer.hpp"

namespace spiketempo {

struct SyntheticSource {
  std::size_t classes = 10;
  std::size_t units = 64;
  double duration = 1.0;
  std::size_t bins = 100;
  double noise_rate = 5.0;
  std::size_t count_per_class = 100;
  std::size_t units_per_class = 8;
};

struct DataSource {
  std::optional<std::filesystem::path> events;  // event file; synthetic when unset
  SyntheticSource synthetic;
  std::size_t bins = 100;
  std::size_t units = 64;
  std::size_t classes = 10;
  bool binary = true;
};

// Toggle set of one ablation row.
struct AblationToggles {
  bool nar = false;
  bool tr_o = false;
  bool tr_no = false;
  bool pool = false;

  // At most one of tr_o / tr_no / pool, except the combined tr_o + tr_no row.
  void validate() const;
  std::string name() const;  // e.g. "nar+tr_no", "none"
  static AblationToggles parse(const std::string& name);
  bool operator==(const AblationToggles&) const = default;
};

struct AblationSettings {
  std::vector<AblationToggles> rows;  // defaults to the full matrix
  TrConfig tr_o{TrVariant::overlap, 2, 1, Reduction::max};
  TrConfig tr_no{TrVariant::no_overlap, 3, 1, Reduction::max};
  std::optional<TrConfig> pool;        // defaults to tr_no's len/stride
  bool verify = true;                  // rerun each row and compare manifest hashes
};

std::vector<AblationToggles> full_ablation_matrix();

struct ExperimentConfig {
  DataSource data;
  std::optional<NetworkSpec> network;  // default_network_spec when unset
  TrainConfig train;
  SplitFractions splits;
  AblationSettings ablation;
  std::uint64_t seed = 0;

  std::string to_json() const;
};

ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// Two delay modules (input module, then a middle module wrapped by the
// non-aligned residual), TR without overlap (len 3, stride 1) after the
// middle module, then the output layer.
NetworkSpec default_network_spec(std::size_t inputs, std::size_t classes);

// Replaces the residual / reconstruction placement of `base` with a toggle set.
// Residuals wrap every middle module (index >= 1, or the only module) whose
// input and output sizes agree; TR stages go after the last hidden module.
NetworkSpec apply_toggles(const NetworkSpec& base, const AblationToggles& toggles,
                          const AblationSettings& settings);

Dataset load_dataset(const DataSource& source, std::uint64_t seed);

struct RunArtifacts {
  TrainRun run;
  std::string checkpoint_sha256;
  std::string results_sha256;  // digest of the timing-free results
  std::string manifest_json;
};

// Trains one network and writes checkpoint.stnet, run.json and manifest.json
// into out_dir.
RunArtifacts run_training(const ExperimentConfig& cfg, const NetworkSpec& spec, const DatasetSplits& data,
                          const std::filesystem::path& out_dir);

struct AblationRowResult {
  AblationToggles toggles;
  double test_accuracy = 0.0;
  double best_valid_accuracy = 0.0;
  std::size_t params = 0;
  std::string checkpoint_sha256;
  std::string results_sha256;
  bool verified = false;  // rerun reproduced identical hashes
  bool verify_ran = false;
};

std::vector<AblationRowResult> run_ablation(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);
std::string format_ablation_table(const std::vector<AblationRowResult>& rows);
std::string ablation_to_json(const std::vector<AblationRowResult>& rows);

}  // namespace spiketempo
