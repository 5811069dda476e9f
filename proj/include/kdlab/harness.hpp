// Experiment orchestration: JSON configuration with strict key validation,
// flat --set overrides, output manifests, and the implementations behind the
// CLI subcommands.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kdlab/corpus.hpp"
#include "kdlab/trainer.hpp"

namespace kdlab {

struct DataCounts {
  int n_train = 1000;
  int n_valid = 200;
  int n_test = 500;
};

struct ModelSpecCfg {
  int context_order = 2;
  int sft_epochs = 3;
  double sft_learning_rate = 0.5;
  double init_scale = 0.01;  // logits ~ uniform(-init_scale, init_scale)
};

struct ExperimentConfig {
  TaskSpec task;
  DataCounts data;
  ModelSpecCfg teacher{3, 3, 0.5, 0.01};
  ModelSpecCfg student{2, 3, 0.5, 0.01};
  KDConfig kd;
  uint64_t seed = 1;
  std::vector<double> sweep_threshold{2, 3, 4, 5};
  std::vector<int> sweep_window{5, 10, 15, 20};

  void validate() const;
};

// Parsing is strict: unknown keys anywhere in the document are an error
// listing every offender.
ExperimentConfig config_from_json_string(const std::string& text);
std::string config_to_json_string(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

// Applies one "dotted.key=value" override to a config JSON document; value
// is parsed as a JSON literal, falling back to a string.
std::string apply_override(const std::string& config_json, const std::string& assignment);

// Stable hash of the resolved configuration (FNV-1a over canonical JSON).
std::string config_hash_hex(const std::string& config_json);

struct RunOptions {
  std::filesystem::path out_dir;
  bool force = false;
};

// Subcommand bodies. Each writes its artifacts plus a manifest.json
// recording the resolved config and its hash; an existing manifest in the
// output directory is refused unless force is set.
int run_gen_data(const ExperimentConfig& cfg, const RunOptions& opts);
int run_sft_teacher(const ExperimentConfig& cfg, const RunOptions& opts);
int run_distill(const ExperimentConfig& cfg, const RunOptions& opts);
int run_compare(const ExperimentConfig& cfg, const RunOptions& opts);
int run_sweep(const ExperimentConfig& cfg, const RunOptions& opts);
int run_oracle_check(const ExperimentConfig& cfg, const RunOptions& opts);
int run_report(const std::filesystem::path& run_dir, const RunOptions& opts);

}  // namespace kdlab
