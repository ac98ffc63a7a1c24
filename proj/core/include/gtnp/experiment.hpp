#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gtnp/baselines.hpp"
#include "gtnp/dataset.hpp"
#include "gtnp/train.hpp"
#include "gtnp/uncertainty.hpp"

namespace gtnp {

// ------------------------------ config ------------------------------------

struct DataBlock {
  std::string kind = "synth";  // "synth" generates in-process, "dirs" loads
  SynthConfig synth;
  std::string source_dir, target_dir;       // when kind == "dirs"
  double source_test_fraction = 0.2;
  int target_train_count = 600;
};

struct UncertaintyBlock {
  int n_draws = 100;
  std::vector<int> selected_ids;
};

struct BaselinesBlock {
  bool enabled = true;
  int epochs = -1;  // -1 mirrors the main run
};

// Parsed experiment description. `canonical` is the fully materialized
// config (defaults filled, overrides applied, output_dir excluded) whose
// hash identifies the experiment in every emitted file.
struct ExperimentConfig {
  uint64_t seed = 0;
  std::string output_dir = "out";
  DataBlock data;
  ModelDims model;
  TrainConfig train;
  UncertaintyBlock uncertainty;
  BaselinesBlock baselines;
  std::string canonical;
  std::string config_hash;
};

// Parses and validates the JSON config; unknown keys anywhere are rejected.
// Overrides replace the config's seed/output_dir before hashing.
ExperimentConfig load_experiment_config(const std::string& path,
                                        std::optional<uint64_t> seed_override,
                                        std::optional<std::string> out_override);

// ----------------------------- subcommands ---------------------------------
// All throw config_error / data_error / numeric_error; the CLI maps them to
// exit codes.

void cmd_synth(const ExperimentConfig& cfg);
void cmd_prepare(const std::string& manifest_path, const std::string& out_dir);
void cmd_pretrain_gcn(const ExperimentConfig& cfg);
void cmd_train(const ExperimentConfig& cfg);
void cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
              const std::string& out_dir);
void cmd_uncertainty(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                     const std::string& data_dir);
void cmd_report(const std::string& out_dir);

// Shared helpers (exposed for tests).

// Tags a seeded test split: source keeps `test_fraction` of samples as test;
// target keeps everything beyond `train_count` as test.
void tag_source_test_split(DomainDataset& ds, double test_fraction, RandomStream& rng);
void tag_target_test_split(DomainDataset& ds, int train_count, RandomStream& rng);

// Loads or generates the two domains per the data block (test-split tagged
// and normalized).
std::pair<DomainDataset, DomainDataset> prepare_domains(const ExperimentConfig& cfg);

}  // namespace gtnp
