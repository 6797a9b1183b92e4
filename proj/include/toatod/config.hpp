#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "toatod/adapter.hpp"
#include "toatod/model.hpp"
#include "toatod/pipeline.hpp"
#include "toatod/trainer.hpp"

namespace toatod {

struct ExperimentConfig {
  BackboneConfig backbone;  // vocab_size 0: taken from the training corpus
  AdapterSpec adapter;      // bottleneck_dim 0: d_model / 2
  RLConfig rl;
  std::string train_corpus;
  std::string eval_corpus;  // empty: evaluate on the training corpus
  std::vector<TaskId> tasks = {TaskId::NLU, TaskId::DST, TaskId::NLG};
  std::string output_dir = "runs";
  PipelineMode eval_mode = PipelineMode::end_to_end;
  std::uint64_t model_seed = 42;

  // Resolves the automatic fields against a vocabulary size.
  BackboneConfig resolved_backbone(std::size_t vocab_size) const;
  AdapterSpec resolved_adapter() const;
};

// Defaults: toy backbone (d=64, 2+2 layers, 4 heads, ff 128), training settings
// from RLConfig's defaults.
ExperimentConfig default_config();

nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Strict: unknown keys and out-of-range values raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);

// "rl.alpha=1.0", "tasks=[\"dst\"]". The value is read as JSON when it parses,
// otherwise as a plain string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

// defaults <- file (if any) <- overrides, in that order.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);

// Checks numeric ranges and, when `check_paths`, that corpus files exist.
void validate_config(const ExperimentConfig& cfg, bool check_paths);

// "<cmd>-<task>-<stage>-<8 hex digits of a hash of the config>".
std::string run_stamp(const std::string& cmd, const std::string& task, const std::string& stage,
                      const nlohmann::json& config);

}  // namespace toatod
