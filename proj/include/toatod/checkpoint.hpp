#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "toatod/model.hpp"
#include "toatod/text.hpp"

namespace toatod {

// Everything besides weights that a run needs to resume or evaluate.
struct CheckpointMeta {
  Vocabulary vocab;
  std::vector<std::string> intent_labels;
  std::int64_t step = 0;
  nlohmann::json config = nlohmann::json::object();  // experiment config snapshot
};

struct LoadedCheckpoint {
  Seq2SeqModel model;
  CheckpointMeta meta;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Container: 8-byte magic, u32 version, u64 header length, JSON header, then
// the tensors as little-endian float64 in header order.
void save_checkpoint(const std::filesystem::path& path, const Seq2SeqModel& model, const CheckpointMeta& meta);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);
// Same, but raises ConfigError unless the stored architecture equals the expected one.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const BackboneConfig& expected,
                                 const AdapterSpec& expected_adapter);

// One task's adapters as a standalone file.
void export_adapter(const std::filesystem::path& path, const Seq2SeqModel& model, TaskId task);
// Installs the file's adapters into `model` under `task`, or under the task
// recorded in the file when none is given. Returns the task used.
TaskId import_adapter(const std::filesystem::path& path, Seq2SeqModel& model, std::optional<TaskId> task = {});

nlohmann::json to_json(const BackboneConfig& c);
BackboneConfig backbone_from_json(const nlohmann::json& j);

}  // namespace toatod
