#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "protoverb/verbalizer.hpp"

namespace protoverb {

inline constexpr int kCheckpointFormatVersion = 1;

// Versioned JSON snapshot of a trained head. `config` is an opaque echo of the
// settings that produced it (seed, k, loss weights, template index, ...).
struct Checkpoint {
  VerbalizerModel model;
  std::vector<std::string> label_names;
  nlohmann::json config = nlohmann::json::object();
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace protoverb
