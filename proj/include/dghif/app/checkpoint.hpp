#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dghif/app/config.hpp"
#include "dghif/trainpipe/trainer.hpp"

namespace dghif::app {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
  std::string name;
  std::string group;
  tc::Shape shape;
  std::vector<double> values;
};

/// Everything needed to rebuild a model and continue its training run.
/// Binary layout: magic "DGHIFCKP", u32 version, then length-prefixed
/// fields with all integers and doubles little-endian.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_hash = 0;
  std::string config_text;  // serialize_config of the training config
  std::uint64_t seed = 0;
  std::string stage;        // stage of the next epoch, or "done"
  std::vector<StoredTensor> tensors;
  std::vector<train::MomentState> moments;  // parallel to tensors
  train::TrainerState trainer;

  ExperimentConfig config() const { return parse_config(config_text); }
};

Checkpoint capture(const ExperimentConfig& config, std::uint64_t seed, const train::Model& model,
                   const train::Trainer& trainer);

std::string encode_checkpoint(const Checkpoint& ckpt);
/// DataError on a bad magic, unsupported version or truncated data.
Checkpoint decode_checkpoint(std::string_view bytes);

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies stored values into `params`. DataError when names, groups or
/// shapes differ (for example a corpus with another vocabulary size).
void restore_parameters(const Checkpoint& ckpt, const tc::ParamList& params);

/// ConfigError when `config` hashes differently from the checkpoint, unless forced.
void check_config(const Checkpoint& ckpt, const ExperimentConfig& config, bool force);

}  // namespace dghif::app
