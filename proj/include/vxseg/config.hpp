#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vxseg/model.hpp"
#include "vxseg/train.hpp"
#include "vxseg/volume.hpp"

namespace vxseg {

// Run configuration shared by the CLI subcommands. Text form is one
// `key = value` per line; `#` starts a comment. See ExperimentConfig::keys().
struct ExperimentConfig {
  ModelConfig model;
  JointLossConfig loss;
  /// Directory written by `generate`; empty synthesizes phantoms in memory.
  std::string data_dir;
  int phantoms = 2;
  Dims phantom_dims{48, 48, 48};
  std::string output_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;

  /// Every cross-field constraint; ConfigError on the first violation.
  void validate() const;

  /// Applies one key; ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  /// Applies `key=value` (flag form).
  void set_assignment(const std::string& assignment);
  /// Full effective configuration in key order; parse(to_text()) == *this.
  std::string to_text() const;

  static ExperimentConfig parse(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
  static const std::vector<std::string>& keys();

  // Named sub-seeds, all derived from `seed`.
  std::uint64_t data_seed() const;
  std::uint64_t init_seed() const;
  std::uint64_t sampling_seed() const;
  /// Loss config with its sampling seed derived from `seed`.
  JointLossConfig effective_loss() const;
  /// Seed of phantom i in the generated set.
  std::uint64_t phantom_seed(int index) const;
};

}  // namespace vxseg
