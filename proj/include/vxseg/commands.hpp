#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vxseg/config.hpp"
#include "vxseg/metrics.hpp"
#include "vxseg/phantom.hpp"
#include "vxseg/train.hpp"

namespace vxseg {

// CLI exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

/// Maps a thrown exception onto an exit code.
int exit_code_for(const std::exception& e) noexcept;

/// FNV-1a 64 over the bytes.
std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes) noexcept;
std::uint64_t file_hash(const std::filesystem::path& path);

/// File names used by `generate` for phantom i.
struct PhantomFiles {
  std::string thin, thin_labels, thick, thick_labels;
};
PhantomFiles phantom_files(int index);

/// Phantoms described by the config: read from data_dir, or regenerated from
/// the data seed when data_dir is empty.
std::vector<ThinThickPair> load_pairs(const ExperimentConfig& config);

struct GenerateResult {
  std::filesystem::path manifest;
  std::uint64_t manifest_hash = 0;
};

/// Writes thin/thick volumes and labels for every phantom plus manifest.txt.
GenerateResult cmd_generate(const ExperimentConfig& config, std::ostream& log);

struct TrainCommandResult {
  std::filesystem::path checkpoint;
  std::filesystem::path loss_csv;
  std::filesystem::path config_echo;
  TrainResult training;
};

/// Writes effective_config.txt, loss.csv and model.vxfm under output_dir.
TrainCommandResult cmd_train(const ExperimentConfig& config, std::ostream& log);

/// Writes the predicted labels; with probs_prefix also one intensity volume
/// of class probabilities per class (<prefix>_c<k>.vxl).
Prediction cmd_infer(const std::filesystem::path& checkpoint, const std::filesystem::path& volume,
                     const std::filesystem::path& out_labels,
                     const std::optional<std::filesystem::path>& probs_prefix = std::nullopt,
                     int threads = 1);

struct EvalOptions {
  bool include_background = false;
  int classes = kPhantomClasses;
  DiceDenominator denominator = DiceDenominator::sum_of_sizes;
  std::optional<std::filesystem::path> out_csv;
};

/// Prints the metrics CSV to `out` and optionally writes it to a file.
MetricsReport cmd_eval(const std::filesystem::path& gt, const std::filesystem::path& pred,
                       const EvalOptions& options, std::ostream& out);

/// AIP of the thin volume and, when given, majority projection of its labels.
void cmd_make_thick(const std::filesystem::path& thin, int r, const std::filesystem::path& out_volume,
                    const std::optional<std::filesystem::path>& thin_labels = std::nullopt,
                    const std::optional<std::filesystem::path>& out_labels = std::nullopt);

}  // namespace vxseg
