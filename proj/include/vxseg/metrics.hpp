#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vxseg/volume.hpp"

namespace vxseg {

struct ClassCounts {
  int label = 0;
  std::uint64_t intersection = 0;
  std::uint64_t gt = 0;
  std::uint64_t pred = 0;
  std::uint64_t union_ = 0;  // gt + pred - intersection

  bool present() const noexcept { return gt + pred > 0; }
};

struct ConfusionCounts {
  std::vector<ClassCounts> classes;  // in label-set order

  const ClassCounts& of(int label) const;
};

/// Exact voxel counts for each label in `label_set`. ContractError on
/// mismatched dims.
ConfusionCounts confusion(const LabelVolume& gt, const LabelVolume& pred,
                          const std::vector<int>& label_set);

/// Which denominator the Dice score uses. `set_union` (2|A∩B| / |A∪B|) is
/// kept only for comparison; it is not the Dice coefficient.
enum class DiceDenominator { sum_of_sizes, set_union };

// Each throws UndefinedMetricError when the class is empty in both volumes.
double iou(const ConfusionCounts& counts, int label);
double dsc(const ConfusionCounts& counts, int label,
           DiceDenominator denom = DiceDenominator::sum_of_sizes);
/// Mean IoU over present classes of `label_set`; UndefinedMetricError when
/// none is present.
double miou(const ConfusionCounts& counts, const std::vector<int>& label_set);
double mean_dsc(const ConfusionCounts& counts, const std::vector<int>& label_set,
                DiceDenominator denom = DiceDenominator::sum_of_sizes);

struct ClassMetrics {
  ClassCounts counts;
  std::optional<double> iou;  // empty when the class is absent from both
  std::optional<double> dsc;
};

struct MetricsReport {
  std::vector<int> label_set;
  std::vector<ClassMetrics> classes;
  double miou = 0.0;
  double mean_dsc = 0.0;
};

/// Lesion labels 1..L-1, or 0..L-1 with include_background.
std::vector<int> default_label_set(int classes, bool include_background = false);

MetricsReport evaluate(const LabelVolume& gt, const LabelVolume& pred,
                       const std::vector<int>& label_set,
                       DiceDenominator denom = DiceDenominator::sum_of_sizes);

/// Header `class,present,intersection,gt,pred,union,iou,dsc`, one row per
/// evaluated class (absent classes print `nan`), then `mIoU,<value>`.
std::string report_csv(const MetricsReport& report);
MetricsReport parse_report_csv(const std::string& csv);
void write_report(const MetricsReport& report, const std::filesystem::path& path);

}  // namespace vxseg
