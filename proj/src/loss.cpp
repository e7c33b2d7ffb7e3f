#include "vxseg/loss.hpp"

#include <algorithm>

#include "vxseg/errors.hpp"
#include "vxseg/ops.hpp"

namespace vxseg {

Var loss_direct(Var thick_probs, std::span<const std::uint8_t> thick_labels,
                std::span<const double> class_weights) {
  return ops::weighted_nll(thick_probs, thick_labels, class_weights, kProbabilityClamp);
}

Var average_z_groups(Var rows, int r, std::size_t plane) {
  if (r < 1) throw ContractError("average_z_groups: r must be >= 1");
  const Shape& s = rows.shape();
  if (s.size() != 2) throw DimensionError("average_z_groups: expected a [V x C] matrix");
  const std::size_t v = s[0], c = s[1];
  if (plane == 0 || v % (plane * static_cast<std::size_t>(r)) != 0) {
    throw ContractError("average_z_groups: " + std::to_string(v) + " rows do not form groups of " +
                        std::to_string(r) + " slices of " + std::to_string(plane) + " voxels");
  }
  if (r == 1) return rows;
  const std::size_t groups = v / (plane * r);
  Var grouped = ops::reshape(rows, {groups, static_cast<std::size_t>(r), plane * c});
  return ops::reshape(ops::mean_axis(grouped, 1), {groups * plane, c});
}

Var loss_mask_consistency(Var thin_probs, std::span<const std::uint8_t> thick_labels, int r,
                          std::size_t plane, std::span<const double> class_weights) {
  if (r < 1) throw ContractError("loss_mask_consistency: r must be >= 1");
  const std::size_t rows = thin_probs.shape().at(0);
  if (rows != thick_labels.size() * static_cast<std::size_t>(r)) {
    throw ContractError("loss_mask_consistency: " + std::to_string(rows) +
                        " thin voxels do not cover r * " + std::to_string(thick_labels.size()) +
                        " thick voxels");
  }
  return ops::weighted_nll(average_z_groups(thin_probs, r, plane), thick_labels, class_weights,
                           kProbabilityClamp);
}

Var loss_feature_consistency(Var thin_features, Var thick_features) {
  if (thin_features.shape() != thick_features.shape()) {
    throw ContractError("loss_feature_consistency: feature shapes " +
                        shape_string(thin_features.shape()) + " and " +
                        shape_string(thick_features.shape()) + " differ");
  }
  Var diff = ops::sub(thin_features, thick_features);
  return ops::mean(ops::mul(diff, diff));
}

std::vector<std::uint8_t> group_labels(std::span<const std::uint8_t> patch, int w, int r) {
  const std::size_t plane = static_cast<std::size_t>(w) * w;
  if (r < 1 || w % r != 0 || patch.size() != plane * w) {
    throw ContractError("group_labels: patch of " + std::to_string(patch.size()) +
                        " labels cannot be grouped with w = " + std::to_string(w) +
                        ", r = " + std::to_string(r));
  }
  std::vector<std::uint8_t> out;
  out.reserve(patch.size() / r);
  for (int g = 0; g < w / r; ++g) {
    auto first = patch.begin() + static_cast<std::ptrdiff_t>(g * r * plane);
    out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(plane));
  }
  return out;
}

std::vector<double> inverse_frequency_weights(std::span<const LabelVolume* const> labels, int classes) {
  std::vector<std::size_t> counts(classes, 0);
  std::size_t total = 0;
  for (const LabelVolume* lv : labels) {
    for (auto l : lv->voxels()) {
      if (l >= classes) throw ContractError("inverse_frequency_weights: label out of range");
      ++counts[l];
    }
    total += lv->voxels().size();
  }
  std::vector<double> w(classes, 10.0);
  for (int c = 0; c < classes; ++c) {
    if (counts[c] == 0) continue;
    const double raw = static_cast<double>(total) / (static_cast<double>(classes) * counts[c]);
    w[c] = std::clamp(raw, 0.1, 10.0);
  }
  return w;
}

}  // namespace vxseg
