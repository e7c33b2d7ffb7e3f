#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vxseg/tape.hpp"
#include "vxseg/volume.hpp"

namespace vxseg {

inline constexpr double kProbabilityClamp = 1e-12;

/// Class-weighted cross-entropy of thick-grid predictions [V x L] against
/// thick labels, mean over voxels.
Var loss_direct(Var thick_probs, std::span<const std::uint8_t> thick_labels,
                std::span<const double> class_weights);

/// Averages thin predictions [r*G*plane x L] over each r-slice group along z
/// (rows ordered with z slowest, `plane` voxels per slice), then applies the
/// weighted cross-entropy against the G*plane thick labels. ContractError when
/// the depths disagree.
Var loss_mask_consistency(Var thin_probs, std::span<const std::uint8_t> thick_labels, int r,
                          std::size_t plane, std::span<const double> class_weights);

/// Group mean of [r*G*plane x C] rows along z; returns [G*plane x C].
Var average_z_groups(Var rows, int r, std::size_t plane);

/// Mean squared difference over all tokens and feature dims. Gradients reach
/// both inputs.
Var loss_feature_consistency(Var thin_features, Var thick_features);

/// Picks slice g*r of every r-group from a w^3 thin-grid label patch
/// (x fastest) to give the w^3/r thick labels.
std::vector<std::uint8_t> group_labels(std::span<const std::uint8_t> patch_labels, int w, int r);

/// Weights total / (L * count_c) clipped to [0.1, 10]; absent classes get 10.
std::vector<double> inverse_frequency_weights(std::span<const LabelVolume* const> labels, int classes);

}  // namespace vxseg
