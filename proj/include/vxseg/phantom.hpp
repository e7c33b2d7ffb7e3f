#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vxseg/volume.hpp"

namespace vxseg {

struct LesionClassSpec {
  bool enabled = true;
  int min_count = 1;
  int max_count = 3;
};

// Generator configuration. Intensity bands mimic parenchyma/hemorrhage
// contrast qualitatively; they are not measured values.
struct LesionSpec {
  /// Index 0 (background) is ignored.
  std::array<LesionClassSpec, kPhantomClasses> classes{};
  /// Semi-axis range as a fraction of the smallest volume extent. The lower
  /// bound is raised to 1.5 voxels so every lesion owns at least one voxel.
  double min_semi_axis = 1.0 / 12.0;
  double max_semi_axis = 1.0 / 6.0;
  double background_low = 20.0;
  double background_high = 40.0;
  /// Class c (1-based) draws its lesion intensity from
  /// [lesion_base + (c-1) * class_stride, ... + class_band].
  double lesion_base = 55.0;
  double class_stride = 7.0;
  double class_band = 5.0;
  double noise = 3.0;
  int placement_attempts = 500;
};

struct Ellipsoid {
  std::uint8_t label = 0;
  std::array<double, 3> center{};
  std::array<double, 3> semi_axes{};
  double intensity = 0.0;

  /// Voxel (x, y, z) belongs to the lesion when its center satisfies
  /// sum(((p - c) / a)^2) <= 1.
  bool contains(int x, int y, int z) const noexcept;
};

struct ThinThickPair {
  Volume thin;
  LabelVolume thin_labels;
  Volume thick;
  LabelVolume thick_labels;
  int r = 1;
  std::vector<Ellipsoid> lesions;
};

/// Deterministic synthetic pair. Lesions are placed with disjoint, one-voxel
/// separated bounding boxes, so each label count is the sum of its
/// ellipsoids' rasterizations. Throws ContractError for dims < 24 or depth
/// not divisible by r, GenerationError when a class cannot fit its
/// min_count lesions. Extra lesions that do not fit are skipped.
ThinThickPair generate_phantom(std::uint64_t seed, Dims dims, int r, const LesionSpec& spec = {});

}  // namespace vxseg
