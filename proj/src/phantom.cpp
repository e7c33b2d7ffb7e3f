#include "vxseg/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "vxseg/errors.hpp"
#include "vxseg/rng.hpp"

namespace vxseg {

bool Ellipsoid::contains(int x, int y, int z) const noexcept {
  const double p[3] = {static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
  double s = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double t = (p[a] - center[a]) / semi_axes[a];
    s += t * t;
  }
  return s <= 1.0;
}

namespace {

struct Box {
  std::array<int, 3> lo, hi;  // inclusive
};

Box bounds(const Ellipsoid& e) {
  Box b;
  for (int a = 0; a < 3; ++a) {
    b.lo[a] = static_cast<int>(std::floor(e.center[a] - e.semi_axes[a]));
    b.hi[a] = static_cast<int>(std::ceil(e.center[a] + e.semi_axes[a]));
  }
  return b;
}

bool separated(const Box& a, const Box& b) {
  for (int ax = 0; ax < 3; ++ax) {
    if (a.hi[ax] + 1 < b.lo[ax] || b.hi[ax] + 1 < a.lo[ax]) return true;
  }
  return false;
}

}  // namespace

ThinThickPair generate_phantom(std::uint64_t seed, Dims dims, int r, const LesionSpec& spec) {
  if (dims.x < 24 || dims.y < 24 || dims.z < 24) {
    throw ContractError("generate_phantom: dims must be >= 24 per axis, got " + dims_string(dims));
  }
  if (r < 1 || dims.z % r != 0) {
    throw ContractError("generate_phantom: depth " + std::to_string(dims.z) +
                        " is not divisible by r = " + std::to_string(r));
  }
  if (!(spec.min_semi_axis > 0 && spec.max_semi_axis >= spec.min_semi_axis)) {
    throw ConfigError("generate_phantom: invalid semi-axis range");
  }

  CounterRng rng(derive_seed(seed, "phantom"));
  const std::array<int, 3> extent = {dims.x, dims.y, dims.z};
  const double smallest = *std::min_element(extent.begin(), extent.end());
  const double amin = std::max(1.5, spec.min_semi_axis * smallest);
  const double amax = std::max(amin, spec.max_semi_axis * smallest);

  ThinThickPair pair;
  pair.r = r;
  std::vector<Box> boxes;
  std::array<int, kPhantomClasses> counts{};
  for (int c = 1; c < kPhantomClasses; ++c) {
    const auto& cs = spec.classes[c];
    if (cs.enabled) counts[c] = static_cast<int>(rng.uniform_int(cs.min_count, std::max(cs.min_count, cs.max_count)));
  }
  const int rounds = *std::max_element(counts.begin(), counts.end());
  // Round-robin over classes so small volumes still get every class; lesions
  // beyond min_count are dropped when they do not fit.
  for (int i = 0; i < rounds; ++i) {
    for (int c = 1; c < kPhantomClasses; ++c) {
      if (i >= counts[c]) continue;
      bool placed = false;
      for (int attempt = 0; attempt < spec.placement_attempts && !placed; ++attempt) {
        Ellipsoid e;
        e.label = static_cast<std::uint8_t>(c);
        bool fits = true;
        for (int a = 0; a < 3; ++a) {
          e.semi_axes[a] = rng.uniform(amin, amax);
          // keep one voxel of background between the lesion and the border
          const double lo = e.semi_axes[a] + 1.0;
          const double hi = extent[a] - 2.0 - e.semi_axes[a];
          if (hi < lo) {
            fits = false;
            e.center[a] = lo;
          } else {
            e.center[a] = rng.uniform(lo, hi);
          }
        }
        const double band_lo = spec.lesion_base + (c - 1) * spec.class_stride;
        e.intensity = rng.uniform(band_lo, band_lo + spec.class_band);
        if (!fits) continue;
        const Box b = bounds(e);
        if (std::all_of(boxes.begin(), boxes.end(), [&](const Box& o) { return separated(b, o); })) {
          boxes.push_back(b);
          pair.lesions.push_back(e);
          placed = true;
        }
      }
      if (!placed && i < spec.classes[c].min_count) {
        throw GenerationError("generate_phantom: could not place lesion " + std::to_string(i + 1) +
                              " of class " + kClassNames[c] + " in " + dims_string(dims));
      }
    }
  }

  const Spacing spacing{1.0f, 1.0f, 1.0f};
  pair.thin = Volume(dims, spacing);
  pair.thin_labels = LabelVolume(dims, spacing);
  const double background = rng.uniform(spec.background_low, spec.background_high);
  for (int z = 0; z < dims.z; ++z)
    for (int y = 0; y < dims.y; ++y)
      for (int x = 0; x < dims.x; ++x) {
        // noise is drawn for every voxel so the stream does not depend on labels
        const double noise = rng.uniform(-spec.noise, spec.noise);
        pair.thin(x, y, z) = static_cast<float>(background + noise);
      }
  for (const auto& e : pair.lesions) {
    const Box b = bounds(e);
    CounterRng lesion_rng(derive_seed(rng.next_u64(), "lesion"));
    for (int z = std::max(0, b.lo[2]); z <= std::min(dims.z - 1, b.hi[2]); ++z)
      for (int y = std::max(0, b.lo[1]); y <= std::min(dims.y - 1, b.hi[1]); ++y)
        for (int x = std::max(0, b.lo[0]); x <= std::min(dims.x - 1, b.hi[0]); ++x) {
          if (!e.contains(x, y, z)) continue;
          pair.thin_labels(x, y, z) = e.label;
          pair.thin(x, y, z) =
              static_cast<float>(e.intensity + lesion_rng.uniform(-spec.noise, spec.noise));
        }
  }

  pair.thick = aip_project(pair.thin, r);
  pair.thick_labels = majority_label_project(pair.thin_labels, r);
  return pair;
}

}  // namespace vxseg
