#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vxseg/rng.hpp"
#include "vxseg/tensor.hpp"
#include "vxseg/volume.hpp"

namespace vxseg {

struct Index3 {
  int x = 0, y = 0, z = 0;
  friend bool operator==(const Index3&, const Index3&) = default;
};

/// Block of W^3 voxels split into n^3 patches of w^3 voxels, n = W / w.
struct BlockGeometry {
  int block = 24;   // W
  int patch = 8;    // w
  int channels = 1; // c

  int per_axis() const noexcept { return block / patch; }
  int tokens() const noexcept { return per_axis() * per_axis() * per_axis(); }
  int token_length() const noexcept { return patch * patch * patch * channels; }
  int patch_voxels() const noexcept { return patch * patch * patch; }
  /// Index of the middle patch: floor(n/2) * (n^2 + n + 1).
  int center_index() const noexcept {
    const int n = per_axis();
    return (n / 2) * (n * n + n + 1);
  }
  /// Voxel offset from a block origin to its center patch.
  int margin() const noexcept { return patch * (per_axis() / 2); }

  /// ConfigError unless W, w, c >= 1, W divisible by w, and n odd.
  void validate() const;

  friend bool operator==(const BlockGeometry&, const BlockGeometry&) = default;
};

/// W x W x W x c crop. data is laid out x fastest, then y, z, channel.
struct Block {
  Index3 origin;
  BlockGeometry geometry;
  Tensor data;
};

/// Row i holds patch i (i = iz*n^2 + iy*n + ix) flattened x fastest, then
/// y, z, channel.
struct PatchSequence {
  BlockGeometry geometry;
  Tensor tokens;  // [N x w^3 c]
};

/// Reflects coordinate p into [0, n) without repeating the edge voxel
/// (-1 -> 1, n -> n-2). ContractError when the offset past the border is >= n.
int reflect_index(int p, int n);

Block extract_block(const Volume& volume, Index3 origin, const BlockGeometry& geometry);
Block extract_block(std::span<const Volume> channels, Index3 origin, const BlockGeometry& geometry);
/// Writes the in-bounds voxels of channel 0 back into `volume`.
void scatter_block(Volume& volume, const Block& block);

PatchSequence partition(const Block& block);
/// Inverse of partition().
Block assemble(const PatchSequence& seq, Index3 origin);

/// Token i -> E * p_i for E of shape [D x w^3 c]; returns [N x D].
Tensor embed(const PatchSequence& seq, const Tensor& embedding);

/// Sinusoidal table over the token index: row pos holds
/// sin(pos / 10000^(2i/D)) at column 2i and cos(...) at 2i+1. D must be even.
Tensor positional_encoding(const BlockGeometry& geometry, int dim);
Tensor positional_encoding(std::size_t positions, int dim);

/// Block origins whose center patches tile ceil(X/w) x ceil(Y/w) x ceil(Z/w)
/// with stride w, ordered x fastest. Each voxel lies in exactly one center
/// patch; voxels beyond the volume come from reflection.
std::vector<Index3> tile_inference_origins(Dims dims, const BlockGeometry& geometry);

inline Index3 center_patch_origin(Index3 block_origin, const BlockGeometry& g) {
  return {block_origin.x + g.margin(), block_origin.y + g.margin(), block_origin.z + g.margin()};
}

/// w^3 labels of the cube at `patch_origin`, reflected where out of bounds.
std::vector<std::uint8_t> extract_label_patch(const LabelVolume& labels, Index3 patch_origin, int w);

/// Draws tile-aligned block origins. With fg_fraction > 0, each draw picks a
/// foreground tile (any non-background voxel in the center patch) with that
/// probability and a background tile otherwise; fg_fraction == 0 draws
/// uniformly over all tiles.
class BlockSampler {
 public:
  BlockSampler(const LabelVolume& labels, const BlockGeometry& geometry);

  Index3 draw(CounterRng& rng, double fg_fraction) const;
  bool has_foreground() const noexcept { return !foreground_.empty(); }
  const std::vector<Index3>& tiles() const noexcept { return tiles_; }
  const std::vector<std::size_t>& foreground() const noexcept { return foreground_; }

 private:
  std::vector<Index3> tiles_;
  std::vector<std::size_t> foreground_;
  std::vector<std::size_t> background_;
};

struct SampleResult {
  std::vector<Index3> origins;
  /// Set when foreground was requested but the volume has none; origins are
  /// then uniform.
  bool fallback_uniform = false;
};

SampleResult sample_training_blocks(const LabelVolume& labels, const BlockGeometry& geometry,
                                    std::size_t count, double fg_fraction, std::uint64_t seed);

}  // namespace vxseg
