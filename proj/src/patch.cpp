#include "vxseg/patch.hpp"

#include <algorithm>
#include <cmath>

#include "vxseg/errors.hpp"
#include "vxseg/tensor_ops.hpp"

namespace vxseg {

void BlockGeometry::validate() const {
  if (block < 1 || patch < 1 || channels < 1) {
    throw ConfigError("block geometry extents must be >= 1");
  }
  if (block % patch != 0) {
    throw ConfigError("block size " + std::to_string(block) + " is not divisible by patch size " +
                      std::to_string(patch));
  }
  if (per_axis() % 2 == 0) {
    throw ConfigError("patches per axis n = " + std::to_string(per_axis()) +
                      " must be odd so a center patch exists");
  }
}

int reflect_index(int p, int n) {
  int q = p;
  if (p < 0) q = -p;
  else if (p >= n) q = 2 * (n - 1) - p;
  if (q < 0 || q >= n) {
    throw ContractError("reflection undefined for coordinate " + std::to_string(p) +
                        " in extent " + std::to_string(n));
  }
  return q;
}

Block extract_block(const Volume& volume, Index3 origin, const BlockGeometry& geometry) {
  return extract_block(std::span<const Volume>(&volume, 1), origin, geometry);
}

Block extract_block(std::span<const Volume> channels, Index3 origin, const BlockGeometry& geometry) {
  geometry.validate();
  if (static_cast<int>(channels.size()) != geometry.channels) {
    throw DimensionError("extract_block: geometry expects " + std::to_string(geometry.channels) +
                         " channels, got " + std::to_string(channels.size()));
  }
  const Dims d = channels.front().dims();
  for (const auto& ch : channels) {
    if (!(ch.dims() == d)) throw DimensionError("extract_block: channel dims differ");
  }
  const int W = geometry.block;
  // resolve coordinates once per axis; throws before any copy
  std::vector<int> xs(W), ys(W), zs(W);
  for (int i = 0; i < W; ++i) {
    xs[i] = reflect_index(origin.x + i, d.x);
    ys[i] = reflect_index(origin.y + i, d.y);
    zs[i] = reflect_index(origin.z + i, d.z);
  }
  const std::size_t cube = static_cast<std::size_t>(W) * W * W;
  Block b{origin, geometry, Tensor({cube * channels.size()})};
  auto out = b.data.data();
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const Volume& v = channels[c];
    std::size_t i = c * cube;
    for (int z = 0; z < W; ++z)
      for (int y = 0; y < W; ++y)
        for (int x = 0; x < W; ++x) out[i++] = v(xs[x], ys[y], zs[z]);
  }
  return b;
}

void scatter_block(Volume& volume, const Block& block) {
  const Dims d = volume.dims();
  const int W = block.geometry.block;
  std::size_t i = 0;
  for (int z = 0; z < W; ++z)
    for (int y = 0; y < W; ++y)
      for (int x = 0; x < W; ++x, ++i) {
        const int vx = block.origin.x + x, vy = block.origin.y + y, vz = block.origin.z + z;
        if (vx < 0 || vy < 0 || vz < 0 || vx >= d.x || vy >= d.y || vz >= d.z) continue;
        volume(vx, vy, vz) = block.data[i];
      }
}

namespace {
// Maps (patch, offset-within-token) <-> block buffer index.
template <class F>
void for_each_token_voxel(const BlockGeometry& g, F&& f) {
  const int n = g.per_axis(), w = g.patch, W = g.block;
  const std::size_t cube = static_cast<std::size_t>(W) * W * W;
  const std::size_t wcube = static_cast<std::size_t>(w) * w * w;
  for (int iz = 0; iz < n; ++iz)
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix) {
        const std::size_t token = static_cast<std::size_t>((iz * n + iy) * n + ix);
        for (int c = 0; c < g.channels; ++c)
          for (int z = 0; z < w; ++z)
            for (int y = 0; y < w; ++y)
              for (int x = 0; x < w; ++x) {
                const std::size_t offset = c * wcube + static_cast<std::size_t>((z * w + y) * w + x);
                const std::size_t bx = ix * w + x, by = iy * w + y, bz = iz * w + z;
                const std::size_t block_index = c * cube + (bz * W + by) * W + bx;
                f(token, offset, block_index);
              }
      }
}
}  // namespace

PatchSequence partition(const Block& block) {
  const BlockGeometry& g = block.geometry;
  g.validate();
  const std::size_t cube = static_cast<std::size_t>(g.block) * g.block * g.block;
  if (block.data.size() != cube * g.channels) {
    throw DimensionError("partition: block holds " + std::to_string(block.data.size()) +
                         " values, geometry needs " + std::to_string(cube * g.channels));
  }
  const std::size_t len = g.token_length();
  PatchSequence seq{g, Tensor({static_cast<std::size_t>(g.tokens()), len})};
  auto out = seq.tokens.data();
  for_each_token_voxel(g, [&](std::size_t t, std::size_t o, std::size_t b) { out[t * len + o] = block.data[b]; });
  return seq;
}

Block assemble(const PatchSequence& seq, Index3 origin) {
  const BlockGeometry& g = seq.geometry;
  const std::size_t cube = static_cast<std::size_t>(g.block) * g.block * g.block;
  Block b{origin, g, Tensor({cube * g.channels})};
  const std::size_t len = g.token_length();
  for_each_token_voxel(g, [&](std::size_t t, std::size_t o, std::size_t i) { b.data[i] = seq.tokens[t * len + o]; });
  return b;
}

Tensor embed(const PatchSequence& seq, const Tensor& embedding) {
  if (embedding.rank() != 2 || embedding.dim(1) != seq.tokens.dim(1)) {
    throw DimensionError("embed: embedding " + shape_string(embedding.shape()) +
                         " does not match token length " + std::to_string(seq.tokens.dim(1)));
  }
  return matmul_nt(seq.tokens, embedding);
}

Tensor positional_encoding(const BlockGeometry& geometry, int dim) {
  return positional_encoding(static_cast<std::size_t>(geometry.tokens()), dim);
}

Tensor positional_encoding(std::size_t positions, int dim) {
  if (dim < 2 || dim % 2 != 0) {
    throw ConfigError("positional encoding needs an even dimension, got " + std::to_string(dim));
  }
  Tensor pe({positions, static_cast<std::size_t>(dim)});
  for (std::size_t pos = 0; pos < positions; ++pos)
    for (int i = 0; i < dim / 2; ++i) {
      const double angle = static_cast<double>(pos) / std::pow(10000.0, 2.0 * i / dim);
      pe.at(pos, 2 * i) = std::sin(angle);
      pe.at(pos, 2 * i + 1) = std::cos(angle);
    }
  return pe;
}

std::vector<Index3> tile_inference_origins(Dims dims, const BlockGeometry& geometry) {
  geometry.validate();
  const int w = geometry.patch, m = geometry.margin();
  const int tx = (dims.x + w - 1) / w, ty = (dims.y + w - 1) / w, tz = (dims.z + w - 1) / w;
  std::vector<Index3> origins;
  origins.reserve(static_cast<std::size_t>(tx) * ty * tz);
  for (int z = 0; z < tz; ++z)
    for (int y = 0; y < ty; ++y)
      for (int x = 0; x < tx; ++x) origins.push_back({x * w - m, y * w - m, z * w - m});
  return origins;
}

std::vector<std::uint8_t> extract_label_patch(const LabelVolume& labels, Index3 p, int w) {
  const Dims d = labels.dims();
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(w) * w * w);
  for (int z = 0; z < w; ++z)
    for (int y = 0; y < w; ++y)
      for (int x = 0; x < w; ++x)
        out.push_back(labels(reflect_index(p.x + x, d.x), reflect_index(p.y + y, d.y),
                             reflect_index(p.z + z, d.z)));
  return out;
}

BlockSampler::BlockSampler(const LabelVolume& labels, const BlockGeometry& geometry)
    : tiles_(tile_inference_origins(labels.dims(), geometry)) {
  const Dims d = labels.dims();
  const int w = geometry.patch;
  for (std::size_t t = 0; t < tiles_.size(); ++t) {
    const Index3 c = center_patch_origin(tiles_[t], geometry);
    bool fg = false;
    for (int z = c.z; z < std::min(c.z + w, d.z) && !fg; ++z)
      for (int y = c.y; y < std::min(c.y + w, d.y) && !fg; ++y)
        for (int x = c.x; x < std::min(c.x + w, d.x) && !fg; ++x) fg = labels(x, y, z) != 0;
    (fg ? foreground_ : background_).push_back(t);
  }
}

Index3 BlockSampler::draw(CounterRng& rng, double fg_fraction) const {
  const auto pick = [&](const std::vector<std::size_t>& from) {
    return tiles_[from[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(from.size()) - 1))]];
  };
  if (fg_fraction <= 0.0 || foreground_.empty()) {
    return tiles_[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(tiles_.size()) - 1))];
  }
  const bool want_fg = rng.uniform() < fg_fraction;
  if (want_fg || background_.empty()) return pick(foreground_);
  return pick(background_);
}

SampleResult sample_training_blocks(const LabelVolume& labels, const BlockGeometry& geometry,
                                    std::size_t count, double fg_fraction, std::uint64_t seed) {
  if (!(fg_fraction >= 0.0 && fg_fraction <= 1.0)) {
    throw ConfigError("fg_fraction must lie in [0, 1]");
  }
  BlockSampler sampler(labels, geometry);
  CounterRng rng(derive_seed(seed, "blocks"));
  SampleResult result;
  result.fallback_uniform = fg_fraction > 0.0 && !sampler.has_foreground();
  result.origins.reserve(count);
  for (std::size_t i = 0; i < count; ++i) result.origins.push_back(sampler.draw(rng, fg_fraction));
  return result;
}

}  // namespace vxseg
