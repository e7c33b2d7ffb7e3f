#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace vxseg {

struct Dims {
  int x = 1, y = 1, z = 1;

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

struct Spacing {
  float x = 1.0f, y = 1.0f, z = 1.0f;
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

std::string dims_string(const Dims& d);

/// Voxel grid, x fastest then y then z.
template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(Dims dims, Spacing spacing, T fill = T{});
  Grid(Dims dims, Spacing spacing, std::vector<T> voxels);

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  void set_spacing(Spacing s);

  std::size_t index(int x, int y, int z) const noexcept {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims_.x) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims_.y) * static_cast<std::size_t>(z));
  }
  T operator()(int x, int y, int z) const noexcept { return voxels_[index(x, y, z)]; }
  T& operator()(int x, int y, int z) noexcept { return voxels_[index(x, y, z)]; }

  const std::vector<T>& voxels() const noexcept { return voxels_; }
  std::vector<T>& voxels() noexcept { return voxels_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  Dims dims_;
  Spacing spacing_;
  std::vector<T> voxels_ = std::vector<T>(1);
};

/// Intensity volume. Persisted as f32, held as f64 in memory.
using Volume = Grid<double>;

/// Label volume. Labels are in [0, L-1].
using LabelVolume = Grid<std::uint8_t>;

inline constexpr int kPhantomClasses = 6;
inline constexpr std::array<const char*, kPhantomClasses> kClassNames = {
    "background", "EDH", "ICH", "IVH", "SAH", "SDH"};

/// Throws ContractError if any label is >= num_classes.
void validate_labels(const LabelVolume& labels, int num_classes);

// ---------------------------------------------------------------------------
// VXL1 file format (little-endian):
//   magic "VXL1" | u8 kind (0 = intensity f32, 1 = labels u8) |
//   u32 X, Y, Z | f32 sx, sy, sz | X*Y*Z payload elements, x fastest.
// ---------------------------------------------------------------------------

using AnyVolume = std::variant<Volume, LabelVolume>;

void write_volume(const Volume& v, const std::filesystem::path& path);
void write_volume(const LabelVolume& v, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_volume(const Volume& v);
std::vector<std::uint8_t> encode_volume(const LabelVolume& v);

AnyVolume read_volume(const std::filesystem::path& path);
AnyVolume decode_volume(const std::vector<std::uint8_t>& bytes);
/// Reads and requires the given kind (FormatError otherwise).
Volume read_intensity(const std::filesystem::path& path);
LabelVolume read_labels(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Thick-slice synthesis
// ---------------------------------------------------------------------------

/// Average intensity projection: thick slice k is the mean of thin slices
/// [k*r, (k+1)*r). Throws ContractError when Z is not divisible by r.
Volume aip_project(const Volume& thin, int r);

/// Each thick voxel takes the most frequent label of its r-group; ties go to
/// the smallest label id.
LabelVolume majority_label_project(const LabelVolume& thin, int r);

/// Repeats every slice r times along z and divides sz by r.
template <class T>
Grid<T> replicate_z(const Grid<T>& thick, int r);

}  // namespace vxseg
