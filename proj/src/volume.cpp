#include "vxseg/volume.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "vxseg/errors.hpp"

namespace vxseg {

static_assert(std::endian::native == std::endian::little, "VXL1 I/O assumes a little-endian host");

std::string dims_string(const Dims& d) {
  return std::to_string(d.x) + "x" + std::to_string(d.y) + "x" + std::to_string(d.z);
}

namespace {

void validate_geometry(const Dims& dims, const Spacing& s) {
  if (dims.x < 1 || dims.y < 1 || dims.z < 1) {
    throw ContractError("volume dims must be >= 1, got " + dims_string(dims));
  }
  if (!(s.x > 0 && s.y > 0 && s.z > 0) || !std::isfinite(s.x) || !std::isfinite(s.y) ||
      !std::isfinite(s.z)) {
    throw ContractError("volume spacing must be positive and finite");
  }
}

constexpr char kMagic[4] = {'V', 'X', 'L', '1'};
constexpr std::size_t kHeaderBytes = 4 + 1 + 3 * 4 + 3 * 4;

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

template <class T>
T get(const std::vector<std::uint8_t>& in, std::size_t& pos, const char* field) {
  if (in.size() - pos < sizeof(T) || pos > in.size()) {
    throw FormatError(std::string("truncated header while reading ") + field, pos);
  }
  T value;
  std::memcpy(&value, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

void put_header(std::vector<std::uint8_t>& out, std::uint8_t kind, const Dims& d, const Spacing& s) {
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put<std::uint8_t>(out, kind);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.x));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.y));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(d.z));
  put<float>(out, s.x);
  put<float>(out, s.y);
  put<float>(out, s.z);
}

void write_bytes(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), {});
}

void check_divisible(const Dims& d, int r, const char* op) {
  if (r < 1) throw ContractError(std::string(op) + ": factor r must be >= 1");
  if (d.z % r != 0) {
    throw ContractError(std::string(op) + ": depth " + std::to_string(d.z) +
                        " is not divisible by r = " + std::to_string(r));
  }
}

}  // namespace

template <class T>
Grid<T>::Grid(Dims dims, Spacing spacing, T fill)
    : dims_(dims), spacing_(spacing) {
  validate_geometry(dims_, spacing_);
  voxels_.assign(dims_.count(), fill);
}

template <class T>
Grid<T>::Grid(Dims dims, Spacing spacing, std::vector<T> voxels)
    : dims_(dims), spacing_(spacing), voxels_(std::move(voxels)) {
  validate_geometry(dims_, spacing_);
  if (voxels_.size() != dims_.count()) {
    throw DimensionError("volume " + dims_string(dims_) + " needs " +
                         std::to_string(dims_.count()) + " voxels, got " +
                         std::to_string(voxels_.size()));
  }
}

template <class T>
void Grid<T>::set_spacing(Spacing s) {
  validate_geometry(dims_, s);
  spacing_ = s;
}

template class Grid<double>;
template class Grid<std::uint8_t>;

void validate_labels(const LabelVolume& labels, int num_classes) {
  for (auto l : labels.voxels()) {
    if (l >= num_classes) {
      throw ContractError("label " + std::to_string(l) + " exceeds class count " +
                          std::to_string(num_classes));
    }
  }
}

std::vector<std::uint8_t> encode_volume(const Volume& v) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + v.voxels().size() * 4);
  put_header(out, 0, v.dims(), v.spacing());
  for (double x : v.voxels()) put<float>(out, static_cast<float>(x));
  return out;
}

std::vector<std::uint8_t> encode_volume(const LabelVolume& v) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + v.voxels().size());
  put_header(out, 1, v.dims(), v.spacing());
  out.insert(out.end(), v.voxels().begin(), v.voxels().end());
  return out;
}

void write_volume(const Volume& v, const std::filesystem::path& path) {
  write_bytes(encode_volume(v), path);
}

void write_volume(const LabelVolume& v, const std::filesystem::path& path) {
  write_bytes(encode_volume(v), path);
}

AnyVolume decode_volume(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw FormatError("bad magic, expected VXL1", 0);
  }
  std::size_t pos = 4;
  const auto kind = get<std::uint8_t>(bytes, pos, "kind");
  if (kind > 1) throw FormatError("unknown volume kind " + std::to_string(kind), pos - 1);
  Dims d;
  const std::size_t dims_at = pos;
  d.x = static_cast<int>(get<std::uint32_t>(bytes, pos, "X"));
  d.y = static_cast<int>(get<std::uint32_t>(bytes, pos, "Y"));
  d.z = static_cast<int>(get<std::uint32_t>(bytes, pos, "Z"));
  if (d.x < 1 || d.y < 1 || d.z < 1) throw FormatError("dims must be >= 1", dims_at);
  Spacing s;
  const std::size_t spacing_at = pos;
  s.x = get<float>(bytes, pos, "sx");
  s.y = get<float>(bytes, pos, "sy");
  s.z = get<float>(bytes, pos, "sz");
  if (!(s.x > 0 && s.y > 0 && s.z > 0) || !std::isfinite(s.x) || !std::isfinite(s.y) ||
      !std::isfinite(s.z)) {
    throw FormatError("spacing must be positive and finite", spacing_at);
  }
  const std::size_t elem = kind == 0 ? 4 : 1;
  const std::size_t expected = d.count() * elem;
  const std::size_t payload = bytes.size() - pos;
  if (payload != expected) {
    throw FormatError("payload holds " + std::to_string(payload) + " bytes but dims " +
                          dims_string(d) + " need " + std::to_string(expected),
                      pos + std::min(payload, expected));
  }
  if (kind == 0) {
    std::vector<double> vox(d.count());
    for (auto& v : vox) v = get<float>(bytes, pos, "voxel");
    return Volume(d, s, std::move(vox));
  }
  return LabelVolume(d, s, std::vector<std::uint8_t>(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end()));
}

AnyVolume read_volume(const std::filesystem::path& path) {
  return decode_volume(read_bytes(path));
}

Volume read_intensity(const std::filesystem::path& path) {
  auto any = read_volume(path);
  if (auto* v = std::get_if<Volume>(&any)) return std::move(*v);
  throw FormatError(path.string() + " holds labels, expected an intensity volume", 4);
}

LabelVolume read_labels(const std::filesystem::path& path) {
  auto any = read_volume(path);
  if (auto* v = std::get_if<LabelVolume>(&any)) return std::move(*v);
  throw FormatError(path.string() + " holds intensities, expected a label volume", 4);
}

Volume aip_project(const Volume& thin, int r) {
  const Dims& d = thin.dims();
  check_divisible(d, r, "aip_project");
  Dims out{d.x, d.y, d.z / r};
  Spacing s = thin.spacing();
  s.z *= static_cast<float>(r);
  Volume thick(out, s);
  // Offsets are averaged relative to the group's first slice, so a group of
  // identical values reproduces that value exactly.
  for (int k = 0; k < out.z; ++k)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < d.x; ++x) {
        const double base = thin(x, y, k * r);
        double acc = 0.0;
        for (int j = 1; j < r; ++j) acc += thin(x, y, k * r + j) - base;
        thick(x, y, k) = base + acc / r;
      }
  return thick;
}

LabelVolume majority_label_project(const LabelVolume& thin, int r) {
  const Dims& d = thin.dims();
  check_divisible(d, r, "majority_label_project");
  Dims out{d.x, d.y, d.z / r};
  Spacing s = thin.spacing();
  s.z *= static_cast<float>(r);
  LabelVolume thick(out, s);
  std::array<int, 256> votes{};
  for (int k = 0; k < out.z; ++k)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < d.x; ++x) {
        for (int j = 0; j < r; ++j) ++votes[thin(x, y, k * r + j)];
        int best = 0;
        for (int l = 1; l < 256; ++l)
          if (votes[l] > votes[best]) best = l;
        thick(x, y, k) = static_cast<std::uint8_t>(best);
        for (int j = 0; j < r; ++j) votes[thin(x, y, k * r + j)] = 0;
      }
  return thick;
}

template <class T>
Grid<T> replicate_z(const Grid<T>& thick, int r) {
  if (r < 1) throw ContractError("replicate_z: factor r must be >= 1");
  const Dims& d = thick.dims();
  Spacing s = thick.spacing();
  s.z /= static_cast<float>(r);
  Grid<T> thin(Dims{d.x, d.y, d.z * r}, s);
  const std::size_t plane = static_cast<std::size_t>(d.x) * d.y;
  for (int k = 0; k < d.z; ++k)
    for (int j = 0; j < r; ++j)
      std::copy_n(thick.voxels().begin() + static_cast<std::ptrdiff_t>(k * plane), plane,
                  thin.voxels().begin() + static_cast<std::ptrdiff_t>((k * r + j) * plane));
  return thin;
}

template Grid<double> replicate_z(const Grid<double>&, int);
template Grid<std::uint8_t> replicate_z(const Grid<std::uint8_t>&, int);

}  // namespace vxseg
