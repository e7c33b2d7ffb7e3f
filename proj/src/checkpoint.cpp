#include "vxseg/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "vxseg/errors.hpp"

namespace vxseg {

namespace {

class Writer {
 public:
  template <class T>
  void put(T v) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    bytes.insert(bytes.end(), raw, raw + sizeof(T));
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
  template <class T>
  T get(const char* field) {
    if (bytes_.size() - pos_ < sizeof(T)) {
      throw FormatError(std::string("checkpoint truncated while reading ") + field, pos_);
    }
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelParams& params) {
  const ModelConfig& c = params.config;
  Writer w;
  for (char ch : {'V', 'X', 'F', 'M'}) w.put(static_cast<std::uint8_t>(ch));
  w.put(kCheckpointVersion);
  for (int v : {c.geometry.block, c.geometry.patch, c.geometry.channels, c.dim, c.heads, c.layers,
                c.ffn_dim, c.classes})
    w.put(static_cast<std::uint32_t>(v));
  w.put(static_cast<std::uint8_t>(c.positional ? 1 : 0));
  w.put(static_cast<std::uint8_t>(c.decoder_input));
  w.put(c.layernorm_eps);
  w.put(c.intensity_center);
  w.put(c.intensity_scale);
  w.put(params.seed);
  const auto tensors = params.tensors();
  w.put(static_cast<std::uint32_t>(tensors.size()));
  for (const Tensor* t : tensors) {
    w.put(static_cast<std::uint32_t>(t->rank()));
    for (auto e : t->shape()) w.put(static_cast<std::uint32_t>(e));
    for (double v : t->data()) w.put(v);
  }
  return std::move(w.bytes);
}

ModelParams decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[4];
  for (char& ch : magic) ch = static_cast<char>(r.get<std::uint8_t>("magic"));
  if (std::memcmp(magic, "VXFM", 4) != 0) throw FormatError("bad magic, expected VXFM", 0);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
  }
  ModelConfig c;
  const std::size_t config_at = r.pos();
  int* fields[] = {&c.geometry.block, &c.geometry.patch, &c.geometry.channels, &c.dim,
                   &c.heads,          &c.layers,        &c.ffn_dim,           &c.classes};
  for (int* f : fields) *f = static_cast<int>(r.get<std::uint32_t>("config"));
  c.positional = r.get<std::uint8_t>("positional") != 0;
  const auto di = r.get<std::uint8_t>("decoder_input");
  if (di > 1) throw FormatError("unknown decoder input mode", r.pos() - 1);
  c.decoder_input = static_cast<DecoderInput>(di);
  c.layernorm_eps = r.get<double>("layernorm_eps");
  c.intensity_center = r.get<double>("intensity_center");
  c.intensity_scale = r.get<double>("intensity_scale");
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid config echo: ") + e.what(), config_at);
  }
  const auto seed = r.get<std::uint64_t>("seed");

  // Shapes come from the config; the stored extents must agree.
  ModelParams p = init_model(c, seed);
  auto tensors = p.tensors();
  const auto count = r.get<std::uint32_t>("tensor count");
  if (count != tensors.size()) {
    throw FormatError("checkpoint holds " + std::to_string(count) + " tensors, config implies " +
                          std::to_string(tensors.size()),
                      r.pos() - 4);
  }
  for (Tensor* t : tensors) {
    const std::size_t at = r.pos();
    const auto rank = r.get<std::uint32_t>("rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank && i < 8; ++i) shape.push_back(r.get<std::uint32_t>("extent"));
    if (shape != t->shape()) {
      throw FormatError("tensor shape " + shape_string(shape) + " disagrees with config (" +
                            shape_string(t->shape()) + ")",
                        at);
    }
    if (r.remaining() < t->size() * sizeof(double)) {
      throw FormatError("checkpoint truncated inside tensor data", r.pos());
    }
    for (auto& v : t->data()) v = r.get<double>("value");
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last tensor", r.pos());
  return p;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes(std::istreambuf_iterator<char>(f), {});
  return decode_checkpoint(bytes);
}

}  // namespace vxseg
