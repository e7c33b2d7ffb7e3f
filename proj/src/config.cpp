#include "vxseg/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "vxseg/errors.hpp"
#include "vxseg/rng.hpp"

namespace vxseg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("'" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::logic_error&) {
    throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  throw ConfigError("'" + key + "': expected true/false, got '" + v + "'");
}

std::vector<std::string> split(const std::string& v, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& ExperimentConfig::keys() {
  static const std::vector<std::string> k = {
      "seed", "threads", "output_dir", "data_dir", "phantoms", "phantom_dims", "r",
      "block", "patch", "channels", "dim", "heads", "layers", "ffn_dim", "classes",
      "layernorm_eps", "positional", "decoder_input", "intensity_center", "intensity_scale",
      "lambda_direct", "lambda_mask", "lambda_feat", "class_weights", "learning_rate", "beta1",
      "beta2", "adam_epsilon", "steps", "batch_size", "fg_fraction", "mask_averaging",
      "feature_layer"};
  return k;
}

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  auto& g = model.geometry;
  if (key == "seed") seed = parse_int<std::uint64_t>(key, v);
  else if (key == "threads") threads = parse_int<int>(key, v);
  else if (key == "output_dir") output_dir = v;
  else if (key == "data_dir") data_dir = v;
  else if (key == "phantoms") phantoms = parse_int<int>(key, v);
  else if (key == "phantom_dims") {
    const auto parts = split(v, ',');
    if (parts.size() != 3) throw ConfigError("'phantom_dims': expected X,Y,Z");
    phantom_dims = {parse_int<int>(key, parts[0]), parse_int<int>(key, parts[1]),
                    parse_int<int>(key, parts[2])};
  } else if (key == "r") loss.r = parse_int<int>(key, v);
  else if (key == "block") g.block = parse_int<int>(key, v);
  else if (key == "patch") g.patch = parse_int<int>(key, v);
  else if (key == "channels") g.channels = parse_int<int>(key, v);
  else if (key == "dim") model.dim = parse_int<int>(key, v);
  else if (key == "heads") model.heads = parse_int<int>(key, v);
  else if (key == "layers") model.layers = parse_int<int>(key, v);
  else if (key == "ffn_dim") model.ffn_dim = parse_int<int>(key, v);
  else if (key == "classes") model.classes = parse_int<int>(key, v);
  else if (key == "layernorm_eps") model.layernorm_eps = parse_double(key, v);
  else if (key == "positional") model.positional = parse_bool(key, v);
  else if (key == "decoder_input") {
    if (v == "center") model.decoder_input = DecoderInput::center_token;
    else if (v == "mean") model.decoder_input = DecoderInput::mean_tokens;
    else throw ConfigError("'decoder_input': expected center or mean");
  } else if (key == "intensity_center") model.intensity_center = parse_double(key, v);
  else if (key == "intensity_scale") model.intensity_scale = parse_double(key, v);
  else if (key == "lambda_direct") loss.lambda_direct = parse_double(key, v);
  else if (key == "lambda_mask") loss.lambda_mask = parse_double(key, v);
  else if (key == "lambda_feat") loss.lambda_feat = parse_double(key, v);
  else if (key == "class_weights") {
    loss.class_weights.clear();
    if (v != "auto")
      for (const auto& p : split(v, ',')) loss.class_weights.push_back(parse_double(key, p));
  } else if (key == "learning_rate") loss.adam.learning_rate = parse_double(key, v);
  else if (key == "beta1") loss.adam.beta1 = parse_double(key, v);
  else if (key == "beta2") loss.adam.beta2 = parse_double(key, v);
  else if (key == "adam_epsilon") loss.adam.epsilon = parse_double(key, v);
  else if (key == "steps") loss.steps = parse_int<int>(key, v);
  else if (key == "batch_size") loss.batch_size = parse_int<int>(key, v);
  else if (key == "fg_fraction") loss.fg_fraction = parse_double(key, v);
  else if (key == "mask_averaging") {
    if (v == "probabilities") loss.mask_averaging = MaskAveraging::probabilities;
    else if (v == "logits") loss.mask_averaging = MaskAveraging::logits;
    else throw ConfigError("'mask_averaging': expected probabilities or logits");
  } else if (key == "feature_layer") loss.feature_layer = parse_int<int>(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

void ExperimentConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

std::string ExperimentConfig::to_text() const {
  const auto& g = model.geometry;
  std::string weights = "auto";
  if (!loss.class_weights.empty()) {
    weights.clear();
    for (std::size_t i = 0; i < loss.class_weights.size(); ++i)
      weights += (i ? "," : "") + fmt(loss.class_weights[i]);
  }
  std::ostringstream os;
  os << "seed = " << seed << '\n'
     << "threads = " << threads << '\n'
     << "output_dir = " << output_dir << '\n'
     << "data_dir = " << data_dir << '\n'
     << "phantoms = " << phantoms << '\n'
     << "phantom_dims = " << phantom_dims.x << ',' << phantom_dims.y << ',' << phantom_dims.z << '\n'
     << "r = " << loss.r << '\n'
     << "block = " << g.block << '\n'
     << "patch = " << g.patch << '\n'
     << "channels = " << g.channels << '\n'
     << "dim = " << model.dim << '\n'
     << "heads = " << model.heads << '\n'
     << "layers = " << model.layers << '\n'
     << "ffn_dim = " << model.ffn_dim << '\n'
     << "classes = " << model.classes << '\n'
     << "layernorm_eps = " << fmt(model.layernorm_eps) << '\n'
     << "positional = " << (model.positional ? "true" : "false") << '\n'
     << "decoder_input = " << (model.decoder_input == DecoderInput::center_token ? "center" : "mean") << '\n'
     << "intensity_center = " << fmt(model.intensity_center) << '\n'
     << "intensity_scale = " << fmt(model.intensity_scale) << '\n'
     << "lambda_direct = " << fmt(loss.lambda_direct) << '\n'
     << "lambda_mask = " << fmt(loss.lambda_mask) << '\n'
     << "lambda_feat = " << fmt(loss.lambda_feat) << '\n'
     << "class_weights = " << weights << '\n'
     << "learning_rate = " << fmt(loss.adam.learning_rate) << '\n'
     << "beta1 = " << fmt(loss.adam.beta1) << '\n'
     << "beta2 = " << fmt(loss.adam.beta2) << '\n'
     << "adam_epsilon = " << fmt(loss.adam.epsilon) << '\n'
     << "steps = " << loss.steps << '\n'
     << "batch_size = " << loss.batch_size << '\n'
     << "fg_fraction = " << fmt(loss.fg_fraction) << '\n'
     << "mask_averaging = " << (loss.mask_averaging == MaskAveraging::probabilities ? "probabilities" : "logits") << '\n'
     << "feature_layer = " << loss.feature_layer << '\n';
  return os.str();
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  ExperimentConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

void ExperimentConfig::validate() const {
  model.validate();
  loss.validate(model);
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (phantoms < 1) throw ConfigError("phantoms must be >= 1");
  if (data_dir.empty()) {
    if (phantom_dims.x < 24 || phantom_dims.y < 24 || phantom_dims.z < 24) {
      throw ConfigError("phantom_dims must be >= 24 per axis");
    }
    if (phantom_dims.z % loss.r != 0) {
      throw ConfigError("phantom depth " + std::to_string(phantom_dims.z) +
                        " is not divisible by r = " + std::to_string(loss.r));
    }
  }
  if (model.geometry.channels != 1) throw ConfigError("only single-channel volumes are supported");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

std::uint64_t ExperimentConfig::data_seed() const { return derive_seed(seed, "data"); }
std::uint64_t ExperimentConfig::init_seed() const { return derive_seed(seed, "init"); }
std::uint64_t ExperimentConfig::sampling_seed() const { return derive_seed(seed, "sampling"); }
std::uint64_t ExperimentConfig::phantom_seed(int index) const {
  return derive_seed(data_seed(), "phantom" + std::to_string(index));
}

}  // namespace vxseg

namespace vxseg {
JointLossConfig ExperimentConfig::effective_loss() const {
  JointLossConfig l = loss;
  l.seed = sampling_seed();
  return l;
}
}  // namespace vxseg
