#include "vxseg/commands.hpp"

#include <fstream>
#include <iomanip>
#include <iterator>
#include <ostream>
#include <sstream>

#include "vxseg/checkpoint.hpp"
#include "vxseg/errors.hpp"
#include "vxseg/kernels.hpp"

namespace vxseg {

namespace fs = std::filesystem;

int exit_code_for(const std::exception& e) noexcept {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  return kExitData;
}

std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t file_hash(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return fnv1a64(std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), {}));
}

PhantomFiles phantom_files(int i) {
  const std::string p = "phantom" + std::to_string(i) + "_";
  return {p + "thin.vxl", p + "thin_labels.vxl", p + "thick.vxl", p + "thick_labels.vxl"};
}

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("write failed for " + path.string());
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

std::vector<ThinThickPair> load_pairs(const ExperimentConfig& config) {
  std::vector<ThinThickPair> pairs;
  const int r = config.loss.r;
  for (int i = 0; i < config.phantoms; ++i) {
    if (config.data_dir.empty()) {
      pairs.push_back(generate_phantom(config.phantom_seed(i), config.phantom_dims, r));
      continue;
    }
    const fs::path dir = config.data_dir;
    const auto files = phantom_files(i);
    ThinThickPair p;
    p.r = r;
    p.thin = read_intensity(dir / files.thin);
    p.thin_labels = read_labels(dir / files.thin_labels);
    p.thick = read_intensity(dir / files.thick);
    p.thick_labels = read_labels(dir / files.thick_labels);
    const Dims t = p.thin.dims(), k = p.thick.dims();
    if (!(p.thin_labels.dims() == t) || !(p.thick_labels.dims() == k) || k.x != t.x || k.y != t.y ||
        k.z * r != t.z) {
      throw DimensionError("phantom " + std::to_string(i) + ": thin " + dims_string(t) +
                           " and thick " + dims_string(k) + " do not correspond under r = " +
                           std::to_string(r));
    }
    pairs.push_back(std::move(p));
  }
  return pairs;
}

GenerateResult cmd_generate(const ExperimentConfig& config, std::ostream& log) {
  if (config.phantoms < 1) throw ConfigError("phantoms must be >= 1");
  const Dims d = config.phantom_dims;
  if (d.x < 24 || d.y < 24 || d.z < 24) throw ConfigError("phantom_dims must be >= 24 per axis");
  if (config.loss.r < 1 || d.z % config.loss.r != 0) {
    throw ConfigError("phantom depth " + std::to_string(d.z) + " is not divisible by r = " +
                      std::to_string(config.loss.r));
  }
  // Generate everything before the first write.
  std::vector<ThinThickPair> pairs;
  for (int i = 0; i < config.phantoms; ++i)
    pairs.push_back(generate_phantom(config.phantom_seed(i), d, config.loss.r));

  const fs::path dir = config.output_dir;
  ensure_dir(dir);
  std::ostringstream m;
  m << "format: vxseg-phantom-manifest 1\n"
    << "seed: " << config.seed << '\n'
    << "phantoms: " << config.phantoms << '\n'
    << "dims: " << dims_string(d) << '\n'
    << "r: " << config.loss.r << '\n';
  std::array<std::uint64_t, kPhantomClasses> totals{};
  for (int i = 0; i < config.phantoms; ++i) {
    const auto files = phantom_files(i);
    const auto& p = pairs[i];
    write_volume(p.thin, dir / files.thin);
    write_volume(p.thin_labels, dir / files.thin_labels);
    write_volume(p.thick, dir / files.thick);
    write_volume(p.thick_labels, dir / files.thick_labels);
    m << "phantom " << i << " seed: " << config.phantom_seed(i) << '\n';
    for (const auto& f : {files.thin, files.thin_labels, files.thick, files.thick_labels})
      m << "phantom " << i << " file: " << f << " fnv1a64=" << hex(file_hash(dir / f)) << '\n';
    std::array<std::uint64_t, kPhantomClasses> counts{};
    for (auto l : p.thin_labels.voxels()) ++counts[l];
    m << "phantom " << i << " thin_class_voxels:";
    for (int c = 0; c < kPhantomClasses; ++c) {
      m << ' ' << counts[c];
      totals[c] += counts[c];
    }
    m << '\n';
  }
  m << "classes_present:";
  for (int c = 0; c < kPhantomClasses; ++c)
    if (totals[c] > 0) m << ' ' << kClassNames[c];
  m << '\n';

  GenerateResult out;
  out.manifest = dir / "manifest.txt";
  write_text(out.manifest, m.str());
  out.manifest_hash = file_hash(out.manifest);
  log << "wrote " << config.phantoms << " phantom pair(s) to " << dir.string() << " (manifest "
      << hex(out.manifest_hash) << ")\n";
  return out;
}

TrainCommandResult cmd_train(const ExperimentConfig& config, std::ostream& log) {
  config.validate();
  kernels::set_threads(config.threads);
  auto pairs = load_pairs(config);
  const JointLossConfig loss = config.effective_loss();
  ModelParams params = init_model(config.model, config.init_seed());
  // Build the objective once up front so data errors surface before any write.
  JointObjective(pairs, config.model, loss);

  const fs::path dir = config.output_dir;
  ensure_dir(dir);
  TrainCommandResult out;
  out.config_echo = dir / "effective_config.txt";
  write_text(out.config_echo, config.to_text());

  const int every = std::max(1, loss.steps / 20);
  out.training = train(pairs, std::move(params), loss, [&](const LossReport& r) {
    if (r.step == 1 || r.step % every == 0 || r.step == loss.steps) {
      log << "step " << r.step << " total " << r.total << " (direct " << r.direct << ", mask "
          << r.mask << ", feat " << r.feat << ")\n";
    }
  });
  out.loss_csv = dir / "loss.csv";
  write_text(out.loss_csv, loss_curve_csv(out.training.curve));
  out.checkpoint = dir / "model.vxfm";
  save_checkpoint(out.training.params, out.checkpoint);
  log << "checkpoint written to " << out.checkpoint.string() << '\n';
  return out;
}

Prediction cmd_infer(const fs::path& checkpoint, const fs::path& volume_path, const fs::path& out_labels,
                     const std::optional<fs::path>& probs_prefix, int threads) {
  if (threads < 1) throw ConfigError("threads must be >= 1");
  kernels::set_threads(threads);
  const ModelParams params = load_checkpoint(checkpoint);
  const Volume volume = read_intensity(volume_path);
  Prediction pred;
  try {
    pred = predict_volume(volume, params);
  } catch (const ContractError& e) {
    throw DimensionError("checkpoint geometry (block " + std::to_string(params.config.geometry.block) +
                         ", patch " + std::to_string(params.config.geometry.patch) +
                         ") is incompatible with volume " + dims_string(volume.dims()) + ": " + e.what());
  }
  write_volume(pred.labels, out_labels);
  if (probs_prefix) {
    const auto& pv = pred.probabilities;
    for (int c = 0; c < pv.classes; ++c) {
      Volume pc(pv.dims, volume.spacing());
      for (std::size_t v = 0; v < pc.voxels().size(); ++v) pc.voxels()[v] = pv.at(v, c);
      write_volume(pc, fs::path(probs_prefix->string() + "_c" + std::to_string(c) + ".vxl"));
    }
  }
  return pred;
}

MetricsReport cmd_eval(const fs::path& gt_path, const fs::path& pred_path, const EvalOptions& options,
                       std::ostream& out) {
  const LabelVolume gt = read_labels(gt_path);
  const LabelVolume pred = read_labels(pred_path);
  if (!(gt.dims() == pred.dims())) {
    throw DimensionError("ground truth " + dims_string(gt.dims()) + " and prediction " +
                         dims_string(pred.dims()) + " differ");
  }
  const auto report = evaluate(gt, pred, default_label_set(options.classes, options.include_background),
                               options.denominator);
  const auto csv = report_csv(report);
  out << csv;
  if (options.out_csv) write_text(*options.out_csv, csv);
  return report;
}

void cmd_make_thick(const fs::path& thin_path, int r, const fs::path& out_volume,
                    const std::optional<fs::path>& thin_labels, const std::optional<fs::path>& out_labels) {
  if (thin_labels.has_value() != out_labels.has_value()) {
    throw ConfigError("label input and label output must be given together");
  }
  const Volume thin = read_intensity(thin_path);
  const Volume thick = aip_project(thin, r);
  std::optional<LabelVolume> thick_labels;
  if (thin_labels) thick_labels = majority_label_project(read_labels(*thin_labels), r);
  write_volume(thick, out_volume);
  if (thick_labels) write_volume(*thick_labels, *out_labels);
}

}  // namespace vxseg
