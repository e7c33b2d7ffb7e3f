// vxseg command-line entry point: generate / train / infer / eval / make-thick.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vxseg/commands.hpp"
#include "vxseg/errors.hpp"

namespace {

struct ConfigFlags {
  std::string file;
  std::vector<std::string> assignments;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> steps;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", file, "key = value config file");
    app->add_option("-s,--set", assignments, "override a config key (key=value), repeatable");
    app->add_option("-o,--out", out, "output directory");
    app->add_option("--seed", seed, "master seed");
    app->add_option("--threads", threads, "worker threads");
    app->add_option("--steps", steps, "training steps");
  }

  // Flags win over the file.
  vxseg::ExperimentConfig resolve() const {
    auto cfg = file.empty() ? vxseg::ExperimentConfig{} : vxseg::ExperimentConfig::load(file);
    for (const auto& a : assignments) cfg.set_assignment(a);
    if (out) cfg.output_dir = *out;
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (steps) cfg.loss.steps = *steps;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convolution-free volumetric segmentation with thin/thick supervision"};
  app.require_subcommand(1);

  ConfigFlags gen_flags, train_flags;
  auto* gen = app.add_subcommand("generate", "write synthetic thin/thick phantom pairs");
  gen_flags.attach(gen);
  auto* tr = app.add_subcommand("train", "train on phantom pairs with the joint loss");
  train_flags.attach(tr);

  std::string ckpt, vol, out, probs;
  int infer_threads = 1;
  auto* inf = app.add_subcommand("infer", "predict a label volume");
  inf->add_option("--checkpoint", ckpt, "model checkpoint (VXFM)")->required();
  inf->add_option("--volume", vol, "intensity volume (VXL1)")->required();
  inf->add_option("--out", out, "output label volume")->required();
  inf->add_option("--probs", probs, "prefix for per-class probability volumes");
  inf->add_option("--threads", infer_threads, "worker threads");

  std::string gt, pred, csv;
  bool with_bg = false, dice_union = false;
  int classes = vxseg::kPhantomClasses;
  auto* ev = app.add_subcommand("eval", "IoU / mIoU / DSC of a prediction");
  ev->add_option("--gt", gt, "ground-truth labels")->required();
  ev->add_option("--pred", pred, "predicted labels")->required();
  ev->add_option("--out", csv, "also write the CSV here");
  ev->add_option("--classes", classes, "class count L");
  ev->add_flag("--include-background", with_bg, "evaluate label 0 too");
  ev->add_flag("--dice-union", dice_union, "use |A u B| as Dice denominator (comparison only)");

  std::string thin, thin_labels, thick_out, thick_labels_out;
  int r = 0;
  auto* mk = app.add_subcommand("make-thick", "average-intensity projection to thick slices");
  mk->add_option("--thin", thin, "thin intensity volume")->required();
  mk->add_option("--r", r, "slices per thick slice")->required();
  mk->add_option("--out", thick_out, "thick intensity output")->required();
  mk->add_option("--labels", thin_labels, "thin label volume");
  mk->add_option("--out-labels", thick_labels_out, "thick label output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : vxseg::kExitConfig;
  }

  try {
    if (*gen) {
      vxseg::cmd_generate(gen_flags.resolve(), std::cout);
    } else if (*tr) {
      vxseg::cmd_train(train_flags.resolve(), std::cout);
    } else if (*inf) {
      vxseg::cmd_infer(ckpt, vol, out, probs.empty() ? std::nullopt : std::optional<std::filesystem::path>(probs),
                       infer_threads);
    } else if (*ev) {
      vxseg::EvalOptions opt;
      opt.include_background = with_bg;
      opt.classes = classes;
      opt.denominator = dice_union ? vxseg::DiceDenominator::set_union : vxseg::DiceDenominator::sum_of_sizes;
      if (!csv.empty()) opt.out_csv = csv;
      vxseg::cmd_eval(gt, pred, opt, std::cout);
    } else if (*mk) {
      using P = std::optional<std::filesystem::path>;
      vxseg::cmd_make_thick(thin, r, thick_out, thin_labels.empty() ? P{} : P{thin_labels},
                            thick_labels_out.empty() ? P{} : P{thick_labels_out});
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return vxseg::exit_code_for(e);
  }
  return vxseg::kExitOk;
}
