#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "test_support.hpp"
#include "vxseg/checkpoint.hpp"
#include "vxseg/commands.hpp"
#include "vxseg/metrics.hpp"

using namespace vxseg;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "vxseg_cli_test";

int run(const std::string& args) {
  const std::string cmd = std::string(VXSEG_CLI_PATH) + " " + args + " > " + (kRoot / "stdout.txt").string() +
                          " 2> " + (kRoot / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

std::string p(const std::string& name) { return (kRoot / name).string(); }

// Small enough for a quick run; phantoms still use the minimum extent.
const std::string kTiny =
    "--set phantoms=1 --set phantom_dims=24,24,24 --set block=6 --set patch=2 --set dim=8 --set heads=2 "
    "--set layers=1 --set ffn_dim=16 --set batch_size=2 --set r=2 ";

struct Fixture {
  Fixture() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
  }
};

}  // namespace

TEST_CASE_FIXTURE(Fixture, "usage errors exit with the config code") {
  CHECK(run("") == kExitConfig);
  CHECK(run("frobnicate") == kExitConfig);
  CHECK(run("generate --set nosuchkey=1 --out " + p("g")) == kExitConfig);
  CHECK(run("train --set heads=5 --out " + p("t")) == kExitConfig);
  CHECK_FALSE(fs::exists(p("t")));
}

TEST_CASE_FIXTURE(Fixture, "generate") {
  REQUIRE(run("generate --seed 3 --set phantoms=1 --out " + p("a")) == 0);
  REQUIRE(run("generate --seed 3 --set phantoms=1 --out " + p("b")) == 0);
  const std::string manifest = slurp(p("a") + "/manifest.txt");
  CHECK(manifest == slurp(p("b") + "/manifest.txt"));
  CHECK(manifest.find("classes_present: background EDH ICH IVH SAH SDH\n") != std::string::npos);
  for (const auto& f : {"phantom0_thin.vxl", "phantom0_thin_labels.vxl", "phantom0_thick.vxl",
                        "phantom0_thick_labels.vxl"})
    CHECK(fs::exists(kRoot / "a" / f));
  REQUIRE(run("generate --seed 4 --set phantoms=1 --out " + p("c")) == 0);
  CHECK(manifest != slurp(p("c") + "/manifest.txt"));

  CHECK(run("generate --set phantom_dims=48,48,50 --out " + p("bad")) == kExitConfig);
  CHECK_FALSE(fs::exists(p("bad")));
}

TEST_CASE_FIXTURE(Fixture, "train is reproducible and matches the library") {
  REQUIRE(run("train --steps 4 --seed 5 " + kTiny + "--out " + p("t1")) == 0);
  REQUIRE(run("train --steps 4 --seed 5 " + kTiny + "--out " + p("t2")) == 0);
  const std::string ckpt = slurp(p("t1") + "/model.vxfm");
  CHECK(ckpt == slurp(p("t2") + "/model.vxfm"));
  CHECK(slurp(p("t1") + "/loss.csv") == slurp(p("t2") + "/loss.csv"));

  // the echoed config alone reproduces the run
  REQUIRE(run("train --config " + p("t1") + "/effective_config.txt --out " + p("t3")) == 0);
  CHECK(ckpt == slurp(p("t3") + "/model.vxfm"));

  // a thick-only run is plain supervised training on replicated thick labels
  REQUIRE(run("train --steps 3 --seed 5 " + kTiny + "--set lambda_mask=0 --set lambda_feat=0 --out " + p("d")) == 0);
  const ExperimentConfig cfg = ExperimentConfig::load(p("d") + "/effective_config.txt");
  auto pairs = load_pairs(cfg);
  const TrainResult lib = train(pairs, init_model(cfg.model, cfg.init_seed()), cfg.effective_loss());
  const std::string stored = slurp(p("d") + "/model.vxfm");
  CHECK(encode_checkpoint(lib.params) == std::vector<std::uint8_t>(stored.begin(), stored.end()));
  const std::string csv = slurp(p("d") + "/loss.csv");
  CHECK(csv == loss_curve_csv(lib.curve));
}

TEST_CASE_FIXTURE(Fixture, "infer and eval") {
  REQUIRE(run("generate --seed 2 " + kTiny + "--out " + p("data")) == 0);
  REQUIRE(run("train --steps 2 --seed 2 " + kTiny + "--set data_dir=" + p("data") + " --out " + p("m")) == 0);
  const std::string vol = p("data") + "/phantom0_thin.vxl";
  REQUIRE(run("infer --checkpoint " + p("m") + "/model.vxfm --volume " + vol + " --out " + p("pred1.vxl") +
              " --probs " + p("prob")) == 0);
  REQUIRE(run("infer --threads 2 --checkpoint " + p("m") + "/model.vxfm --volume " + vol + " --out " +
              p("pred2.vxl")) == 0);
  CHECK(slurp(p("pred1.vxl")) == slurp(p("pred2.vxl")));
  CHECK(read_labels(p("pred1.vxl")).dims() == read_intensity(vol).dims());
  CHECK(fs::exists(p("prob_c0.vxl")));
  CHECK(fs::exists(p("prob_c5.vxl")));

  const std::string gt = p("data") + "/phantom0_thin_labels.vxl";
  REQUIRE(run("eval --gt " + gt + " --pred " + gt + " --out " + p("self.csv")) == 0);
  const auto self = parse_report_csv(slurp(p("self.csv")));
  CHECK(self.miou == 1.0);
  for (const auto& c : self.classes)
    if (c.iou) CHECK(*c.iou == 1.0);
  CHECK(slurp(p("self.csv")) == slurp(kRoot / "stdout.txt"));

  REQUIRE(run("eval --gt " + gt + " --pred " + p("pred1.vxl") + " --out " + p("e.csv")) == 0);
  const auto lib = evaluate(read_labels(gt), read_labels(p("pred1.vxl")), default_label_set(6));
  CHECK(slurp(p("e.csv")) == report_csv(lib));

  write_volume(LabelVolume({5, 5, 5}, {}, 0), p("small.vxl"));
  CHECK(run("eval --gt " + gt + " --pred " + p("small.vxl")) == kExitData);
  write_volume(Volume({3, 3, 3}, {}, 1.0), p("tiny.vxl"));
  CHECK(run("infer --checkpoint " + p("m") + "/model.vxfm --volume " + p("tiny.vxl") + " --out " + p("x.vxl")) ==
        kExitData);
  CHECK(slurp(kRoot / "stderr.txt").find("incompatible") != std::string::npos);
}

TEST_CASE_FIXTURE(Fixture, "eval on the cube fixture") {
  LabelVolume a({4, 4, 4}, {}, 0), b({4, 4, 4}, {}, 0);
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) {
        a(x, y, z) = 1;
        b(x + 1, y, z) = 1;
      }
  write_volume(a, p("a.vxl"));
  write_volume(b, p("b.vxl"));
  REQUIRE(run("eval --classes 2 --gt " + p("a.vxl") + " --pred " + p("b.vxl")) == 0);
  const auto r = parse_report_csv(slurp(kRoot / "stdout.txt"));
  REQUIRE(r.classes.size() == 1);
  CHECK(*r.classes[0].iou == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(*r.classes[0].dsc == 0.5);
}

TEST_CASE_FIXTURE(Fixture, "make-thick") {
  const Volume v = vxseg::testing::random_volume({6, 5, 8}, 9);
  Volume vf = v;
  for (auto& x : vf.voxels()) x = static_cast<float>(x);
  write_volume(vf, p("thin.vxl"));
  const LabelVolume l = vxseg::testing::random_labels({6, 5, 8}, 6, 3);
  write_volume(l, p("thin_l.vxl"));

  REQUIRE(run("make-thick --thin " + p("thin.vxl") + " --r 1 --out " + p("same.vxl")) == 0);
  CHECK(slurp(p("same.vxl")) == slurp(p("thin.vxl")));

  REQUIRE(run("make-thick --thin " + p("thin.vxl") + " --r 4 --out " + p("t.vxl") + " --labels " + p("thin_l.vxl") +
              " --out-labels " + p("t_l.vxl")) == 0);
  Volume expect = aip_project(vf, 4);
  for (auto& x : expect.voxels()) x = static_cast<float>(x);
  CHECK(read_intensity(p("t.vxl")) == expect);
  CHECK(read_labels(p("t_l.vxl")) == majority_label_project(l, 4));

  write_volume(Volume({3, 3, 4}, {}, 5.0), p("c.vxl"));
  REQUIRE(run("make-thick --thin " + p("c.vxl") + " --r 2 --out " + p("c2.vxl")) == 0);
  const Volume c2 = read_intensity(p("c2.vxl"));
  for (double x : c2.voxels()) CHECK(x == 5.0);

  CHECK(run("make-thick --thin " + p("thin.vxl") + " --r 3 --out " + p("no.vxl")) != 0);
  CHECK_FALSE(fs::exists(p("no.vxl")));
}
