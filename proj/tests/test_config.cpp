#include "doctest.h"
#include "vxseg/commands.hpp"
#include "vxseg/config.hpp"
#include "vxseg/errors.hpp"

using namespace vxseg;

TEST_CASE("defaults validate and round-trip through text") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(ExperimentConfig::parse(c.to_text()).to_text() == c.to_text());

  c.set("dim", "32");
  c.set("heads", "2");
  c.set("class_weights", "1,2,3,4,5,6");
  c.set("decoder_input", "mean");
  c.set("learning_rate", "0.0003");
  c.set_assignment("phantom_dims=32,40,48");
  const ExperimentConfig back = ExperimentConfig::parse(c.to_text());
  CHECK(back.to_text() == c.to_text());
  CHECK(back.model.dim == 32);
  CHECK(back.loss.class_weights.size() == 6);
  CHECK(back.model.decoder_input == DecoderInput::mean_tokens);
  CHECK(back.phantom_dims == Dims{32, 40, 48});
  for (const auto& k : ExperimentConfig::keys()) CHECK(c.to_text().find(k + " = ") != std::string::npos);
}

TEST_CASE("parse errors are config errors") {
  ExperimentConfig c;
  CHECK_THROWS_AS(c.set("no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(c.set("dim", "abc"), ConfigError);
  CHECK_THROWS_AS(c.set("positional", "maybe"), ConfigError);
  CHECK_THROWS_AS(c.set_assignment("dim"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse("dim 3\n"), ConfigError);
  CHECK(ExperimentConfig::parse("# comment\n\ndim = 48 # trailing\nheads = 4\n").model.dim == 48);
}

TEST_CASE("cross-field validation") {
  ExperimentConfig c;
  c.set("heads", "5");
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.set("patch", "6");
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.set("block", "16");
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.set("phantom_dims", "48,48,50");
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.set("threads", "0");
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("named sub-seeds") {
  ExperimentConfig a, b;
  b.seed = 1;
  CHECK(a.data_seed() != a.init_seed());
  CHECK(a.init_seed() != a.sampling_seed());
  CHECK(a.data_seed() != b.data_seed());
  CHECK(a.phantom_seed(0) != a.phantom_seed(1));
  CHECK(a.effective_loss().seed == a.sampling_seed());
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ConfigError("x")) == kExitConfig);
  CHECK(exit_code_for(NumericError("x")) == kExitNumeric);
  CHECK(exit_code_for(FormatError("x", 0)) == kExitData);
  CHECK(exit_code_for(DimensionError("x")) == kExitData);
  CHECK(exit_code_for(IoError("x")) == kExitData);
}
