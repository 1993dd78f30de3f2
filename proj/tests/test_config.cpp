#include <gtest/gtest.h>

#include "cpdvmc/config.hpp"
#include "helpers.hpp"

using namespace cpdvmc;
using nlohmann::json;

namespace {

std::string config_error(const json& j) {
  try {
    parse_run_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Config, DefaultsForHubbard) {
  const auto c = parse_run_config(json::parse(R"({"system": {"type": "hubbard", "nx": 4, "ny": 2, "U": 8}})"));
  EXPECT_EQ(c.system.kind, SystemKind::hubbard);
  EXPECT_EQ(c.system.hubbard.U, 8.0);
  EXPECT_EQ(c.ansatz.M, 1);
  EXPECT_EQ(c.ansatz.K, 0);
  EXPECT_EQ(c.sampler.n_samples, 4096);
  EXPECT_EQ(c.sampler.mix.hop, MoveMix::hubbard().hop);
  EXPECT_EQ(c.sr.variant, SrVariant::rmsprop);
  EXPECT_EQ(c.evaluate.n_evaluations, 50);
  EXPECT_EQ(c.evaluate.n_samples, 1 << 16);
  EXPECT_FALSE(c.optimize.exact);
  const auto sys = build_system(c.system);
  EXPECT_EQ(sys.spec.L, 8);
  EXPECT_EQ(sys.spec.n_up, 4);
  EXPECT_EQ(sys.spec.n_dn, 4);
  ASSERT_TRUE(sys.geometry.has_value());
  EXPECT_DOUBLE_EQ(sys.geometry->distance(0, 5), std::sqrt(2.0));
}

TEST(Config, FcidumpSystemAndRelativePaths) {
  const auto c = parse_run_config(json::parse(R"({
    "system": {"type": "fcidump", "fcidump": "h4_chain.fcidump", "geometry": "h4_chain.xyz"},
    "ansatz": {"M": 2, "K": 3},
    "sampler": {"mix": {"single": 1.0}}
  })"),
                                  CPDVMC_TEST_DATA);
  EXPECT_EQ(c.sampler.mix.single, 1.0);
  EXPECT_EQ(c.sampler.mix.pair, 0.0);
  const auto sys = build_system(c.system);
  EXPECT_EQ(sys.spec.L, 4);
  EXPECT_EQ(sys.spec.n_up, 2);
  EXPECT_EQ(sys.spec.n_dn, 2);
  ASSERT_TRUE(sys.geometry.has_value());
  const auto p = initial_params(sys, c.ansatz);
  EXPECT_EQ(p.K(), 3);
  EXPECT_EQ(p.M, 2);
}

TEST(Config, SchemaErrorsListEveryOffendingKey) {
  const auto msg = config_error(json::parse(R"({
    "system": {"type": "hubbard", "nx": 2, "colour": 1},
    "sampler": {"n_samples": "lots", "mix": {"teleport": 0.5}},
    "optimizer": {"variant": "adam", "learning_rate": -1},
    "extra": {}
  })"));
  for (const char* needle : {"unknown key 'system.colour'", "unknown key 'sampler.mix.teleport'",
                             "'sampler.n_samples' must be an integer", "'optimizer.variant'",
                             "learning_rate must be > 0", "unknown key 'extra'"})
    EXPECT_NE(msg.find(needle), std::string::npos) << needle << "\n" << msg;
}

TEST(Config, TypeAndRangeErrors) {
  EXPECT_NE(config_error(json::parse(R"({"system": {"type": "lattice"}})")).find("system.type"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"system": {"type": "fcidump"}})")).find("system.fcidump"),
            std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"system": 3})")).find("'system' must be an object"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"ansatz": {"M": 0}})")).find("ansatz.M"), std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"correlate": {"bulk": [1, "a"]}})")).find("correlate.bulk"),
            std::string::npos);
  EXPECT_NE(config_error(json::parse(R"({"ansatz": {"seed": -4}})")).find("ansatz.seed"), std::string::npos);
  EXPECT_THROW(parse_run_config(json::array()), ConfigError);
}

TEST(Config, MissingSystemOnlyMattersWhenBuilt) {
  const auto c = parse_run_config(json::parse(R"({"morsefit": {"input": "curve.csv"}})"), "/data");
  EXPECT_EQ(c.morse.input, "/data/curve.csv");
  EXPECT_THROW(build_system(c.system), ConfigError);
}

TEST(Config, ReadErrorsAreCategorised) {
  EXPECT_THROW(read_run_config("/nonexistent/config.json"), IoError);
  const auto path = std::filesystem::temp_directory_path() / "cpdvmc_bad_config.json";
  {
    std::ofstream out(path);
    out << "{ \"system\": ";
  }
  EXPECT_THROW(read_run_config(path.string()), ParseError);
}

TEST(Config, CheckpointMustMatchSystem) {
  const auto c = parse_run_config(json::parse(R"({"system": {"nx": 2, "U": 4}})"));
  const auto sys = build_system(c.system);
  const auto path = std::filesystem::temp_directory_path() / "cpdvmc_config_ckpt.bin";
  write_checkpoint(path.string(), CpdParams::zeros(SystemSpec{3, 1, 1}, 1, LookupTable::full(3)));
  AnsatzConfig a;
  a.checkpoint_in = path.string();
  EXPECT_THROW(initial_params(sys, a), ConfigError);
}
