#include <gtest/gtest.h>

#include <sstream>

#include "gclrec/config.hpp"
#include "gclrec/errors.hpp"
#include "gclrec/manifest.hpp"

using namespace gclrec;

namespace {

ParsedConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in, "test.cfg");
}

}  // namespace

TEST(ConfigFile, ParsesKeysCommentsAndBlankLines) {
  const auto p = parse(
      "# comment\n"
      "method = simgcl\n"
      "\n"
      "lambda = 0.5   # trailing\n"
      "  epsilon=0.1\n"
      "contrast_layer = random\n"
      "noise = gaussian\n"
      "merge_validation = true\n");
  EXPECT_EQ(p.config.method, Method::kSimGcl);
  EXPECT_DOUBLE_EQ(p.config.lambda, 0.5);
  EXPECT_DOUBLE_EQ(p.config.epsilon, 0.1);
  EXPECT_TRUE(p.config.random_contrast_layer);
  EXPECT_EQ(p.config.noise, NoiseKind::kGaussian);
  EXPECT_TRUE(p.config.merge_validation);
  EXPECT_EQ(p.given_keys.size(), 6u);
  EXPECT_TRUE(p.given_keys.count("lambda"));
}

TEST(ConfigFile, Errors) {
  EXPECT_THROW(parse("lamda = 0.1\n"), ConfigError);
  EXPECT_THROW(parse("layers = two\n"), ConfigError);
  EXPECT_THROW(parse("layers = 2x\n"), ConfigError);
  EXPECT_THROW(parse("method = ngcf\n"), ConfigError);
  try {
    parse("layers = 2\nnonsense\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("test.cfg:2"), std::string::npos);
  }
  EXPECT_THROW(load_config("/nonexistent/file.cfg"), ConfigError);
}

TEST(ConfigFile, SetValueAndEchoRoundTrip) {
  TrainConfig c;
  set_config_value(c, "layers", "3");
  set_config_value(c, "contrast_layer", "2");
  set_config_value(c, "tau", "0.15");
  EXPECT_EQ(c.layers, 3);
  EXPECT_EQ(c.contrast_layer, 2);
  const auto again = parse(config_echo(c));
  EXPECT_EQ(config_echo(again.config), config_echo(c));
  EXPECT_DOUBLE_EQ(again.config.tau, 0.15);
}

TEST(Manifest, JsonFieldsAndStableHash) {
  RunManifest m;
  m.command = "train";
  m.seed = 7;
  m.num_users = 3;
  m.outputs["trace"] = "trace.csv";
  const std::string json = m.to_json();
  EXPECT_NE(json.find("\"command\": \"train\""), std::string::npos);
  EXPECT_NE(json.find("\"seed\": 7"), std::string::npos);
  EXPECT_EQ(m.hash(), m.hash());
  EXPECT_EQ(m.hash().size(), 16u);
  RunManifest other = m;
  other.seed = 8;
  EXPECT_NE(other.hash(), m.hash());
  EXPECT_EQ(manifest_comment("abc"), "# manifest abc\n");
  EXPECT_EQ(hex64(fnv1a64("")), "cbf29ce484222325");
  EXPECT_FALSE(version_tag().empty());
}
