#include <set>
#include <string>

#include "cada/config.hpp"
#include "cada/errors.hpp"
#include "doctest.h"
#include "helpers.hpp"

using cada::FullConfig;

TEST_CASE("default config validates and covers every key") {
  FullConfig cfg = cada::default_config();
  cfg.validate();
  auto kv = cada::config_kv(cfg);
  CHECK(kv.size() >= 40);

  std::set<std::string> keys;
  for (const auto& [k, v] : kv) {
    CHECK(keys.insert(k).second);
    CHECK_FALSE(v.empty());
  }
  // one spot check per section
  CHECK(keys.count("train.lr0"));
  CHECK(keys.count("net.depth"));
  CHECK(keys.count("loss.lambda_max"));
  CHECK(keys.count("synth.size"));
  CHECK(keys.count("data.n_source_labeled"));
  CHECK(keys.count("perturb.noise_sigma"));

  // sorted
  std::string prev;
  for (const auto& [k, v] : kv) {
    (void)v;
    CHECK(prev < k);
    prev = k;
  }
}

TEST_CASE("render -> parse -> render is a fixed point") {
  FullConfig cfg = cada::default_config();
  cfg.train.lr0 = 0.00321;
  cfg.train.regime = cada::Regime::SeMt;
  cfg.synth.seed = 987654321;
  cfg.prep.enabled = false;
  cfg.loss.lambda_max = 0.07;

  const std::string text = cada::render_config(cfg);
  FullConfig back = cada::parse_config_text(text, "round");
  CHECK(cada::render_config(back) == text);
  CHECK(back.train.lr0 == cfg.train.lr0);
  CHECK(back.train.regime == cada::Regime::SeMt);
  CHECK(back.synth.seed == cfg.synth.seed);
  CHECK(back.prep.enabled == false);
  CHECK(cada::config_hash(back) == cada::config_hash(cfg));
}

TEST_CASE("doubles render with a round-tripping representation") {
  FullConfig cfg = cada::default_config();
  cfg.train.lr0 = 0.1 + 0.2;  // 0.30000000000000004
  FullConfig back = cada::parse_config_text(cada::render_config(cfg), "rt");
  CHECK(back.train.lr0 == cfg.train.lr0);
}

TEST_CASE("parser accepts comments, blanks, and flexible spacing") {
  const std::string text =
      "# leading comment\n"
      "\n"
      "train.lr0 = 0.5\n"
      "   train.epochs=3   \n"
      "net.depth = 2 # trailing comment\n";
  FullConfig cfg = cada::parse_config_text(text, "t");
  CHECK(cfg.train.lr0 == 0.5);
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.net.depth == 2);
}

TEST_CASE("parser failures carry origin and line number") {
  SUBCASE("unknown key") {
    try {
      cada::parse_config_text("nonsense.key = 1\n", "cfgfile");
      FAIL("expected throw");
    } catch (const cada::UsageError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("cfgfile:1") != std::string::npos);
      CHECK(msg.find("nonsense.key") != std::string::npos);
    }
  }
  SUBCASE("missing equals sign") {
    try {
      cada::parse_config_text("train.lr0 = 0.1\ntrain.epochs 3\n", "f");
      FAIL("expected throw");
    } catch (const cada::UsageError& e) {
      CHECK(std::string(e.what()).find("f:2") != std::string::npos);
    }
  }
  SUBCASE("bad value for the declared type") {
    CHECK_THROWS_AS(cada::parse_config_text("train.epochs = soon\n", "f"), cada::UsageError);
    CHECK_THROWS_AS(cada::parse_config_text("train.lr0 = fast\n", "f"), cada::UsageError);
    CHECK_THROWS_AS(cada::parse_config_text("data.preprocess = maybe\n", "f"), cada::UsageError);
    CHECK_THROWS_AS(cada::parse_config_text("train.regime = FOO\n", "f"), cada::UsageError);
    CHECK_THROWS_AS(cada::parse_config_text("train.epochs = 3x\n", "f"), cada::UsageError);
  }
}

TEST_CASE("every declared key accepts a round-tripped assignment") {
  FullConfig cfg = cada::default_config();
  for (const auto& [key, value] : cada::config_kv(cfg)) {
    FullConfig probe = cada::default_config();
    cada::apply_config_line(probe, key, value);  // must not throw
  }
}

TEST_CASE("typed setters parse each value family") {
  FullConfig cfg = cada::default_config();
  cada::apply_config_line(cfg, "train.epochs", "7");
  CHECK(cfg.train.epochs == 7);
  cada::apply_config_line(cfg, "train.lr0", "2.5e-4");
  CHECK(cfg.train.lr0 == 2.5e-4);
  cada::apply_config_line(cfg, "data.preprocess", "false");
  CHECK(cfg.prep.enabled == false);
  cada::apply_config_line(cfg, "data.preprocess", "1");
  CHECK(cfg.prep.enabled == true);
  cada::apply_config_line(cfg, "synth.seed", "18446744073709551615");
  CHECK(cfg.synth.seed == 18446744073709551615ULL);
  cada::apply_config_line(cfg, "train.regime", "SS-CADA");
  CHECK(cfg.train.regime == cada::Regime::SsCada);
}

TEST_CASE("config hash is order-insensitive and value-sensitive") {
  FullConfig a = cada::default_config();
  const std::uint64_t base = cada::config_hash(a);

  // same assignments in a different order
  FullConfig b = cada::parse_config_text("train.lr0 = 0.002\nnet.depth = 2\n", "x");
  FullConfig c = cada::parse_config_text("net.depth = 2\ntrain.lr0 = 0.002\n", "y");
  CHECK(cada::config_hash(b) == cada::config_hash(c));
  CHECK(cada::config_hash(b) != base);

  FullConfig d = cada::parse_config_text("train.lr0 = 0.002\nnet.depth = 3\n", "z");
  CHECK(cada::config_hash(d) != cada::config_hash(b));
}

TEST_CASE("load_config reads files and reports them on failure") {
  testutil::TempDir tmp("cfg");
  const std::string path = (tmp / "run.cfg").string();
  testutil::write_file(path, "train.epochs = 4\nsynth.size = 32\n");
  FullConfig cfg = cada::load_config(path);
  CHECK(cfg.train.epochs == 4);
  CHECK(cfg.synth.size == 32);

  try {
    cada::load_config((tmp / "absent.cfg").string());
    FAIL("expected throw");
  } catch (const cada::UsageError& e) {
    CHECK(std::string(e.what()).find("absent.cfg") != std::string::npos);
  }
}

TEST_CASE("write_resolved_config emits every key explicitly") {
  testutil::TempDir tmp("cfg_resolved");
  FullConfig cfg = cada::default_config();
  const std::string path = (tmp / "config.resolved.txt").string();
  cada::write_resolved_config(cfg, path);
  auto lines = testutil::split_lines(testutil::read_file(path));
  CHECK(lines.size() == cada::config_kv(cfg).size());
  for (const auto& line : lines) CHECK(line.find(" = ") != std::string::npos);
}

TEST_CASE("cross-field validation rejects inconsistent combinations") {
  FullConfig cfg = cada::default_config();
  cfg.synth.size = 20;  // not divisible by 2^depth = 8
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);

  FullConfig cfg2 = cada::default_config();
  cfg2.train.n_source = 5;  // triple sum != batch size
  CHECK_THROWS_AS(cfg2.validate(), std::invalid_argument);
}
