#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "helpers.hpp"

#ifndef CADA_CLI_PATH
#error "CADA_CLI_PATH must point at the cada binary"
#endif

namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args, const std::string& log_path) {
  const std::string cmd =
      std::string(CADA_CLI_PATH) + " " + args + " > " + log_path + " 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  REQUIRE(WIFEXITED(rc));
  return WEXITSTATUS(rc);
}

std::string tiny_config_text() {
  return "synth.size = 16\n"
         "net.depth = 2\n"
         "net.base_channels = 4\n"
         "data.n_source_labeled = 3\n"
         "data.n_target_labeled = 2\n"
         "data.n_target_unlabeled = 2\n"
         "data.n_val = 2\n"
         "data.n_test = 2\n"
         "train.epochs = 1\n"
         "train.batch_size = 2\n"
         "train.n_source = 1\n"
         "train.n_target = 1\n"
         "train.n_unlabeled = 0\n";
}

std::string manifest_status(const std::string& out_dir) {
  const std::string text = testutil::read_file(out_dir + "/run_manifest.txt");
  for (const auto& line : testutil::split_lines(text))
    if (line.rfind("status = ", 0) == 0) return line.substr(9);
  return "<missing>";
}

}  // namespace

TEST_CASE("cli rejects malformed invocations with exit code 1") {
  testutil::TempDir tmp("cli_usage");
  const std::string log = (tmp / "log.txt").string();

  CHECK(run_cli("", log) == 1);                 // subcommand required
  CHECK(run_cli("frobnicate", log) == 1);       // unknown subcommand
  CHECK(run_cli("generate", log) == 1);         // missing required options
  CHECK(run_cli("--help", log) == 0);

  const std::string out = (tmp / "out").string();
  CHECK(run_cli("generate --config " + (tmp / "absent.cfg").string() + " --out " + out, log) == 1);

  const std::string bad_cfg = (tmp / "bad.cfg").string();
  testutil::write_file(bad_cfg, "train.warp_speed = 9\n");
  CHECK(run_cli("generate --config " + bad_cfg + " --out " + out, log) == 1);
  CHECK(testutil::read_file(log).find("train.warp_speed") != std::string::npos);

  const std::string ok_cfg = (tmp / "ok.cfg").string();
  testutil::write_file(ok_cfg, tiny_config_text());
  CHECK(run_cli("train --config " + ok_cfg + " --data " + out + " --regime WARP --out " + out,
                log) == 1);
}

TEST_CASE("cli generate/train/eval pipeline runs end to end") {
  testutil::TempDir tmp("cli_e2e");
  const std::string cfg = (tmp / "run.cfg").string();
  const std::string data = (tmp / "data").string();
  const std::string run = (tmp / "run").string();
  const std::string report = (tmp / "report").string();
  const std::string log = (tmp / "log.txt").string();
  testutil::write_file(cfg, tiny_config_text());

  REQUIRE(run_cli("generate --config " + cfg + " --out " + data, log) == 0);
  CHECK(fs::exists(fs::path(data) / "manifest.tsv"));
  CHECK(fs::exists(fs::path(data) / "config.resolved.txt"));
  CHECK(manifest_status(data) == "ok");
  CHECK(testutil::read_file(log).find("11 samples") != std::string::npos);

  REQUIRE(run_cli("train --config " + cfg + " --data " + data + " --regime L-SUP --out " + run,
                  log) == 0);
  CHECK(fs::exists(fs::path(run) / "train_log.csv"));
  CHECK(fs::exists(fs::path(run) / "ckpt_best.ckpt"));
  CHECK(fs::exists(fs::path(run) / "ckpt_final.ckpt"));
  CHECK(fs::exists(fs::path(run) / "config.resolved.txt"));
  CHECK(manifest_status(run) == "ok");
  CHECK(testutil::read_file(log).find("regime L-SUP") != std::string::npos);

  const std::string ckpt = (fs::path(run) / "ckpt_best.ckpt").string();
  REQUIRE(run_cli("eval --ckpt " + ckpt + " --data " + data + " --split test --out " + report +
                      " --overlays",
                  log) == 0);
  CHECK(fs::exists(fs::path(report) / "report.csv"));
  CHECK(manifest_status(report) == "ok");
  const std::string eval_out = testutil::read_file(log);
  CHECK(eval_out.find("test: recall") != std::string::npos);
  CHECK(eval_out.find("2 images") != std::string::npos);

  int overlay_count = 0;
  for (const auto& e : fs::directory_iterator(report))
    if (e.path().extension() == ".ppm") ++overlay_count;
  CHECK(overlay_count == 2);

  SUBCASE("data failures exit 2 and leave a failed manifest") {
    const std::string bad_out = (tmp / "bad_eval").string();
    CHECK(run_cli("eval --ckpt " + ckpt + " --data " + data +
                      " --split target_unlabeled --out " + bad_out,
                  log) == 2);
    CHECK(testutil::read_file(log).find("unlabeled") != std::string::npos);
    CHECK(manifest_status(bad_out) == "failed");

    const std::string junk = (tmp / "junk.ckpt").string();
    testutil::write_file(junk, "CKPT v9 zz\n");
    CHECK(run_cli("eval --ckpt " + junk + " --data " + data + " --split test --out " + bad_out,
                  log) == 2);

    CHECK(run_cli("eval --ckpt " + ckpt + " --data " + (tmp / "nowhere").string() +
                      " --split test --out " + bad_out,
                  log) == 2);
  }
}
