#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cada/bench.hpp"
#include "cada/bn_stats.hpp"
#include "cada/checkpoint.hpp"
#include "cada/config.hpp"
#include "cada/dataset.hpp"
#include "cada/errors.hpp"
#include "cada/metrics.hpp"
#include "cada/trainer.hpp"

namespace {

using namespace cada;

std::string timestamp_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hash_hex(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

struct RunInfo {
  std::string subcommand;
  std::string config_hash = "-";
  std::string seed = "-";
  std::string data = "-";
  std::string out;
};

void write_run_manifest(const RunInfo& info, const std::string& started,
                        const std::string& finished, const char* status) {
  const auto path = std::filesystem::path(info.out) / "run_manifest.txt";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << "subcommand = " << info.subcommand << "\n"
     << "config_hash = " << info.config_hash << "\n"
     << "seed = " << info.seed << "\n"
     << "data = " << info.data << "\n"
     << "out = " << info.out << "\n"
     << "started = " << started << "\n"
     << "finished = " << finished << "\n"
     << "status = " << status << "\n";
}

// run_manifest.txt is written before the work starts and finalized after; it
// is the one output holding wall-clock timestamps.
void run_with_manifest(const RunInfo& info, const std::function<void()>& body) {
  std::error_code ec;
  std::filesystem::create_directories(info.out, ec);
  if (ec) throw DataError("cannot create output directory " + info.out + ": " + ec.message());
  const std::string started = timestamp_utc();
  write_run_manifest(info, started, "-", "running");
  try {
    body();
  } catch (...) {
    write_run_manifest(info, started, timestamp_utc(), "failed");
    throw;
  }
  write_run_manifest(info, started, timestamp_utc(), "ok");
}

Domain split_domain(const std::vector<LoadedSample>& samples) {
  return samples.front().domain;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semi-supervised cross-anatomy domain adaptation for vessel segmentation"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_dir, ckpt_path, split_name, regime_str;
  std::uint64_t seed = 0;
  int n_seeds = 3;
  bool overlays = false;

  auto* gen = app.add_subcommand("generate", "synthesize the dual-domain dataset");
  gen->add_option("--config", config_path, "config file")->required();
  gen->add_option("--out", out_dir, "dataset output directory")->required();
  auto* gen_seed = gen->add_option("--seed", seed, "override synth.seed");

  auto* train = app.add_subcommand("train", "train one regime");
  train->add_option("--config", config_path, "config file")->required();
  train->add_option("--data", data_dir, "dataset root")->required();
  train->add_option("--regime", regime_str, "L-SUP, JOINT, VSBN, SE-MT or SS-CADA")->required();
  train->add_option("--out", out_dir, "run output directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a labeled split");
  eval->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  eval->add_option("--data", data_dir, "dataset root")->required();
  eval->add_option("--split", split_name, "split name")->required();
  eval->add_option("--out", out_dir, "report output directory")->required();
  eval->add_flag("--overlays", overlays, "write per-image overlay PPMs");

  auto* bench = app.add_subcommand("bench", "train and compare all five regimes");
  bench->add_option("--config", config_path, "config file")->required();
  bench->add_option("--data", data_dir, "dataset root")->required();
  bench->add_option("--out", out_dir, "bench output directory")->required();
  bench->add_option("--seeds", n_seeds, "seeds per regime")->required();

  auto* analyze = app.add_subcommand("analyze_bn", "BN-statistic separability analysis");
  analyze->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
  analyze->add_option("--data", data_dir, "dataset root")->required();
  analyze->add_option("--out", out_dir, "analysis output directory")->required();
  auto* analyze_seed = analyze->add_option("--seed", seed, "collection seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      FullConfig cfg = load_config(config_path);
      if (gen_seed->count() > 0) cfg.synth.seed = seed;
      cfg.validate();
      RunInfo info{"generate", hash_hex(config_hash(cfg)), std::to_string(cfg.synth.seed), "-",
                   out_dir};
      run_with_manifest(info, [&] {
        make_dataset(cfg.synth, cfg.prep, cfg.counts, out_dir);
        write_resolved_config(cfg,
                              (std::filesystem::path(out_dir) / "config.resolved.txt").string());
      });
      const auto refs = read_manifest(out_dir);
      std::cout << "dataset: " << out_dir << " (" << refs.size() << " samples)\n";
    } else if (*train) {
      FullConfig cfg = load_config(config_path);
      cfg.train.regime = parse_regime(regime_str);
      cfg.validate();
      RunInfo info{"train", hash_hex(config_hash(cfg)), std::to_string(cfg.train.seed), data_dir,
                   out_dir};
      TrainResult res;
      run_with_manifest(info, [&] { res = train_model(cfg, data_dir, out_dir); });
      std::cout << "regime " << regime_name(cfg.train.regime) << ": final val dice "
                << fmt4(res.final_val_dice) << ", best val dice " << fmt4(res.best_val_dice)
                << " (epoch " << res.best_epoch << ")";
      if (res.teacher_val_dice >= 0.0)
        std::cout << ", teacher val dice " << fmt4(res.teacher_val_dice);
      std::cout << "\n";
    } else if (*eval) {
      RunInfo info{"eval", "-", "-", data_dir, out_dir};
      run_with_manifest(info, [&] {
        UNet net = load_network(ckpt_path);
        const auto samples = load_split(data_dir, split_name);
        for (const auto& s : samples)
          if (!s.labeled) throw DataError("split '" + split_name + "' is unlabeled");
        const auto report = evaluate_split(
            net, samples, split_domain(samples),
            (std::filesystem::path(out_dir) / "report.csv").string(), overlays ? out_dir : "");
        std::cout << split_name << ": recall " << fmt4(report.mean.recall) << ", precision "
                  << fmt4(report.mean.precision) << ", dice " << fmt4(report.mean.dice) << " over "
                  << report.ids.size() << " images\n";
      });
    } else if (*bench) {
      FullConfig cfg = load_config(config_path);
      cfg.validate();
      RunInfo info{"bench", hash_hex(config_hash(cfg)), std::to_string(cfg.train.seed), data_dir,
                   out_dir};
      BenchResult res;
      run_with_manifest(info, [&] { res = run_bench(cfg, data_dir, out_dir, n_seeds); });
      std::ifstream csv(res.csv_path, std::ios::binary);
      std::cout << csv.rdbuf();
      std::cout << "min teacher-student final val dice gap: " << fmt4(res.min_teacher_gap) << "\n";
      std::cout << "elapsed: " << fmt4(res.elapsed_seconds) << " s\n";
    } else if (*analyze) {
      const std::uint64_t analysis_seed = analyze_seed->count() > 0 ? seed : 1;
      RunInfo info{"analyze_bn", "-", std::to_string(analysis_seed), data_dir, out_dir};
      run_with_manifest(info, [&] {
        UNet net = load_network(ckpt_path);
        const auto src = load_split(data_dir, kSplitSourceLabeled);
        const auto tgt = load_split(data_dir, kSplitTargetLabeled);
        const auto reports = analyze_bn(net, src, tgt, out_dir, 16, 6, analysis_seed);
        for (const auto& r : reports)
          std::cout << depth_class_name(r.depth_class) << " (" << r.layer_id << "): silhouette "
                    << fmt4(r.silhouette) << ", permuted control " << fmt4(r.permuted) << "\n";
      });
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
