#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cada/config.hpp"
#include "cada/metrics.hpp"
#include "cada/trainer.hpp"

namespace cada {

struct BenchCell {
  Regime regime = Regime::LSup;
  std::uint64_t seed = 0;
  TrainResult train;
  MetricTriple test;  // best-validation checkpoint evaluated on the test split
};

struct RegimeSummary {
  Regime regime = Regime::LSup;
  std::string training_set;  // Table-1 "Training Set" column
  MetricTriple mean;
  MetricTriple stddev;  // population, over seeds
};

struct BenchResult {
  std::vector<BenchCell> cells;        // ordered (regime, seed)
  std::vector<RegimeSummary> summary;  // L-SUP, JOINT, VSBN, SE-MT, SS-CADA
  bool verdict_pass = false;
  std::string verdict_line;
  std::string csv_path;
  // Smallest final-epoch (teacher - student) validation-Dice gap across the
  // teacher regimes; > -0.02 is the weak self-ensembling property.
  double min_teacher_gap = 0.0;
  double elapsed_seconds = 0.0;
};

const char* regime_training_set(Regime r);

// Trains all five regimes with seeds base.train.seed + 0..n_seeds-1 (cell
// outputs under out_dir/<regime>/<seed>/), evaluates each best checkpoint on
// the test split, and writes the Table-1-shaped summary plus a verdict line
// to out_dir/bench.csv. CADA_THREADS caps cell parallelism (default 1).
BenchResult run_bench(const FullConfig& base, const std::string& data_dir,
                      const std::string& out_dir, int n_seeds);

}  // namespace cada
