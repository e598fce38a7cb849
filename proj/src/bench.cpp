#include "cada/bench.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "cada/checkpoint.hpp"
#include "cada/dataset.hpp"
#include "cada/errors.hpp"

namespace cada {

const char* regime_training_set(Regime r) {
  switch (r) {
    case Regime::LSup: return "T_L";
    case Regime::Joint: return "S_L+T_L";
    case Regime::Vsbn: return "S_L+T_L";
    case Regime::SeMt: return "T_L+T_U";
    case Regime::SsCada: return "S_L+T_L+T_U";
  }
  return "?";
}

namespace {

constexpr Regime kBenchOrder[5] = {Regime::LSup, Regime::Joint, Regime::Vsbn, Regime::SeMt,
                                   Regime::SsCada};

int thread_budget(std::size_t n_jobs) {
  int n = 1;
  if (const char* env = std::getenv("CADA_THREADS")) {
    char* stop = nullptr;
    const long v = std::strtol(env, &stop, 10);
    if (stop != env && *stop == '\0' && v >= 1) n = static_cast<int>(v);
  }
  return std::min<int>(n, static_cast<int>(n_jobs));
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string pm(double mean, double sd) { return fmt4(mean) + "\xc2\xb1" + fmt4(sd); }

struct CellError {
  std::size_t job = 0;
  int kind = 0;  // 1 usage, 2 data, 3 numeric
  std::string message;
};

}  // namespace

BenchResult run_bench(const FullConfig& base, const std::string& data_dir,
                      const std::string& out_dir, int n_seeds) {
  base.validate();
  if (n_seeds < 1) throw UsageError("bench: need at least 1 seed");

  const auto t0 = std::chrono::steady_clock::now();

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw DataError("cannot create output directory " + out_dir + ": " + ec.message());

  const std::vector<LoadedSample> test = load_split(data_dir, kSplitTest);

  struct Job {
    Regime regime;
    std::uint64_t seed;
    std::string dir;
  };
  std::vector<Job> jobs;
  for (const Regime r : kBenchOrder)
    for (int i = 0; i < n_seeds; ++i) {
      const std::uint64_t seed = base.train.seed + static_cast<std::uint64_t>(i);
      const auto dir = std::filesystem::path(out_dir) / regime_name(r) / std::to_string(seed);
      jobs.push_back({r, seed, dir.string()});
    }

  std::vector<BenchCell> cells(jobs.size());
  std::vector<CellError> errors;
  std::mutex mu;
  std::atomic<std::size_t> next{0};

  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];
      try {
        FullConfig cfg = base;
        cfg.train.regime = job.regime;
        cfg.train.seed = job.seed;

        BenchCell cell;
        cell.regime = job.regime;
        cell.seed = job.seed;
        cell.train = train_model(cfg, data_dir, job.dir);

        UNet net = load_network(cell.train.best_checkpoint);
        const auto report = evaluate_split(
            net, test, Domain::Target,
            (std::filesystem::path(job.dir) / "test_report.csv").string());
        cell.test = report.mean;
        {
          std::lock_guard<std::mutex> lock(mu);
          cells[i] = cell;
          std::fprintf(stderr, "[bench] %s seed %llu: test dice %s (best val %s @ epoch %d)\n",
                       regime_name(job.regime), static_cast<unsigned long long>(job.seed),
                       fmt4(cell.test.dice).c_str(), fmt4(cell.train.best_val_dice).c_str(),
                       cell.train.best_epoch);
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(mu);
        int kind = 2;
        if (dynamic_cast<const NumericError*>(&e)) kind = 3;
        else if (dynamic_cast<const UsageError*>(&e)) kind = 1;
        errors.push_back({i, kind,
                          std::string("bench: regime ") + regime_name(job.regime) + " seed " +
                              std::to_string(job.seed) + " failed: " + e.what()});
      }
    }
  };

  const int n_threads = thread_budget(jobs.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  if (!errors.empty()) {
    auto first = errors.front();
    for (const auto& e : errors)
      if (e.job < first.job) first = e;
    if (first.kind == 3) throw NumericError(first.message);
    if (first.kind == 1) throw UsageError(first.message);
    throw DataError(first.message);
  }

  BenchResult res;
  res.cells = cells;
  res.csv_path = (std::filesystem::path(out_dir) / "bench.csv").string();

  double mean_dice[5] = {};
  for (int ri = 0; ri < 5; ++ri) {
    const Regime r = kBenchOrder[ri];
    RegimeSummary s;
    s.regime = r;
    s.training_set = regime_training_set(r);
    std::vector<MetricTriple> vals;
    for (const auto& c : cells)
      if (c.regime == r) vals.push_back(c.test);
    const auto stat = [&](double MetricTriple::*field, double& mean_out, double& sd_out) {
      double m = 0.0;
      for (const auto& v : vals) m += v.*field;
      m /= static_cast<double>(vals.size());
      double var = 0.0;
      for (const auto& v : vals) var += (v.*field - m) * (v.*field - m);
      var /= static_cast<double>(vals.size());
      mean_out = m;
      sd_out = std::sqrt(var);
    };
    stat(&MetricTriple::recall, s.mean.recall, s.stddev.recall);
    stat(&MetricTriple::precision, s.mean.precision, s.stddev.precision);
    stat(&MetricTriple::dice, s.mean.dice, s.stddev.dice);
    mean_dice[ri] = s.mean.dice;
    res.summary.push_back(s);
  }

  const double lsup = mean_dice[0], joint = mean_dice[1], vsbn = mean_dice[2], semt = mean_dice[3],
               sscada = mean_dice[4];
  std::vector<std::string> fails;
  if (!(sscada > lsup + 0.02))
    fails.push_back("SS-CADA " + fmt4(sscada) + " must exceed L-SUP " + fmt4(lsup) + " + 0.02");
  if (!(sscada >= semt))
    fails.push_back("SS-CADA " + fmt4(sscada) + " must be >= SE-MT " + fmt4(semt));
  if (!(sscada >= vsbn))
    fails.push_back("SS-CADA " + fmt4(sscada) + " must be >= VSBN " + fmt4(vsbn));
  if (!(vsbn >= joint))
    fails.push_back("VSBN " + fmt4(vsbn) + " must be >= JOINT " + fmt4(joint));
  res.verdict_pass = fails.empty();
  if (res.verdict_pass) {
    res.verdict_line = "verdict,PASS";
  } else {
    res.verdict_line = "verdict,FAIL";
    for (const auto& f : fails) res.verdict_line += "," + f;
  }

  res.min_teacher_gap = 0.0;
  bool have_gap = false;
  for (const auto& c : cells) {
    if (c.train.teacher_val_dice < 0.0) continue;
    const double gap = c.train.teacher_val_dice - c.train.final_val_dice;
    if (!have_gap || gap < res.min_teacher_gap) res.min_teacher_gap = gap;
    have_gap = true;
  }

  std::ofstream csv(res.csv_path, std::ios::binary);
  if (!csv) throw DataError("cannot write " + res.csv_path);
  csv << "training_set,method,recall,precision,dice\n";
  for (const auto& s : res.summary)
    csv << s.training_set << ',' << regime_name(s.regime) << ','
        << pm(s.mean.recall, s.stddev.recall) << ',' << pm(s.mean.precision, s.stddev.precision)
        << ',' << pm(s.mean.dice, s.stddev.dice) << '\n';
  csv << res.verdict_line << '\n';
  csv.close();
  if (!csv) throw DataError("write failed: " + res.csv_path);

  res.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace cada
