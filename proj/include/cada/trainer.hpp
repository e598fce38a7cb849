#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cada/config.hpp"
#include "cada/rng.hpp"
#include "cada/tensor.hpp"

namespace cada {

// Without-replacement cycling sampler: one shuffled pass over [0, n), then a
// reshuffle; draw(k) may straddle two passes. Every full pass visits each
// index exactly once, which is what the per-epoch coverage property rests on.
class DeckSampler {
 public:
  DeckSampler(int n, std::uint64_t seed);

  std::vector<int> draw(int k);
  int size() const { return static_cast<int>(deck_.size()); }

 private:
  std::vector<int> deck_;
  Rng rng_;
  std::size_t cursor_ = 0;
};

// v <- momentum * v + g; p <- p - lr * v; grads zeroed afterwards.
void sgd_momentum_step(const std::vector<Parameter*>& params, double lr, double momentum);

// Ramp-up time index: t = epoch, except the final epoch maps to t_max so the
// logged lambda ends at lambda_max even when epochs != t_max.
int rampup_t(int epoch, int epochs, int t_max);

// ceil((|T_L| + |T_U|) / (n_target + n_unlabeled)), the same formula for
// every regime (the plan supplies the regime-specific denominator).
int iterations_per_epoch(int n_target_labeled, int n_target_unlabeled, const BatchPlan& plan);

struct TrainResult {
  std::string out_dir;
  std::string best_checkpoint;   // <out>/ckpt_best.ckpt
  std::string final_checkpoint;  // <out>/ckpt_final.ckpt
  std::string log_path;          // <out>/train_log.csv
  int best_epoch = -1;
  double best_val_dice = 0.0;
  double final_val_dice = 0.0;
  double teacher_val_dice = -1.0;  // -1 when the regime has no teacher
};

// Runs the full optimization loop for cfg.train.regime on the dataset under
// data_dir, writing config.resolved.txt, train_log.csv and the two
// checkpoints into out_dir. Only the splits the regime consumes are read.
// Deterministic: identical cfg + dataset give bit-identical outputs.
TrainResult train_model(const FullConfig& cfg, const std::string& data_dir,
                        const std::string& out_dir);

}  // namespace cada
