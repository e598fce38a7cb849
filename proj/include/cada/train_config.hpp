#pragma once

#include <cstdint>
#include <string>

namespace cada {

// Table 1 rows. L-SUP: labeled target only. JOINT: source+target mixed
// through one parameter set. VSBN: source+target through the per-domain
// parameter sets. SE-MT: labeled+unlabeled target with a mean teacher.
// SS-CADA: all three splits, VSBN + mean teacher.
enum class Regime { LSup, Joint, Vsbn, SeMt, SsCada };

Regime parse_regime(const std::string& name);  // UsageError lists valid names
const char* regime_name(Regime r);

bool regime_uses_source(Regime r);
bool regime_uses_unlabeled(Regime r);
inline bool regime_has_teacher(Regime r) { return regime_uses_unlabeled(r); }

struct BatchPlan {
  int n_source = 0;
  int n_target = 0;
  int n_unlabeled = 0;
};

struct TrainerConfig {
  double lr0 = 0.001;
  double momentum = 0.9;
  int batch_size = 6;
  // SS-CADA batch split; the other regimes derive theirs from batch_size
  int n_source = 2;
  int n_target = 2;
  int n_unlabeled = 2;
  int epochs = 50;
  double lr_decay = 0.95;  // per-epoch exponential factor
  double ema_decay = 0.99;
  Regime regime = Regime::SsCada;
  std::uint64_t seed = 1;

  void validate() const;
};

// Per-batch split for a regime; SS-CADA uses the configured triple, L-SUP
// gets the whole batch from T_L, JOINT/VSBN split between S_L and T_L, and
// SE-MT between T_L and T_U.
BatchPlan batch_plan(const TrainerConfig& cfg);

// lr0 * lr_decay^epoch
double lr_schedule(int epoch, const TrainerConfig& cfg);

}  // namespace cada
