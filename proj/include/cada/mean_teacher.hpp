#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "cada/checkpoint.hpp"
#include "cada/tensor.hpp"
#include "cada/unet.hpp"

namespace cada {

struct PerturbConfig {
  double noise_sigma = 0.05;
  double flip_prob = 0.5;

  void validate() const;
};

struct PerturbResult {
  Tensor x;
  bool flipped = false;
};

// Optional horizontal flip, then additive Gaussian pixel noise, clamped back
// to [0,1]. Deterministic per seed.
PerturbResult perturb(const Tensor& x, const PerturbConfig& cfg, std::uint64_t seed);

// EMA shadow of the student's TARGET parameter view (theta, gamma^T, beta^T,
// TARGET running stats), plus a network instance carrying those values so the
// teacher can predict in EVAL mode.
class TeacherState {
 public:
  TeacherState() = default;
  TeacherState(const UNet& student, double decay);

  bool initialized() const { return net_ != nullptr; }
  double decay() const { return decay_; }
  long step_count() const { return step_count_; }

  // shadow <- decay * shadow + (1 - decay) * student, then written through to
  // the internal network. Keys must match the student's TARGET view.
  void ema_update(const UNet& student);

  // EVAL-mode prediction with the shadow parameters (TARGET domain).
  Tensor predict(const Tensor& x) const;

  const UNet& network() const;

  // Shadow tensors under the "teacher." prefix (plus "teacher.step_count")
  // for inclusion in checkpoints.
  std::vector<std::pair<std::string, const Tensor*>> checkpoint_entries() const;

  // Rebuilds the teacher from "teacher."-prefixed checkpoint entries; the
  // student provides the architecture.
  static TeacherState restore(const UNet& student, double decay,
                              const std::vector<CheckpointEntry>& entries);

 private:
  std::unique_ptr<UNet> net_;  // owns the shadow values
  std::vector<std::string> keys_;
  double decay_ = 0.99;
  long step_count_ = 0;
  Tensor step_count_tensor_;  // mirrors step_count_ for checkpoints

  void refresh_step_tensor();
};

// Eq. 3 for one unlabeled batch: student predicts a delta-perturbed copy in
// TRAIN mode (TARGET tag), the teacher predicts an independently perturbed
// copy in EVAL mode, predictions are un-flipped to a common orientation, and
// the MSE is returned. Gradients (scaled by grad_scale) reach the student
// only.
double consistency_step(const Tensor& x_unlabeled, UNet& student, const TeacherState& teacher,
                        const PerturbConfig& cfg, std::uint64_t seed_student,
                        std::uint64_t seed_teacher, bool backprop, double grad_scale = 1.0);

}  // namespace cada
