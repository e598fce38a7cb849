#pragma once

#include <cmath>
#include <string>

#include "cada/tensor.hpp"

namespace cada {

enum class Domain { Source = 0, Target = 1 };

constexpr const char* domain_name(Domain d) {
  return d == Domain::Source ? "SOURCE" : "TARGET";
}
constexpr Domain other_domain(Domain d) {
  return d == Domain::Source ? Domain::Target : Domain::Source;
}
Domain parse_domain(const std::string& s);

enum class Mode { Train, Eval };

// Vesselness-specific batch normalization: one statistics pipeline with two
// independent affine parameter groups and running-statistic groups, selected
// by domain tag. The tag is always an explicit argument; nothing about the
// active domain is global state.
class VsbnLayer {
 public:
  VsbnLayer(int channels, std::string id, double eps = 1e-5, double stat_momentum = 0.1);

  // Normalizes with batch statistics over N,H,W (biased variance), applies
  // the domain's affine transform, and updates only that domain's running
  // stats (unbiased variance correction applied when storing). Caches what
  // backward() needs.
  Tensor forward_train(const Tensor& x, Domain d);

  // Normalizes with the domain's running statistics. Throws if the domain
  // has never been trained. Read-only.
  Tensor forward_eval(const Tensor& x, Domain d) const;

  // Full batch-norm backward through the mean and variance paths of the last
  // forward_train call. Accumulates into the active domain's gamma/beta
  // grads and returns dL/dx.
  Tensor backward(const Tensor& gout);

  Parameter& gamma(Domain d) { return gamma_[idx(d)]; }
  Parameter& beta(Domain d) { return beta_[idx(d)]; }
  const Parameter& gamma(Domain d) const { return gamma_[idx(d)]; }
  const Parameter& beta(Domain d) const { return beta_[idx(d)]; }
  Tensor& running_mean(Domain d) { return running_mean_[idx(d)]; }
  Tensor& running_var(Domain d) { return running_var_[idx(d)]; }
  const Tensor& running_mean(Domain d) const { return running_mean_[idx(d)]; }
  const Tensor& running_var(Domain d) const { return running_var_[idx(d)]; }
  long stat_updates(Domain d) const { return std::lround(stat_count_[idx(d)][0]); }

  // Stored as a 1-element tensor so it rides along in checkpoints.
  Tensor& stat_count(Domain d) { return stat_count_[idx(d)]; }
  const Tensor& stat_count(Domain d) const { return stat_count_[idx(d)]; }

  int channels() const { return channels_; }
  double eps() const { return eps_; }
  const std::string& id() const { return id_; }

  // Batch statistics of the most recent forward_train (bn-analysis reads
  // these as the pre-affine mean and std).
  const Tensor& last_batch_mean() const { return saved_mean_; }
  const Tensor& last_batch_var() const { return saved_var_; }

 private:
  static int idx(Domain d) { return static_cast<int>(d); }

  int channels_;
  std::string id_;
  double eps_;
  double stat_momentum_;
  Parameter gamma_[2];
  Parameter beta_[2];
  Tensor running_mean_[2];
  Tensor running_var_[2];
  Tensor stat_count_[2];

  // backward cache
  Tensor saved_xhat_;
  Tensor saved_mean_;
  Tensor saved_var_;
  Tensor saved_inv_std_;
  Domain saved_domain_ = Domain::Source;
  bool has_cache_ = false;
};

}  // namespace cada
