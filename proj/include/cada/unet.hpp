#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cada/ops.hpp"
#include "cada/tensor.hpp"
#include "cada/vsbn.hpp"

namespace cada {

struct NetworkConfig {
  int depth = 3;
  int base_channels = 8;
  int in_channels = 1;
  int out_channels = 1;

  void validate() const;
};

// conv3x3 (stride 1, pad 1) -> VSBN -> relu
struct ConvBlock {
  Parameter w;
  Parameter b;
  VsbnLayer bn;

  ConvBlock(int cin, int cout, const std::string& id);

  Tensor forward_train(const Tensor& x, Domain d);
  Tensor forward_eval(const Tensor& x, Domain d) const;
  Tensor backward(const Tensor& gout);

 private:
  Tensor in_cache_;
  Tensor pre_relu_cache_;
};

// Mini U-Net with shared convolution parameters and per-domain VSBN affine
// groups; the TARGET and SOURCE parameter views share every conv kernel.
class UNet {
 public:
  UNet(const NetworkConfig& cfg, std::uint64_t seed);

  // TRAIN uses batch statistics and updates the tagged domain's running
  // stats (and fills the backward caches); EVAL is const and deterministic.
  Tensor predict(const Tensor& x, Domain d, Mode mode);
  Tensor predict_eval(const Tensor& x, Domain d) const;

  // Backpropagates through the last TRAIN-mode predict; accumulates
  // parameter gradients and returns dL/dinput.
  Tensor backward(const Tensor& gout);

  // theta plus the tagged domain's gamma/beta, in forward order.
  std::vector<Parameter*> parameters(Domain d);
  // theta plus both affine groups (optimizer order).
  std::vector<Parameter*> all_parameters();
  std::vector<const Parameter*> parameters(Domain d) const;

  void zero_grad();

  // Full named state for checkpoints: theta.* entries plus
  // vsbn.<layer>.<DOMAIN>.{gamma,beta,running_mean,running_var,stat_count}.
  std::vector<std::pair<std::string, Tensor*>> named_state();
  std::vector<std::pair<std::string, const Tensor*>> named_state() const;

  // The TARGET-domain view the mean teacher shadows: theta plus the TARGET
  // gamma/beta and TARGET running statistics.
  std::vector<std::pair<std::string, Tensor*>> target_view();

  // Marks TARGET statistics as usable (teacher nets get their stats from an
  // EMA shadow rather than their own forward passes).
  void force_target_stats_valid();

  const NetworkConfig& config() const { return cfg_; }
  long parameter_entry_count(Domain d) const;

  // Designated layers for BN-statistic analysis.
  VsbnLayer& first_encoder_bn() { return enc_.front().b0.bn; }
  VsbnLayer& bottleneck_bn() { return bottleneck_.b0.bn; }
  VsbnLayer& last_decoder_bn() { return dec_.front().b1.bn; }
  std::vector<VsbnLayer*> vsbn_layers();

 private:
  struct Level {
    ConvBlock b0;
    ConvBlock b1;
    Level(int cin, int cout, const std::string& id)
        : b0(cin, cout, id + ".0"), b1(cout, cout, id + ".1") {}
  };

  NetworkConfig cfg_;
  std::vector<Level> enc_;
  Level bottleneck_;
  std::vector<Level> dec_;  // dec_[l] consumes the stage above level l
  Parameter head_w_;
  Parameter head_b_;

  // train-mode caches
  std::vector<Tensor> skips_;
  std::vector<MaxPoolCtx> pools_;
  std::vector<int> up_channels_;
  Tensor head_in_cache_;
  Tensor head_out_cache_;
  bool has_cache_ = false;

  void check_input(const Tensor& x) const;
  std::vector<Level*> levels_in_order();
  std::vector<const Level*> levels_in_order() const;
};

}  // namespace cada
