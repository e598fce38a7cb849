#pragma once

#include "cada/tensor.hpp"
#include "cada/unet.hpp"

namespace cada {

struct LossConfig {
  double dice_smooth = 1.0;
  double ce_weight = 1.0;
  double dice_weight = 1.0;
  double lambda_max = 0.1;
  int t_max = 50;

  void validate() const;
};

// Mean over all pixels of -[y log p + (1-y) log(1-p)], p clamped to
// [1e-7, 1-1e-7]. y must be strictly binary.
double binary_cross_entropy(const Tensor& p, const Tensor& y);
Tensor binary_cross_entropy_backward(const Tensor& p, const Tensor& y);

// 1 - (2 sum(p y) + s)/(sum p + sum y + s), per sample, batch-averaged.
// A non-4-D tensor is treated as a single sample.
double soft_dice_loss(const Tensor& p, const Tensor& y, double smooth);
Tensor soft_dice_backward(const Tensor& p, const Tensor& y, double smooth);

double hybrid_seg_loss(const Tensor& p, const Tensor& y, const LossConfig& cfg);
Tensor hybrid_seg_backward(const Tensor& p, const Tensor& y, const LossConfig& cfg);

// Eq. 2: mean hybrid loss of the source batch (through Theta^S) plus mean
// hybrid loss of the target batch (through Theta^T); a null batch
// contributes 0. TRAIN-mode forwards; accumulates gradients when backprop.
double supervised_loss(UNet& net, const Tensor* x_src, const Tensor* y_src, const Tensor* x_tgt,
                       const Tensor* y_tgt, const LossConfig& cfg, bool backprop);

// Mean squared error between probability maps. The gradient flows into the
// student argument only; the teacher is a constant.
double consistency_mse(const Tensor& p_student, const Tensor& p_teacher);
Tensor consistency_mse_backward(const Tensor& p_student, const Tensor& p_teacher);

// lambda_max * exp(-5 (1 - t/t_max)^2), t in [0, t_max].
double lambda_rampup(int t, const LossConfig& cfg);

// Eq. 4: L_s + lambda(t) L_c.
double total_loss(double loss_s, double loss_c, int t, const LossConfig& cfg);

}  // namespace cada
