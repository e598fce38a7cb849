#include "cada/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace cada {

namespace {

constexpr double kClamp = 1e-7;

void check_pair(const Tensor& p, const Tensor& y, const char* what) {
  if (!p.same_shape(y))
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_str(p) + " vs " +
                                shape_str(y));
  if (p.numel() == 0) throw std::invalid_argument(std::string(what) + ": empty tensors");
}

void check_binary(const Tensor& y, const char* what) {
  for (int i = 0; i < y.numel(); ++i)
    if (y[i] != 0.0 && y[i] != 1.0)
      throw std::invalid_argument(std::string(what) + ": target is not binary (value " +
                                  std::to_string(y[i]) + " at index " + std::to_string(i) + ")");
}

}  // namespace

void LossConfig::validate() const {
  if (dice_smooth <= 0.0) throw std::invalid_argument("LossConfig: dice_smooth must be > 0");
  if (t_max < 1) throw std::invalid_argument("LossConfig: t_max must be >= 1");
  if (lambda_max < 0.0) throw std::invalid_argument("LossConfig: lambda_max must be >= 0");
}

double binary_cross_entropy(const Tensor& p, const Tensor& y) {
  check_pair(p, y, "binary_cross_entropy");
  check_binary(y, "binary_cross_entropy");
  double acc = 0.0;
  for (int i = 0; i < p.numel(); ++i) {
    const double pc = std::min(1.0 - kClamp, std::max(kClamp, p[i]));
    acc += y[i] == 1.0 ? -std::log(pc) : -std::log(1.0 - pc);
  }
  return acc / p.numel();
}

Tensor binary_cross_entropy_backward(const Tensor& p, const Tensor& y) {
  check_pair(p, y, "binary_cross_entropy");
  check_binary(y, "binary_cross_entropy");
  Tensor g(p.shape());
  const double inv_n = 1.0 / p.numel();
  for (int i = 0; i < p.numel(); ++i) {
    if (p[i] < kClamp || p[i] > 1.0 - kClamp) continue;  // clamp region: flat
    g[i] = (p[i] - y[i]) / (p[i] * (1.0 - p[i])) * inv_n;
  }
  return g;
}

namespace {

// Sample extents: a 4-D tensor is N samples of numel/N entries; anything
// else is one sample.
inline int sample_count(const Tensor& t) { return t.ndim() == 4 ? t.dim(0) : 1; }

}  // namespace

double soft_dice_loss(const Tensor& p, const Tensor& y, double smooth) {
  check_pair(p, y, "soft_dice_loss");
  if (smooth <= 0.0) throw std::invalid_argument("soft_dice_loss: smooth must be > 0");
  const int n = sample_count(p);
  const int per = p.numel() / n;
  double acc = 0.0;
  for (int s = 0; s < n; ++s) {
    const double* ps = p.data() + static_cast<std::size_t>(s) * per;
    const double* ys = y.data() + static_cast<std::size_t>(s) * per;
    double sp = 0.0, sy = 0.0, spy = 0.0;
    for (int i = 0; i < per; ++i) {
      sp += ps[i];
      sy += ys[i];
      spy += ps[i] * ys[i];
    }
    acc += 1.0 - (2.0 * spy + smooth) / (sp + sy + smooth);
  }
  return acc / n;
}

Tensor soft_dice_backward(const Tensor& p, const Tensor& y, double smooth) {
  check_pair(p, y, "soft_dice_loss");
  if (smooth <= 0.0) throw std::invalid_argument("soft_dice_loss: smooth must be > 0");
  const int n = sample_count(p);
  const int per = p.numel() / n;
  Tensor g(p.shape());
  for (int s = 0; s < n; ++s) {
    const double* ps = p.data() + static_cast<std::size_t>(s) * per;
    const double* ys = y.data() + static_cast<std::size_t>(s) * per;
    double* gs = g.data() + static_cast<std::size_t>(s) * per;
    double sp = 0.0, sy = 0.0, spy = 0.0;
    for (int i = 0; i < per; ++i) {
      sp += ps[i];
      sy += ys[i];
      spy += ps[i] * ys[i];
    }
    const double denom = sp + sy + smooth;
    const double num = 2.0 * spy + smooth;
    // d/dp_i of -(num/denom), then the 1/n batch average
    for (int i = 0; i < per; ++i)
      gs[i] = -(2.0 * ys[i] * denom - num) / (denom * denom) / n;
  }
  return g;
}

double hybrid_seg_loss(const Tensor& p, const Tensor& y, const LossConfig& cfg) {
  return cfg.ce_weight * binary_cross_entropy(p, y) +
         cfg.dice_weight * soft_dice_loss(p, y, cfg.dice_smooth);
}

Tensor hybrid_seg_backward(const Tensor& p, const Tensor& y, const LossConfig& cfg) {
  Tensor g = binary_cross_entropy_backward(p, y);
  g.scale_(cfg.ce_weight);
  g.add_scaled_(soft_dice_backward(p, y, cfg.dice_smooth), cfg.dice_weight);
  return g;
}

double supervised_loss(UNet& net, const Tensor* x_src, const Tensor* y_src, const Tensor* x_tgt,
                       const Tensor* y_tgt, const LossConfig& cfg, bool backprop) {
  if (!x_src && !x_tgt)
    throw std::invalid_argument("supervised_loss: both batches empty");
  if ((x_src != nullptr) != (y_src != nullptr) || (x_tgt != nullptr) != (y_tgt != nullptr))
    throw std::invalid_argument("supervised_loss: image batch without matching labels");
  double loss = 0.0;
  if (x_src) {
    const Tensor p = net.predict(*x_src, Domain::Source, Mode::Train);
    loss += hybrid_seg_loss(p, *y_src, cfg);
    if (backprop) net.backward(hybrid_seg_backward(p, *y_src, cfg));
  }
  if (x_tgt) {
    const Tensor p = net.predict(*x_tgt, Domain::Target, Mode::Train);
    loss += hybrid_seg_loss(p, *y_tgt, cfg);
    if (backprop) net.backward(hybrid_seg_backward(p, *y_tgt, cfg));
  }
  return loss;
}

double consistency_mse(const Tensor& p_student, const Tensor& p_teacher) {
  check_pair(p_student, p_teacher, "consistency_mse");
  double acc = 0.0;
  for (int i = 0; i < p_student.numel(); ++i) {
    const double d = p_student[i] - p_teacher[i];
    acc += d * d;
  }
  return acc / p_student.numel();
}

Tensor consistency_mse_backward(const Tensor& p_student, const Tensor& p_teacher) {
  check_pair(p_student, p_teacher, "consistency_mse");
  Tensor g(p_student.shape());
  const double scale = 2.0 / p_student.numel();
  for (int i = 0; i < g.numel(); ++i) g[i] = scale * (p_student[i] - p_teacher[i]);
  return g;
}

double lambda_rampup(int t, const LossConfig& cfg) {
  cfg.validate();
  if (t < 0 || t > cfg.t_max)
    throw std::invalid_argument("lambda_rampup: t = " + std::to_string(t) +
                                " outside [0, " + std::to_string(cfg.t_max) + "]");
  const double a = 1.0 - static_cast<double>(t) / cfg.t_max;
  return cfg.lambda_max * std::exp(-5.0 * a * a);
}

double total_loss(double loss_s, double loss_c, int t, const LossConfig& cfg) {
  return loss_s + lambda_rampup(t, cfg) * loss_c;
}

}  // namespace cada
