#include "cada/vsbn.hpp"

#include <cmath>
#include <stdexcept>

namespace cada {

Domain parse_domain(const std::string& s) {
  if (s == "SOURCE") return Domain::Source;
  if (s == "TARGET") return Domain::Target;
  throw std::invalid_argument("unknown domain tag \"" + s + "\" (expected SOURCE or TARGET)");
}

VsbnLayer::VsbnLayer(int channels, std::string id, double eps, double stat_momentum)
    : channels_(channels), id_(std::move(id)), eps_(eps), stat_momentum_(stat_momentum) {
  if (channels < 1) throw std::invalid_argument("VsbnLayer: channels must be >= 1");
  if (eps <= 0.0) throw std::invalid_argument("VsbnLayer: eps must be > 0");
  for (int d = 0; d < 2; ++d) {
    const char* dn = d == 0 ? "SOURCE" : "TARGET";
    gamma_[d] = Parameter(Tensor::full({channels}, 1.0), "vsbn." + id_ + "." + dn + ".gamma");
    beta_[d] = Parameter(Tensor::zeros({channels}), "vsbn." + id_ + "." + dn + ".beta");
    running_mean_[d] = Tensor::zeros({channels});
    running_var_[d] = Tensor::full({channels}, 1.0);
    stat_count_[d] = Tensor::zeros({1});
  }
}

Tensor VsbnLayer::forward_train(const Tensor& x, Domain d) {
  if (x.ndim() != 4 || x.dim(1) != channels_)
    throw std::invalid_argument("vsbn " + id_ + ": expected [N," + std::to_string(channels_) +
                                ",H,W], got " + shape_str(x));
  const int N = x.dim(0), C = channels_, H = x.dim(2), W = x.dim(3);
  const long m = static_cast<long>(N) * H * W;
  if (m < 2)
    throw std::invalid_argument("vsbn " + id_ + ": batch with N*H*W = " + std::to_string(m) +
                                " has undefined variance");

  saved_mean_ = Tensor({C});
  saved_var_ = Tensor({C});
  saved_inv_std_ = Tensor({C});
  saved_xhat_ = Tensor(x.shape());
  saved_domain_ = d;
  has_cache_ = true;

  const Tensor& g = gamma_[idx(d)].value;
  const Tensor& b = beta_[idx(d)].value;
  Tensor y(x.shape());
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int c = 0; c < C; ++c) {
    double sum = 0.0, sumsq = 0.0;
    for (int n = 0; n < N; ++n) {
      const double* p = x.data() + (static_cast<std::size_t>(n) * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum += p[i];
        sumsq += p[i] * p[i];
      }
    }
    const double mean = sum / static_cast<double>(m);
    const double var = sumsq / static_cast<double>(m) - mean * mean;  // biased
    const double inv_std = 1.0 / std::sqrt(var + eps_);
    saved_mean_[c] = mean;
    saved_var_[c] = var;
    saved_inv_std_[c] = inv_std;

    for (int n = 0; n < N; ++n) {
      const double* p = x.data() + (static_cast<std::size_t>(n) * C + c) * plane;
      double* xh = saved_xhat_.data() + (static_cast<std::size_t>(n) * C + c) * plane;
      double* yp = y.data() + (static_cast<std::size_t>(n) * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        xh[i] = (p[i] - mean) * inv_std;
        yp[i] = g[c] * xh[i] + b[c];
      }
    }

    // running stats for domain d only; unbiased correction when storing var
    const double unbiased = var * static_cast<double>(m) / static_cast<double>(m - 1);
    running_mean_[idx(d)][c] =
        (1.0 - stat_momentum_) * running_mean_[idx(d)][c] + stat_momentum_ * mean;
    running_var_[idx(d)][c] =
        (1.0 - stat_momentum_) * running_var_[idx(d)][c] + stat_momentum_ * unbiased;
  }
  stat_count_[idx(d)][0] += 1.0;
  return y;
}

Tensor VsbnLayer::forward_eval(const Tensor& x, Domain d) const {
  if (x.ndim() != 4 || x.dim(1) != channels_)
    throw std::invalid_argument("vsbn " + id_ + ": expected [N," + std::to_string(channels_) +
                                ",H,W], got " + shape_str(x));
  if (stat_updates(d) == 0)
    throw std::runtime_error("vsbn " + id_ + ": no statistics for domain " +
                             std::string(domain_name(d)));
  const int N = x.dim(0), C = channels_, H = x.dim(2), W = x.dim(3);
  const Tensor& g = gamma_[idx(d)].value;
  const Tensor& b = beta_[idx(d)].value;
  const Tensor& rm = running_mean_[idx(d)];
  const Tensor& rv = running_var_[idx(d)];
  Tensor y(x.shape());
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int c = 0; c < C; ++c) {
    const double inv_std = 1.0 / std::sqrt(rv[c] + eps_);
    const double scale = g[c] * inv_std;
    const double shift = b[c] - g[c] * rm[c] * inv_std;
    for (int n = 0; n < N; ++n) {
      const double* p = x.data() + (static_cast<std::size_t>(n) * C + c) * plane;
      double* yp = y.data() + (static_cast<std::size_t>(n) * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) yp[i] = scale * p[i] + shift;
    }
  }
  return y;
}

Tensor VsbnLayer::backward(const Tensor& gout) {
  if (!has_cache_) throw std::logic_error("vsbn " + id_ + ": backward without a train forward");
  if (!gout.same_shape(saved_xhat_))
    throw std::invalid_argument("vsbn " + id_ + ": gradient shape mismatch");
  const Domain d = saved_domain_;
  const int N = gout.dim(0), C = channels_, H = gout.dim(2), W = gout.dim(3);
  const long m = static_cast<long>(N) * H * W;
  const double inv_m = 1.0 / static_cast<double>(m);
  const Tensor& g = gamma_[idx(d)].value;
  Tensor& ggamma = gamma_[idx(d)].grad;
  Tensor& gbeta = beta_[idx(d)].grad;
  Tensor gx(gout.shape());
  const std::size_t plane = static_cast<std::size_t>(H) * W;

  for (int c = 0; c < C; ++c) {
    double sum_gy = 0.0, sum_gy_xhat = 0.0;
    for (int n = 0; n < N; ++n) {
      const double* gy = gout.data() + (static_cast<std::size_t>(n) * C + c) * plane;
      const double* xh = saved_xhat_.data() + (static_cast<std::size_t>(n) * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_gy += gy[i];
        sum_gy_xhat += gy[i] * xh[i];
      }
    }
    ggamma[c] += sum_gy_xhat;
    gbeta[c] += sum_gy;

    // dL/dx = gamma * inv_std * (gy - mean(gy) - xhat * mean(gy*xhat))
    const double k = g[c] * saved_inv_std_[c];
    const double mean_gy = sum_gy * inv_m;
    const double mean_gy_xhat = sum_gy_xhat * inv_m;
    for (int n = 0; n < N; ++n) {
      const double* gy = gout.data() + (static_cast<std::size_t>(n) * C + c) * plane;
      const double* xh = saved_xhat_.data() + (static_cast<std::size_t>(n) * C + c) * plane;
      double* gxp = gx.data() + (static_cast<std::size_t>(n) * C + c) * plane;
      for (std::size_t i = 0; i < plane; ++i)
        gxp[i] = k * (gy[i] - mean_gy - xh[i] * mean_gy_xhat);
    }
  }
  return gx;
}

}  // namespace cada
