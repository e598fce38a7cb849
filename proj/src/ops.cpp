#include "cada/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cada {

namespace {

void check_4d(const Tensor& t, const char* what) {
  if (t.ndim() != 4)
    throw std::invalid_argument(std::string(what) + ": expected 4-D tensor, got " + shape_str(t));
}

// 3x3/stride-1/pad-1 row kernel: y[0..W) += correlation of one input row with
// one weight row. Unrolled over kw so each output element is loaded once.
inline void accum_row3(double* __restrict yrow, const double* __restrict xrow, int W,
                       const double* __restrict wr) {
  const double w0 = wr[0], w1 = wr[1], w2 = wr[2];
  yrow[0] += w1 * xrow[0] + w2 * xrow[1];
  for (int ow = 1; ow < W - 1; ++ow)
    yrow[ow] += w0 * xrow[ow - 1] + w1 * xrow[ow] + w2 * xrow[ow + 1];
  yrow[W - 1] += w0 * xrow[W - 2] + w1 * xrow[W - 1];
}

// Accumulates a full same-size 3x3 correlation of one input plane into one
// output plane (the hot path for every U-Net convolution).
void accum_plane3(double* __restrict ybase, const double* __restrict xbase, int H, int W,
                  const double* __restrict wbase) {
  for (int oh = 0; oh < H; ++oh) {
    double* yrow = ybase + static_cast<std::size_t>(oh) * W;
    for (int kh = 0; kh < 3; ++kh) {
      const int ih = oh + kh - 1;
      if (ih < 0 || ih >= H) continue;
      accum_row3(yrow, xbase + static_cast<std::size_t>(ih) * W, W, wbase + kh * 3);
    }
  }
}

// Three shifted row dot products (the weight-gradient inner loop over
// ow = 1..W-2). Explicitly vectorized: a sum reduction does not
// auto-vectorize without fast-math, and the lane order here is fixed so
// results stay reproducible.
#if defined(__GNUC__) || defined(__clang__)
typedef double v4d __attribute__((vector_size(32), aligned(8)));

inline void dot3_interior(const double* __restrict xrow, const double* __restrict grow, int W,
                          double& a0, double& a1, double& a2) {
  v4d s0a = {0, 0, 0, 0}, s1a = {0, 0, 0, 0}, s2a = {0, 0, 0, 0};
  v4d s0b = {0, 0, 0, 0}, s1b = {0, 0, 0, 0}, s2b = {0, 0, 0, 0};
  int ow = 1;
  for (; ow + 8 <= W - 1; ow += 8) {
    const v4d ga = *reinterpret_cast<const v4d*>(grow + ow);
    const v4d gb = *reinterpret_cast<const v4d*>(grow + ow + 4);
    s0a += *reinterpret_cast<const v4d*>(xrow + ow - 1) * ga;
    s0b += *reinterpret_cast<const v4d*>(xrow + ow + 3) * gb;
    s1a += *reinterpret_cast<const v4d*>(xrow + ow) * ga;
    s1b += *reinterpret_cast<const v4d*>(xrow + ow + 4) * gb;
    s2a += *reinterpret_cast<const v4d*>(xrow + ow + 1) * ga;
    s2b += *reinterpret_cast<const v4d*>(xrow + ow + 5) * gb;
  }
  s0a += s0b;
  s1a += s1b;
  s2a += s2b;
  double b0 = (s0a[0] + s0a[1]) + (s0a[2] + s0a[3]);
  double b1 = (s1a[0] + s1a[1]) + (s1a[2] + s1a[3]);
  double b2 = (s2a[0] + s2a[1]) + (s2a[2] + s2a[3]);
  for (; ow < W - 1; ++ow) {
    b0 += xrow[ow - 1] * grow[ow];
    b1 += xrow[ow] * grow[ow];
    b2 += xrow[ow + 1] * grow[ow];
  }
  a0 += b0;
  a1 += b1;
  a2 += b2;
}
#else
inline void dot3_interior(const double* xrow, const double* grow, int W, double& a0, double& a1,
                          double& a2) {
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  for (int ow = 1; ow < W - 1; ++ow) {
    b0 += xrow[ow - 1] * grow[ow];
    b1 += xrow[ow] * grow[ow];
    b2 += xrow[ow + 1] * grow[ow];
  }
  a0 += b0;
  a1 += b1;
  a2 += b2;
}
#endif

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  check_4d(x, "conv2d input");
  check_4d(w, "conv2d weight");
  const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = w.dim(0), k = w.dim(2);
  if (w.dim(1) != Ci)
    throw std::invalid_argument("conv2d: input has " + std::to_string(Ci) +
                                " channels but weight expects " + std::to_string(w.dim(1)) +
                                " (input " + shape_str(x) + ", weight " + shape_str(w) + ")");
  if (w.dim(2) != w.dim(3) || k % 2 == 0)
    throw std::invalid_argument("conv2d: kernel must be square with odd size, got " + shape_str(w));
  if (b.numel() != Co)
    throw std::invalid_argument("conv2d: bias size " + std::to_string(b.numel()) +
                                " does not match Cout " + std::to_string(Co));
  if (stride < 1 || pad < 0) throw std::invalid_argument("conv2d: stride must be >= 1 and pad >= 0");
  if (H + 2 * pad < k || W + 2 * pad < k)
    throw std::invalid_argument("conv2d: spatial dims " + shape_str(x) + " too small for kernel " +
                                std::to_string(k) + " with pad " + std::to_string(pad));

  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  Tensor y({N, Co, Ho, Wo});

  if (k == 3 && stride == 1 && pad == 1 && W >= 2) {
    for (int n = 0; n < N; ++n) {
      for (int co = 0; co < Co; ++co) {
        double* ybase = y.data() + (static_cast<std::size_t>(n) * Co + co) * Ho * Wo;
        std::fill(ybase, ybase + static_cast<std::size_t>(Ho) * Wo, b[co]);
        for (int ci = 0; ci < Ci; ++ci)
          accum_plane3(ybase, x.data() + (static_cast<std::size_t>(n) * Ci + ci) * H * W, H, W,
                       w.data() + (static_cast<std::size_t>(co) * Ci + ci) * 9);
      }
    }
    return y;
  }

  for (int n = 0; n < N; ++n) {
    for (int co = 0; co < Co; ++co) {
      double* ybase = y.data() + (static_cast<std::size_t>(n) * Co + co) * Ho * Wo;
      std::fill(ybase, ybase + static_cast<std::size_t>(Ho) * Wo, b[co]);
      for (int ci = 0; ci < Ci; ++ci) {
        const double* xbase = x.data() + (static_cast<std::size_t>(n) * Ci + ci) * H * W;
        const double* wbase = w.data() + (static_cast<std::size_t>(co) * Ci + ci) * k * k;
        for (int kh = 0; kh < k; ++kh) {
          for (int kw = 0; kw < k; ++kw) {
            const double wv = wbase[kh * k + kw];
            if (wv == 0.0) continue;
            for (int oh = 0; oh < Ho; ++oh) {
              const int ih = oh * stride + kh - pad;
              if (ih < 0 || ih >= H) continue;
              const double* xrow = xbase + static_cast<std::size_t>(ih) * W;
              double* yrow = ybase + static_cast<std::size_t>(oh) * Wo;
              if (stride == 1) {
                const int off = kw - pad;
                const int lo = std::max(0, -off);
                const int hi = std::min(Wo, W - off);
                for (int ow = lo; ow < hi; ++ow) yrow[ow] += wv * xrow[ow + off];
              } else {
                for (int ow = 0; ow < Wo; ++ow) {
                  const int iw = ow * stride + kw - pad;
                  if (iw >= 0 && iw < W) yrow[ow] += wv * xrow[iw];
                }
              }
            }
          }
        }
      }
    }
  }
  return y;
}

Tensor conv2d_backward(const Tensor& x, const Tensor& w, int stride, int pad,
                       const Tensor& gout, Tensor& gw, Tensor& gb) {
  const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int Co = w.dim(0), k = w.dim(2);
  const int Ho = gout.dim(2), Wo = gout.dim(3);
  if (!gw.same_shape(w)) throw std::invalid_argument("conv2d backward: gw shape mismatch");
  if (gb.numel() != Co) throw std::invalid_argument("conv2d backward: gb shape mismatch");
  if (gout.ndim() != 4 || gout.dim(0) != N || gout.dim(1) != Co ||
      Ho != (H + 2 * pad - k) / stride + 1 || Wo != (W + 2 * pad - k) / stride + 1)
    throw std::invalid_argument("conv2d backward: gradient shape " + shape_str(gout) +
                                " does not match input " + shape_str(x) + " and weight " +
                                shape_str(w));
  Tensor gx({N, Ci, H, W});

  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Co; ++co) {
      const double* gbase = gout.data() + (static_cast<std::size_t>(n) * Co + co) * Ho * Wo;
      double s = 0.0;
      for (int i = 0; i < Ho * Wo; ++i) s += gbase[i];
      gb[co] += s;
    }

  if (k == 3 && stride == 1 && pad == 1 && W >= 2) {
    // dL/dw: each weight is a dot product between an input row window and a
    // gradient row. Kept free of stores into gx so the loop vectorizes.
    for (int n = 0; n < N; ++n) {
      for (int co = 0; co < Co; ++co) {
        const double* gbase = gout.data() + (static_cast<std::size_t>(n) * Co + co) * Ho * Wo;
        for (int ci = 0; ci < Ci; ++ci) {
          const double* xbase = x.data() + (static_cast<std::size_t>(n) * Ci + ci) * H * W;
          double* gwbase = gw.data() + (static_cast<std::size_t>(co) * Ci + ci) * 9;
          for (int kh = 0; kh < 3; ++kh) {
            const int off_lo = kh == 0 ? 1 : 0;    // first oh with a valid input row
            const int off_hi = kh == 2 ? H - 1 : H;
            double a0 = 0.0, a1 = 0.0, a2 = 0.0;
            for (int oh = off_lo; oh < off_hi; ++oh) {
              const double* xrow = xbase + static_cast<std::size_t>(oh + kh - 1) * W;
              const double* grow = gbase + static_cast<std::size_t>(oh) * W;
              dot3_interior(xrow, grow, W, a0, a1, a2);
              a0 += xrow[W - 2] * grow[W - 1];
              a1 += xrow[0] * grow[0] + xrow[W - 1] * grow[W - 1];
              a2 += xrow[1] * grow[0];
            }
            gwbase[kh * 3 + 0] += a0;
            gwbase[kh * 3 + 1] += a1;
            gwbase[kh * 3 + 2] += a2;
          }
        }
      }
    }
    // dL/dx is the same-size correlation of gout with the flipped, transposed
    // kernel, so it reuses the forward plane kernel.
    Tensor wt({Ci, Co, 3, 3});
    for (int co = 0; co < Co; ++co)
      for (int ci = 0; ci < Ci; ++ci)
        for (int kh = 0; kh < 3; ++kh)
          for (int kw = 0; kw < 3; ++kw)
            wt.at(ci, co, kh, kw) = w.at(co, ci, 2 - kh, 2 - kw);
    for (int n = 0; n < N; ++n)
      for (int ci = 0; ci < Ci; ++ci) {
        double* gxbase = gx.data() + (static_cast<std::size_t>(n) * Ci + ci) * H * W;
        for (int co = 0; co < Co; ++co)
          accum_plane3(gxbase, gout.data() + (static_cast<std::size_t>(n) * Co + co) * H * W, H, W,
                       wt.data() + (static_cast<std::size_t>(ci) * Co + co) * 9);
      }
    return gx;
  }

  for (int n = 0; n < N; ++n) {
    for (int co = 0; co < Co; ++co) {
      const double* gbase = gout.data() + (static_cast<std::size_t>(n) * Co + co) * Ho * Wo;
      for (int ci = 0; ci < Ci; ++ci) {
        const double* xbase = x.data() + (static_cast<std::size_t>(n) * Ci + ci) * H * W;
        double* gxbase = gx.data() + (static_cast<std::size_t>(n) * Ci + ci) * H * W;
        const double* wbase = w.data() + (static_cast<std::size_t>(co) * Ci + ci) * k * k;
        double* gwbase = gw.data() + (static_cast<std::size_t>(co) * Ci + ci) * k * k;
        for (int kh = 0; kh < k; ++kh) {
          for (int kw = 0; kw < k; ++kw) {
            const double wv = wbase[kh * k + kw];
            double wacc = 0.0;
            for (int oh = 0; oh < Ho; ++oh) {
              const int ih = oh * stride + kh - pad;
              if (ih < 0 || ih >= H) continue;
              const double* xrow = xbase + static_cast<std::size_t>(ih) * W;
              double* gxrow = gxbase + static_cast<std::size_t>(ih) * W;
              const double* grow = gbase + static_cast<std::size_t>(oh) * Wo;
              if (stride == 1) {
                const int off = kw - pad;
                const int lo = std::max(0, -off);
                const int hi = std::min(Wo, W - off);
                for (int ow = lo; ow < hi; ++ow) {
                  wacc += xrow[ow + off] * grow[ow];
                  gxrow[ow + off] += wv * grow[ow];
                }
              } else {
                for (int ow = 0; ow < Wo; ++ow) {
                  const int iw = ow * stride + kw - pad;
                  if (iw < 0 || iw >= W) continue;
                  wacc += xrow[iw] * grow[ow];
                  gxrow[iw] += wv * grow[ow];
                }
              }
            }
            gwbase[kh * k + kw] += wacc;
          }
        }
      }
    }
  }
  return gx;
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (int i = 0; i < y.numel(); ++i) y[i] = y[i] > 0.0 ? y[i] : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& gout) {
  Tensor gx(x.shape());
  for (int i = 0; i < x.numel(); ++i) gx[i] = x[i] > 0.0 ? gout[i] : 0.0;
  return gx;
}

Tensor sigmoid(const Tensor& x) {
  Tensor y(x.shape());
  for (int i = 0; i < x.numel(); ++i) {
    const double v = x[i];
    if (v >= 0.0) {
      y[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      y[i] = e / (1.0 + e);
    }
  }
  return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& gout) {
  Tensor gx(y.shape());
  for (int i = 0; i < y.numel(); ++i) gx[i] = gout[i] * y[i] * (1.0 - y[i]);
  return gx;
}

MaxPoolCtx maxpool2(const Tensor& x) {
  check_4d(x, "maxpool2 input");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % 2 != 0 || W % 2 != 0)
    throw std::invalid_argument("maxpool2: spatial dims must be even, got " + shape_str(x));
  MaxPoolCtx ctx;
  ctx.in_shape = x.shape();
  ctx.out = Tensor({N, C, H / 2, W / 2});
  ctx.argmax.resize(static_cast<std::size_t>(ctx.out.numel()));
  int o = 0;
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < H / 2; ++oh)
        for (int ow = 0; ow < W / 2; ++ow, ++o) {
          const int base = ((n * C + c) * H + oh * 2) * W + ow * 2;
          // row-major window order; strict > keeps the first max on ties
          int best = base;
          double bv = x[base];
          if (x[base + 1] > bv) { bv = x[base + 1]; best = base + 1; }
          if (x[base + W] > bv) { bv = x[base + W]; best = base + W; }
          if (x[base + W + 1] > bv) { bv = x[base + W + 1]; best = base + W + 1; }
          ctx.out[o] = bv;
          ctx.argmax[static_cast<std::size_t>(o)] = best;
        }
  return ctx;
}

Tensor maxpool2_backward(const MaxPoolCtx& ctx, const Tensor& gout) {
  if (!gout.same_shape(ctx.out))
    throw std::invalid_argument("maxpool2 backward: gradient shape mismatch");
  Tensor gx(ctx.in_shape);
  for (int o = 0; o < gout.numel(); ++o) gx[ctx.argmax[static_cast<std::size_t>(o)]] += gout[o];
  return gx;
}

Tensor upsample2(const Tensor& x) {
  check_4d(x, "upsample2 input");
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor y({N, C, H * 2, W * 2});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
          const double v = x.at(n, c, h, w);
          y.at(n, c, 2 * h, 2 * w) = v;
          y.at(n, c, 2 * h, 2 * w + 1) = v;
          y.at(n, c, 2 * h + 1, 2 * w) = v;
          y.at(n, c, 2 * h + 1, 2 * w + 1) = v;
        }
  return y;
}

Tensor upsample2_backward(const Tensor& gout) {
  check_4d(gout, "upsample2 gradient");
  const int N = gout.dim(0), C = gout.dim(1), H2 = gout.dim(2), W2 = gout.dim(3);
  Tensor gx({N, C, H2 / 2, W2 / 2});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int h = 0; h < H2 / 2; ++h)
        for (int w = 0; w < W2 / 2; ++w)
          gx.at(n, c, h, w) = gout.at(n, c, 2 * h, 2 * w) + gout.at(n, c, 2 * h, 2 * w + 1) +
                              gout.at(n, c, 2 * h + 1, 2 * w) + gout.at(n, c, 2 * h + 1, 2 * w + 1);
  return gx;
}

Tensor channel_concat(const Tensor& a, const Tensor& b) {
  check_4d(a, "channel_concat a");
  check_4d(b, "channel_concat b");
  if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
    throw std::invalid_argument("channel_concat: batch/spatial mismatch " + shape_str(a) + " vs " +
                                shape_str(b));
  const int N = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
  Tensor y({N, Ca + Cb, H, W});
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int n = 0; n < N; ++n) {
    std::copy_n(a.data() + static_cast<std::size_t>(n) * Ca * plane, Ca * plane,
                y.data() + static_cast<std::size_t>(n) * (Ca + Cb) * plane);
    std::copy_n(b.data() + static_cast<std::size_t>(n) * Cb * plane, Cb * plane,
                y.data() + (static_cast<std::size_t>(n) * (Ca + Cb) + Ca) * plane);
  }
  return y;
}

std::pair<Tensor, Tensor> channel_concat_backward(const Tensor& gout, int ca) {
  const int N = gout.dim(0), C = gout.dim(1), H = gout.dim(2), W = gout.dim(3);
  const int cb = C - ca;
  Tensor ga({N, ca, H, W});
  Tensor gb({N, cb, H, W});
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int n = 0; n < N; ++n) {
    std::copy_n(gout.data() + static_cast<std::size_t>(n) * C * plane, ca * plane,
                ga.data() + static_cast<std::size_t>(n) * ca * plane);
    std::copy_n(gout.data() + (static_cast<std::size_t>(n) * C + ca) * plane, cb * plane,
                gb.data() + static_cast<std::size_t>(n) * cb * plane);
  }
  return {std::move(ga), std::move(gb)};
}

Tensor hflip(const Tensor& x) {
  if (x.ndim() != 3 && x.ndim() != 4)
    throw std::invalid_argument("hflip: expected 3-D or 4-D tensor, got " + shape_str(x));
  Tensor y(x.shape());
  const int W = x.dim(x.ndim() - 1);
  const int rows = x.numel() / W;
  for (int r = 0; r < rows; ++r) {
    const double* src = x.data() + static_cast<std::size_t>(r) * W;
    double* dst = y.data() + static_cast<std::size_t>(r) * W;
    for (int w = 0; w < W; ++w) dst[w] = src[W - 1 - w];
  }
  return y;
}

}  // namespace cada
