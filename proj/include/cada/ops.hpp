#pragma once

#include <utility>
#include <vector>

#include "cada/tensor.hpp"

namespace cada {

// Reverse-mode primitives for the mini U-Net. Forward functions return the
// output; backward functions take whatever the forward needed to save plus
// the upstream gradient. Parameter gradients are accumulated (+=), so callers
// zero them between steps.

// Cross-correlation, [N,Ci,H,W] * [Co,Ci,k,k] -> [N,Co,H',W'] with
// H' = (H + 2*pad - k)/stride + 1. k must be odd.
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);
// Returns dL/dx; accumulates into gw and gb (shapes of w and b).
Tensor conv2d_backward(const Tensor& x, const Tensor& w, int stride, int pad,
                       const Tensor& gout, Tensor& gw, Tensor& gb);

Tensor relu(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& gout);

// Numerically stable logistic; branches on sign so exp never overflows.
Tensor sigmoid(const Tensor& x);
// y is the forward output (uses y*(1-y)).
Tensor sigmoid_backward(const Tensor& y, const Tensor& gout);

// 2x2/stride-2 max pool. Ties go to the first element in row-major window
// order; argmax stores the flat input index the gradient is routed to.
struct MaxPoolCtx {
  Tensor out;
  std::vector<int> argmax;
  std::vector<int> in_shape;
};
MaxPoolCtx maxpool2(const Tensor& x);
Tensor maxpool2_backward(const MaxPoolCtx& ctx, const Tensor& gout);

// Nearest-neighbor 2x upsample; backward sums the four replicas per cell.
Tensor upsample2(const Tensor& x);
Tensor upsample2_backward(const Tensor& gout);

Tensor channel_concat(const Tensor& a, const Tensor& b);
// ca = channel count of the first input.
std::pair<Tensor, Tensor> channel_concat_backward(const Tensor& gout, int ca);

// Horizontal flip (reverse the W axis) for [N,C,H,W] or [C,H,W]. Linear, so
// the backward of a flip is the same flip applied to the gradient.
Tensor hflip(const Tensor& x);

}  // namespace cada
