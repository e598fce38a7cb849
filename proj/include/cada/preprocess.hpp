#pragma once

#include "cada/tensor.hpp"

namespace cada {

// x^gamma elementwise; gamma > 0. Input expected in [0,1].
Tensor gamma_correct(const Tensor& img, double gamma);

// Contrast-limited adaptive histogram equalization on a [1,H,W] (or [H,W])
// image in [0,1]. 256 bins; `tiles` per axis must divide both H and W.
// clip_limit is a multiple of the mean bin count (infinity disables
// clipping; excess is redistributed uniformly in one pass). Per-tile maps
// are blended bilinearly between tile centers. A tile whose histogram is a
// single bin maps identically (flat regions stay flat).
Tensor clahe(const Tensor& img, int tiles, double clip_limit);

// Separable bilinear resampling, half-pixel-center convention.
Tensor resize_bilinear(const Tensor& img, int out_h, int out_w);

}  // namespace cada
