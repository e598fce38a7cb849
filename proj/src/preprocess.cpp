#include "cada/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace cada {

namespace {

void image_dims(const Tensor& img, const char* what, int& h, int& w) {
  if (img.ndim() == 3 && img.dim(0) == 1) {
    h = img.dim(1);
    w = img.dim(2);
  } else if (img.ndim() == 2) {
    h = img.dim(0);
    w = img.dim(1);
  } else {
    throw std::invalid_argument(std::string(what) + ": expected [1,H,W] or [H,W], got " +
                                shape_str(img));
  }
}

constexpr int kBins = 256;

inline int bin_of(double v) {
  const int b = static_cast<int>(v * kBins);
  return std::min(kBins - 1, std::max(0, b));
}

// One tile's equalization map evaluated at pixel value v. Degenerate
// (single-bin) histograms map identically.
struct TileMap {
  bool degenerate = false;
  double lut[kBins];  // cdf(bin)/count

  double apply(double v) const { return degenerate ? v : lut[bin_of(v)]; }
};

TileMap build_tile_map(const std::vector<double>& hist, double count, double clip_limit) {
  TileMap m;
  int nonzero = 0;
  for (int b = 0; b < kBins; ++b)
    if (hist[static_cast<std::size_t>(b)] > 0.0) ++nonzero;
  if (nonzero <= 1) {
    m.degenerate = true;
    return m;
  }
  std::vector<double> h = hist;
  if (std::isfinite(clip_limit)) {
    const double limit = clip_limit * count / kBins;
    double excess = 0.0;
    for (double& v : h) {
      if (v > limit) {
        excess += v - limit;
        v = limit;
      }
    }
    const double add = excess / kBins;
    for (double& v : h) v += add;
  }
  double cum = 0.0;
  for (int b = 0; b < kBins; ++b) {
    cum += h[static_cast<std::size_t>(b)];
    m.lut[b] = cum / count;
  }
  return m;
}

}  // namespace

Tensor gamma_correct(const Tensor& img, double gamma) {
  if (gamma <= 0.0) throw std::invalid_argument("gamma_correct: gamma must be > 0");
  Tensor out = img;
  for (int i = 0; i < out.numel(); ++i) out[i] = std::pow(out[i], gamma);
  return out;
}

Tensor clahe(const Tensor& img, int tiles, double clip_limit) {
  int h = 0, w = 0;
  image_dims(img, "clahe", h, w);
  if (tiles < 1) throw std::invalid_argument("clahe: tiles must be >= 1");
  if (h % tiles != 0 || w % tiles != 0)
    throw std::invalid_argument("clahe: tiles = " + std::to_string(tiles) +
                                " does not divide image " + std::to_string(h) + "x" +
                                std::to_string(w));
  if (clip_limit <= 0.0) throw std::invalid_argument("clahe: clip_limit must be > 0");
  const int th = h / tiles, tw = w / tiles;
  const double tile_count = static_cast<double>(th) * tw;

  std::vector<TileMap> maps(static_cast<std::size_t>(tiles) * tiles);
  std::vector<double> hist(kBins);
  for (int ti = 0; ti < tiles; ++ti) {
    for (int tj = 0; tj < tiles; ++tj) {
      std::fill(hist.begin(), hist.end(), 0.0);
      for (int r = ti * th; r < (ti + 1) * th; ++r)
        for (int c = tj * tw; c < (tj + 1) * tw; ++c)
          hist[static_cast<std::size_t>(bin_of(img[r * w + c]))] += 1.0;
      maps[static_cast<std::size_t>(ti) * tiles + tj] = build_tile_map(hist, tile_count, clip_limit);
    }
  }

  Tensor out(img.shape());
  for (int r = 0; r < h; ++r) {
    // fractional tile coordinate of this row relative to tile centers
    const double gy = (r + 0.5) / th - 0.5;
    const double cy = std::min(static_cast<double>(tiles - 1), std::max(0.0, gy));
    const int i0 = static_cast<int>(cy);
    const int i1 = std::min(i0 + 1, tiles - 1);
    const double fy = cy - i0;
    for (int c = 0; c < w; ++c) {
      const double gx = (c + 0.5) / tw - 0.5;
      const double cx = std::min(static_cast<double>(tiles - 1), std::max(0.0, gx));
      const int j0 = static_cast<int>(cx);
      const int j1 = std::min(j0 + 1, tiles - 1);
      const double fx = cx - j0;
      const double v = img[r * w + c];
      const double v00 = maps[static_cast<std::size_t>(i0) * tiles + j0].apply(v);
      const double v01 = maps[static_cast<std::size_t>(i0) * tiles + j1].apply(v);
      const double v10 = maps[static_cast<std::size_t>(i1) * tiles + j0].apply(v);
      const double v11 = maps[static_cast<std::size_t>(i1) * tiles + j1].apply(v);
      const double blended = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v01) +
                             fy * ((1.0 - fx) * v10 + fx * v11);
      out[r * w + c] = std::min(1.0, std::max(0.0, blended));
    }
  }
  return out;
}

Tensor resize_bilinear(const Tensor& img, int out_h, int out_w) {
  int h = 0, w = 0;
  image_dims(img, "resize_bilinear", h, w);
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("resize_bilinear: output dims must be >= 1");
  Tensor out(img.ndim() == 3 ? std::vector<int>{1, out_h, out_w}
                             : std::vector<int>{out_h, out_w});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int r = 0; r < out_h; ++r) {
    const double fy = std::min(static_cast<double>(h - 1),
                               std::max(0.0, (r + 0.5) * sy - 0.5));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - y0;
    for (int c = 0; c < out_w; ++c) {
      const double fx = std::min(static_cast<double>(w - 1),
                                 std::max(0.0, (c + 0.5) * sx - 0.5));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - x0;
      const double v = (1.0 - wy) * ((1.0 - wx) * img[y0 * w + x0] + wx * img[y0 * w + x1]) +
                       wy * ((1.0 - wx) * img[y1 * w + x0] + wx * img[y1 * w + x1]);
      out[r * out_w + c] = v;
    }
  }
  return out;
}

}  // namespace cada
