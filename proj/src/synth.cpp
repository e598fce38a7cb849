#include "cada/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "cada/errors.hpp"
#include "cada/rng.hpp"

namespace cada {

void SynthConfig::validate() const {
  if (size < 8) throw std::invalid_argument("SynthConfig: size must be >= 8");
  if (n_trees_min < 1 || n_trees_max < n_trees_min)
    throw std::invalid_argument("SynthConfig: need 1 <= n_trees_min <= n_trees_max");
  if (branch_prob < 0.0 || branch_prob > 1.0)
    throw std::invalid_argument("SynthConfig: branch_prob must be in [0,1]");
  if (radius_min < 1.0 || radius_max < radius_min)
    throw std::invalid_argument("SynthConfig: need 1 <= radius_min <= radius_max");
}

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Segment {
  double x0, y0, x1, y1;
  double radius;
  int depth;  // branch generation, 0 = trunk
};

struct Branch {
  double x, y, angle, radius;
  int depth;
  int steps_left;
};

// Random recursive branching walk; children spawn on the parent path with
// reduced radius and incremented depth.
void grow_tree(const SynthConfig& cfg, Rng& rng, double start_x, double start_y,
               double start_angle, std::vector<Segment>& segments) {
  const double step = cfg.size / 14.0;
  std::vector<Branch> stack;
  stack.push_back({start_x, start_y, start_angle,
                   rng.uniform(cfg.radius_min, cfg.radius_max), 0,
                   10 + rng.uniform_int(0, 6)});
  while (!stack.empty() && segments.size() < 600) {
    Branch b = stack.back();
    stack.pop_back();
    while (b.steps_left > 0 && b.radius >= 0.6) {
      b.angle += rng.normal(0.0, 0.28);
      const double nx = b.x + step * std::cos(b.angle);
      const double ny = b.y + step * std::sin(b.angle);
      // hard canvas wall: keeping every endpoint in-canvas is what guarantees
      // the rasterized mask stays one 8-connected component
      if (nx < 0.0 || nx > cfg.size || ny < 0.0 || ny > cfg.size) break;
      segments.push_back({b.x, b.y, nx, ny, b.radius, b.depth});
      b.x = nx;
      b.y = ny;
      b.radius *= 0.97;
      --b.steps_left;
      if (rng.bernoulli(cfg.branch_prob)) {
        const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
        stack.push_back({b.x, b.y, b.angle + side * rng.uniform(0.45, 0.95),
                         b.radius * 0.72, b.depth + 1, 5 + rng.uniform_int(0, 5)});
      }
    }
  }
}

double point_segment_dist(double px, double py, const Segment& s) {
  const double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - s.x0) * dx + (py - s.y0) * dy) / len2 : 0.0;
  t = std::min(1.0, std::max(0.0, t));
  const double cx = s.x0 + t * dx, cy = s.y0 + t * dy;
  return std::hypot(px - cx, py - cy);
}

// Stamps segments onto a coverage canvas and records the shallowest branch
// depth touching each pixel.
void rasterize(const std::vector<Segment>& segments, int size, Tensor& mask, Tensor& depth) {
  mask = Tensor::zeros({1, size, size});
  depth = Tensor::zeros({1, size, size});
  int max_depth = 0;
  for (const Segment& s : segments) max_depth = std::max(max_depth, s.depth);
  std::vector<int> pix_depth(static_cast<std::size_t>(size) * size, -1);
  for (const Segment& s : segments) {
    const int r0 = std::max(0, static_cast<int>(std::floor(std::min(s.y0, s.y1) - s.radius - 1)));
    const int r1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(s.y0, s.y1) + s.radius + 1)));
    const int c0 = std::max(0, static_cast<int>(std::floor(std::min(s.x0, s.x1) - s.radius - 1)));
    const int c1 = std::min(size - 1, static_cast<int>(std::ceil(std::max(s.x0, s.x1) + s.radius + 1)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double d = point_segment_dist(c + 0.5, r + 0.5, s);
        // anti-aliased coverage r+0.5-d, thresholded at 0.5
        if (d <= s.radius) {
          const int i = r * size + c;
          mask[i] = 1.0;
          if (pix_depth[static_cast<std::size_t>(i)] < 0 ||
              s.depth < pix_depth[static_cast<std::size_t>(i)])
            pix_depth[static_cast<std::size_t>(i)] = s.depth;
        }
      }
    }
  }
  const double norm = max_depth > 0 ? 1.0 / max_depth : 0.0;
  for (int i = 0; i < mask.numel(); ++i)
    if (pix_depth[static_cast<std::size_t>(i)] >= 0)
      depth[i] = pix_depth[static_cast<std::size_t>(i)] * norm;
}

VesselTree attempt_tree(const SynthConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Segment> segments;

  // root on a border band, growing inward
  const int edge = rng.uniform_int(0, 3);
  const double along = rng.uniform(0.2, 0.8) * cfg.size;
  double rx = 0, ry = 0, base_angle = 0;
  switch (edge) {
    case 0: rx = along; ry = 1.5; base_angle = kPi / 2; break;          // top, growing down
    case 1: rx = along; ry = cfg.size - 1.5; base_angle = -kPi / 2; break;
    case 2: rx = 1.5; ry = along; base_angle = 0.0; break;              // left, growing right
    default: rx = cfg.size - 1.5; ry = along; base_angle = kPi; break;
  }
  base_angle += rng.uniform(-0.35, 0.35);
  grow_tree(cfg, rng, rx, ry, base_angle, segments);

  const int extra = rng.uniform_int(cfg.n_trees_min, cfg.n_trees_max) - 1;
  for (int t = 0; t < extra && !segments.empty(); ++t) {
    // secondary trunks sprout from an existing segment so the mask stays
    // one connected component
    const Segment& host = segments[static_cast<std::size_t>(
        rng.uniform_int(0, static_cast<int>(segments.size()) - 1))];
    grow_tree(cfg, rng, host.x1, host.y1, rng.uniform(0.0, 2.0 * kPi), segments);
  }

  VesselTree tree;
  rasterize(segments, cfg.size, tree.mask, tree.depth);
  tree.root_r = std::min(cfg.size - 1, std::max(0, static_cast<int>(ry)));
  tree.root_c = std::min(cfg.size - 1, std::max(0, static_cast<int>(rx)));
  return tree;
}

}  // namespace

VesselTree generate_vessel_tree(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  for (int attempt = 0; attempt < 10; ++attempt) {
    VesselTree tree = attempt_tree(cfg, mix_seed(seed, static_cast<std::uint64_t>(attempt)));
    if (tree.mask.sum() > 0.0) return tree;
  }
  throw DataError("generate_vessel_tree: empty mask after 10 attempts (degenerate config)");
}

Tensor render_source(const VesselTree& tree, const SynthConfig& cfg, std::uint64_t seed) {
  const int S = cfg.size;
  const SourceStyle& st = cfg.source;
  Rng rng(mix_seed(seed, std::string_view("render_source")));
  Tensor img({1, S, S});
  const double cx = (S - 1) / 2.0, cy = (S - 1) / 2.0;
  const double rad2 = (S / 2.0) * (S / 2.0);
  for (int r = 0; r < S; ++r) {
    for (int c = 0; c < S; ++c) {
      const int i = r * S + c;
      const double d2 = ((r - cy) * (r - cy) + (c - cx) * (c - cx)) / rad2;
      const double bg = st.background * (1.0 - st.vignette_strength * d2);
      img[i] = tree.mask[i] > 0.5 ? st.vessel_intensity : bg;
    }
  }
  if (st.noise_sigma > 0.0)
    for (int i = 0; i < img.numel(); ++i) img[i] += st.noise_sigma * rng.normal();
  for (int i = 0; i < img.numel(); ++i) img[i] = std::min(1.0, std::max(0.0, img[i]));
  return img;
}

Tensor render_target(const VesselTree& tree, const SynthConfig& cfg, std::uint64_t seed) {
  const int S = cfg.size;
  const TargetStyle& st = cfg.target;
  Rng rng(mix_seed(seed, std::string_view("render_target")));
  // smooth low-frequency background: a few random cosine plaids around a
  // semi-transparent base level
  const double base = 0.62;
  const double vessel_contrast = 0.30;
  struct Wave { double fx, fy, phase, amp; };
  Wave waves[3];
  for (Wave& wv : waves) {
    wv.fx = rng.uniform(0.5, 2.0);
    wv.fy = rng.uniform(0.5, 2.0);
    wv.phase = rng.uniform(0.0, 2.0 * kPi);
    wv.amp = st.background_texture_sigma * rng.uniform(0.5, 1.0);
  }
  Tensor img({1, S, S});
  for (int r = 0; r < S; ++r) {
    for (int c = 0; c < S; ++c) {
      const int i = r * S + c;
      double bg = base;
      for (const Wave& wv : waves)
        bg += wv.amp * std::cos(2.0 * kPi * (wv.fx * c + wv.fy * r) / S + wv.phase);
      if (tree.mask[i] > 0.5) {
        const double contrast = vessel_contrast * (1.0 - st.vessel_contrast_decay * tree.depth[i]);
        img[i] = bg - contrast;
      } else {
        img[i] = bg;
      }
    }
  }
  if (st.noise_sigma > 0.0)
    for (int i = 0; i < img.numel(); ++i) img[i] += st.noise_sigma * rng.normal();
  for (int i = 0; i < img.numel(); ++i) img[i] = std::min(1.0, std::max(0.0, img[i]));
  return img;
}

}  // namespace cada
