#pragma once

#include <cstdint>

#include "cada/tensor.hpp"

namespace cada {

// Appearance knobs for the two synthetic domains. SOURCE imitates fundus
// photographs (crisp dark vessels, bright vignetted background); TARGET
// imitates angiograms (vessel contrast fading toward terminal branches over
// semi-transparent low-frequency structures).
struct SourceStyle {
  double vessel_intensity = 0.30;
  double background = 0.85;
  double vignette_strength = 0.25;
  double noise_sigma = 0.02;
};

struct TargetStyle {
  double vessel_contrast_decay = 0.60;  // contrast fraction lost at max branch depth
  double background_texture_sigma = 0.08;
  double noise_sigma = 0.03;
};

struct SynthConfig {
  int size = 64;
  int n_trees_min = 1;
  int n_trees_max = 2;
  double branch_prob = 0.35;
  double radius_min = 1.0;
  double radius_max = 2.2;
  SourceStyle source;
  TargetStyle target;
  std::uint64_t seed = 1234;  // master seed for dataset generation

  void validate() const;
};

// A rasterized vessel tree: binary mask plus per-pixel normalized branch
// depth (0 at the root trunk, 1 on the deepest terminal branches; 0 on
// background). Extra trees are rooted on existing foreground, so the whole
// mask stays 8-connected to the first root.
struct VesselTree {
  Tensor mask;   // [1,S,S], {0,1}
  Tensor depth;  // [1,S,S], [0,1]
  int root_r = 0;
  int root_c = 0;
};

VesselTree generate_vessel_tree(const SynthConfig& cfg, std::uint64_t seed);

Tensor render_source(const VesselTree& tree, const SynthConfig& cfg, std::uint64_t seed);
Tensor render_target(const VesselTree& tree, const SynthConfig& cfg, std::uint64_t seed);

}  // namespace cada
