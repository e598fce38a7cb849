#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cada/dataset.hpp"
#include "cada/unet.hpp"

namespace cada {

enum class DepthClass { Shallow, Intermediate, Deep };

// "shallow" / "intermediate" / "deep"; also the <layer> token in the output
// file names.
const char* depth_class_name(DepthClass c);

struct BnStatRecord {
  std::string layer_id;
  DepthClass depth_class = DepthClass::Shallow;
  Domain domain = Domain::Source;
  std::vector<double> vector;  // [mu_0..mu_{C-1}, sigma_0..sigma_{C-1}]
};

// TRAIN-mode forwards of n_batches batches per domain through a disposable
// copy of the network, recording the pre-affine batch mean and std at the
// first-encoder (shallow), bottleneck (intermediate) and last-decoder (deep)
// VSBN layers. Both domains share the batch-index stream, so identical data
// and parameters yield identical record vectors.
std::vector<BnStatRecord> collect_bn_stats(const UNet& net,
                                           const std::vector<LoadedSample>& source_split,
                                           const std::vector<LoadedSample>& target_split,
                                           int n_batches, int batch_size, std::uint64_t seed);

// Mean-centered projection onto the top-2 principal components (exact Jacobi
// eigen-decomposition of the covariance). Component sign is fixed by making
// the largest-magnitude loading positive; zero-variance data maps to all-zero
// points.
std::vector<std::array<double, 2>> pca_embed_2d(const std::vector<std::vector<double>>& vectors);

// Mean silhouette coefficient with Euclidean distance. Requires at least two
// distinct labels and at least two points per present label.
double silhouette_separability(const std::vector<std::array<double, 2>>& points,
                               const std::vector<int>& labels);

// Mean silhouette over n_perms seeded random permutations of the labels; the
// no-structure baseline the real score is compared against.
double permuted_silhouette(const std::vector<std::array<double, 2>>& points,
                           const std::vector<int>& labels, int n_perms, std::uint64_t seed);

struct BnLayerReport {
  DepthClass depth_class = DepthClass::Shallow;
  std::string layer_id;
  double silhouette = 0.0;
  double permuted = 0.0;
};

// Full analysis: collects statistics, writes "bnstats_<layer>.csv" and
// "bnstats_<layer>_embed.csv" per depth class into out_dir, and scores each
// layer against a 10-permutation control.
std::vector<BnLayerReport> analyze_bn(const UNet& net,
                                      const std::vector<LoadedSample>& source_split,
                                      const std::vector<LoadedSample>& target_split,
                                      const std::string& out_dir, int n_batches, int batch_size,
                                      std::uint64_t seed);

}  // namespace cada
