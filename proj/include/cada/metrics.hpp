#pragma once

#include <string>
#include <vector>

#include "cada/dataset.hpp"
#include "cada/tensor.hpp"
#include "cada/unet.hpp"

namespace cada {

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;
  long tn = 0;
};

struct MetricTriple {
  double recall = 0.0;
  double precision = 0.0;
  double dice = 0.0;
};

// Pixelwise counts; both masks must be strictly binary.
ConfusionCounts confusion(const Tensor& pred, const Tensor& gt);

// recall = tp/(tp+fn), precision = tp/(tp+fp), dice = 2tp/(2tp+fp+fn);
// every 0/0 is defined as 1 (empty prediction on empty ground truth).
MetricTriple metrics(const ConfusionCounts& c);

Tensor binarize(const Tensor& prob, double threshold = 0.5);

// Fig.-3-style overlay: TP green, FN red, FP orange (255,165,0), TN the
// grayscale base image. Returns [3,H,W] in [0,1].
Tensor render_overlay(const Tensor& pred, const Tensor& gt, const Tensor& base);

struct SplitReport {
  std::vector<std::string> ids;
  std::vector<MetricTriple> per_image;
  MetricTriple mean;
  MetricTriple stddev;  // population std
};

// EVAL-mode evaluation of a labeled split. Writes a CSV
// ("id,recall,precision,dice" + one aggregate row "MEAN±STD") when csv_path
// is non-empty and "<id>_overlay.ppm" files when overlay_dir is non-empty.
SplitReport evaluate_split(const UNet& net, const std::vector<LoadedSample>& split, Domain domain,
                           const std::string& csv_path = "", const std::string& overlay_dir = "");

}  // namespace cada
