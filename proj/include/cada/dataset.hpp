#pragma once

#include <string>
#include <vector>

#include "cada/synth.hpp"
#include "cada/tensor.hpp"
#include "cada/vsbn.hpp"

namespace cada {

// Split names used on disk and by the CLI.
inline constexpr const char* kSplitSourceLabeled = "source_labeled";
inline constexpr const char* kSplitTargetLabeled = "target_labeled";
inline constexpr const char* kSplitTargetUnlabeled = "target_unlabeled";
inline constexpr const char* kSplitVal = "val";
inline constexpr const char* kSplitTest = "test";

struct SplitCounts {
  int n_source_labeled = 200;
  int n_target_labeled = 10;
  int n_target_unlabeled = 100;
  int n_val = 20;
  int n_test = 40;

  void validate() const;
};

// SOURCE-image preprocessing applied during dataset generation (green-channel
// images are synthesized directly; CLAHE and gamma correction follow).
struct PreprocessConfig {
  bool enabled = true;
  int clahe_tiles = 8;
  double clahe_clip = 2.0;
  double gamma = 1.2;

  void validate() const;
};

struct SampleRef {
  std::string id;
  std::string split;
  Domain domain = Domain::Source;
  std::string image_path;  // relative to the dataset root
  std::string mask_path;   // "-" when unlabeled

  bool labeled() const { return mask_path != "-"; }
};

struct LoadedSample {
  std::string id;
  Domain domain = Domain::Source;
  bool labeled = false;
  Tensor image;  // [1,H,W]
  Tensor mask;   // [1,H,W], empty when unlabeled
};

// Generates every split under out_dir and writes manifest.tsv (one line per
// sample: id, split, domain, image path, mask path or "-"). Pure function of
// cfg.seed: regenerating is bit-identical.
void make_dataset(const SynthConfig& cfg, const PreprocessConfig& prep, const SplitCounts& counts,
                  const std::string& out_dir);

std::vector<SampleRef> read_manifest(const std::string& root);
std::vector<SampleRef> filter_split(const std::vector<SampleRef>& refs, const std::string& split);

LoadedSample load_sample(const std::string& root, const SampleRef& ref);
std::vector<LoadedSample> load_split(const std::string& root, const std::string& split);

// Stacks samples[idx] into a batch [N,1,H,W]; stack_masks requires every
// picked sample to be labeled.
Tensor stack_images(const std::vector<LoadedSample>& samples, const std::vector<int>& idx);
Tensor stack_masks(const std::vector<LoadedSample>& samples, const std::vector<int>& idx);

}  // namespace cada
