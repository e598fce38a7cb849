#include "cada/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cada/errors.hpp"
#include "cada/image_io.hpp"
#include "cada/preprocess.hpp"
#include "cada/rng.hpp"

namespace fs = std::filesystem;

namespace cada {

void SplitCounts::validate() const {
  for (const int n : {n_source_labeled, n_target_labeled, n_target_unlabeled, n_val, n_test})
    if (n < 0) throw std::invalid_argument("SplitCounts: counts must be >= 0");
}

void PreprocessConfig::validate() const {
  if (clahe_tiles < 1) throw std::invalid_argument("PreprocessConfig: clahe_tiles must be >= 1");
  if (clahe_clip <= 0.0) throw std::invalid_argument("PreprocessConfig: clahe_clip must be > 0");
  if (gamma <= 0.0) throw std::invalid_argument("PreprocessConfig: gamma must be > 0");
}

namespace {

struct SplitPlan {
  const char* name;
  const char* id_prefix;
  Domain domain;
  bool labeled;
  int count;
};

std::string sample_id(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04d", prefix, index);
  return buf;
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create directory " + p.string() + ": " + ec.message());
}

}  // namespace

void make_dataset(const SynthConfig& cfg, const PreprocessConfig& prep, const SplitCounts& counts,
                  const std::string& out_dir) {
  cfg.validate();
  prep.validate();
  counts.validate();
  if (prep.enabled && cfg.size % prep.clahe_tiles != 0)
    throw std::invalid_argument("make_dataset: clahe_tiles must divide the image size");

  const SplitPlan plans[] = {
      {kSplitSourceLabeled, "sl", Domain::Source, true, counts.n_source_labeled},
      {kSplitTargetLabeled, "tl", Domain::Target, true, counts.n_target_labeled},
      {kSplitTargetUnlabeled, "tu", Domain::Target, false, counts.n_target_unlabeled},
      {kSplitVal, "val", Domain::Target, true, counts.n_val},
      {kSplitTest, "test", Domain::Target, true, counts.n_test},
  };

  const fs::path root(out_dir);
  ensure_dir(root);
  std::ostringstream manifest;
  for (const SplitPlan& plan : plans) {
    ensure_dir(root / plan.name);
    for (int i = 0; i < plan.count; ++i) {
      const std::uint64_t seed =
          mix_seed(mix_seed(cfg.seed, std::string_view(plan.name)), static_cast<std::uint64_t>(i));
      const VesselTree tree = generate_vessel_tree(cfg, seed);
      Tensor img = plan.domain == Domain::Source
                       ? render_source(tree, cfg, mix_seed(seed, std::string_view("img")))
                       : render_target(tree, cfg, mix_seed(seed, std::string_view("img")));
      if (plan.domain == Domain::Source && prep.enabled)
        img = gamma_correct(clahe(img, prep.clahe_tiles, prep.clahe_clip), prep.gamma);

      const std::string id = sample_id(plan.id_prefix, i);
      const std::string img_rel = std::string(plan.name) + "/" + id + ".pgm";
      save_pgm((root / img_rel).string(), img);
      std::string mask_rel = "-";
      if (plan.labeled) {
        mask_rel = std::string(plan.name) + "/" + id + "_mask.pgm";
        save_pgm((root / mask_rel).string(), tree.mask);
      }
      manifest << id << '\t' << plan.name << '\t' << domain_name(plan.domain) << '\t' << img_rel
               << '\t' << mask_rel << '\n';
    }
  }
  std::ofstream mf(root / "manifest.tsv", std::ios::binary);
  if (!mf) throw DataError("cannot write manifest in " + out_dir);
  mf << manifest.str();
  mf.close();
  if (!mf) throw DataError("manifest write failed in " + out_dir);
}

std::vector<SampleRef> read_manifest(const std::string& root) {
  const fs::path path = fs::path(root) / "manifest.tsv";
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest: " + path.string());
  std::vector<SampleRef> refs;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    SampleRef ref;
    std::string domain;
    if (!std::getline(ls, ref.id, '\t') || !std::getline(ls, ref.split, '\t') ||
        !std::getline(ls, domain, '\t') || !std::getline(ls, ref.image_path, '\t') ||
        !std::getline(ls, ref.mask_path))
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": expected 5 tab-separated fields");
    try {
      ref.domain = parse_domain(domain);
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    refs.push_back(std::move(ref));
  }
  return refs;
}

std::vector<SampleRef> filter_split(const std::vector<SampleRef>& refs, const std::string& split) {
  std::vector<SampleRef> out;
  for (const SampleRef& r : refs)
    if (r.split == split) out.push_back(r);
  return out;
}

LoadedSample load_sample(const std::string& root, const SampleRef& ref) {
  LoadedSample s;
  s.id = ref.id;
  s.domain = ref.domain;
  s.labeled = ref.labeled();
  s.image = load_image((fs::path(root) / ref.image_path).string());
  if (s.labeled) {
    s.mask = load_image((fs::path(root) / ref.mask_path).string());
    for (int i = 0; i < s.mask.numel(); ++i) {
      if (s.mask[i] != 0.0 && s.mask[i] != 1.0)
        throw DataError(ref.mask_path + ": mask is not binary (pixel value " +
                        std::to_string(s.mask[i] * 255.0) + "/255)");
    }
  }
  return s;
}

std::vector<LoadedSample> load_split(const std::string& root, const std::string& split) {
  const std::vector<SampleRef> refs = filter_split(read_manifest(root), split);
  if (refs.empty()) throw DataError("split '" + split + "' is empty or unknown in " + root);
  std::vector<LoadedSample> out;
  out.reserve(refs.size());
  for (const SampleRef& r : refs) out.push_back(load_sample(root, r));
  return out;
}

namespace {

Tensor stack(const std::vector<LoadedSample>& samples, const std::vector<int>& idx, bool masks) {
  if (idx.empty()) throw std::invalid_argument("stack: empty index list");
  for (const int i : idx) {
    if (i < 0 || static_cast<std::size_t>(i) >= samples.size())
      throw std::invalid_argument("stack: index " + std::to_string(i) + " out of range for " +
                                  std::to_string(samples.size()) + " samples");
    if (masks && !samples[static_cast<std::size_t>(i)].labeled)
      throw std::invalid_argument("stack_masks: sample '" +
                                  samples[static_cast<std::size_t>(i)].id + "' is unlabeled");
  }
  const Tensor& first = masks ? samples[static_cast<std::size_t>(idx[0])].mask
                              : samples[static_cast<std::size_t>(idx[0])].image;
  const int h = first.dim(1), w = first.dim(2);
  Tensor out({static_cast<int>(idx.size()), 1, h, w});
  for (std::size_t n = 0; n < idx.size(); ++n) {
    const LoadedSample& s = samples[static_cast<std::size_t>(idx[n])];
    const Tensor& t = masks ? s.mask : s.image;
    if (t.dim(1) != h || t.dim(2) != w)
      throw std::invalid_argument("stack: sample '" + s.id + "' has mismatched size " +
                                  shape_str(t));
    std::copy_n(t.data(), static_cast<std::size_t>(h) * w,
                out.data() + n * static_cast<std::size_t>(h) * w);
  }
  return out;
}

}  // namespace

Tensor stack_images(const std::vector<LoadedSample>& samples, const std::vector<int>& idx) {
  return stack(samples, idx, false);
}

Tensor stack_masks(const std::vector<LoadedSample>& samples, const std::vector<int>& idx) {
  return stack(samples, idx, true);
}

}  // namespace cada
