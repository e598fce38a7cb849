#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "cada/dataset.hpp"
#include "cada/errors.hpp"
#include "doctest.h"
#include "helpers.hpp"

using cada::Domain;
using cada::PreprocessConfig;
using cada::SplitCounts;
using cada::SynthConfig;
using cada::Tensor;
namespace fs = std::filesystem;

namespace {

SynthConfig tiny_cfg(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.size = 32;
  cfg.seed = seed;
  return cfg;
}

SplitCounts tiny_counts() {
  SplitCounts c;
  c.n_source_labeled = 4;
  c.n_target_labeled = 3;
  c.n_target_unlabeled = 3;
  c.n_val = 2;
  c.n_test = 2;
  return c;
}

std::map<std::string, std::string> dir_digest(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    out[fs::relative(e.path(), root).string()] = testutil::read_file(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("make_dataset writes every split and a consistent manifest") {
  testutil::TempDir tmp("ds");
  PreprocessConfig prep;
  prep.clahe_tiles = 8;  // divides 32
  cada::make_dataset(tiny_cfg(42), prep, tiny_counts(), tmp.path().string());

  auto refs = cada::read_manifest(tmp.path().string());
  CHECK(refs.size() == 4 + 3 + 3 + 2 + 2);

  std::map<std::string, int> per_split;
  std::set<std::string> ids;
  for (const auto& r : refs) {
    ++per_split[r.split];
    CHECK(ids.insert(r.id).second);  // ids unique across ALL splits
    CHECK(fs::exists(tmp.path() / r.image_path));
    if (r.labeled())
      CHECK(fs::exists(tmp.path() / r.mask_path));
    else
      CHECK(r.mask_path == "-");
    const bool is_source = r.split == cada::kSplitSourceLabeled;
    CHECK(r.domain == (is_source ? Domain::Source : Domain::Target));
  }
  CHECK(per_split[cada::kSplitSourceLabeled] == 4);
  CHECK(per_split[cada::kSplitTargetLabeled] == 3);
  CHECK(per_split[cada::kSplitTargetUnlabeled] == 3);
  CHECK(per_split[cada::kSplitVal] == 2);
  CHECK(per_split[cada::kSplitTest] == 2);

  // only the unlabeled split lacks masks
  for (const auto& r : refs)
    CHECK(r.labeled() == (r.split != cada::kSplitTargetUnlabeled));
}

TEST_CASE("make_dataset is bit-reproducible") {
  testutil::TempDir a("ds_a"), b("ds_b");
  PreprocessConfig prep;
  cada::make_dataset(tiny_cfg(7), prep, tiny_counts(), a.path().string());
  cada::make_dataset(tiny_cfg(7), prep, tiny_counts(), b.path().string());
  CHECK(dir_digest(a.path()) == dir_digest(b.path()));

  testutil::TempDir c("ds_c");
  cada::make_dataset(tiny_cfg(8), prep, tiny_counts(), c.path().string());
  CHECK_FALSE(dir_digest(a.path()) == dir_digest(c.path()));
}

TEST_CASE("load_split returns normalized samples") {
  testutil::TempDir tmp("ds_load");
  PreprocessConfig prep;
  cada::make_dataset(tiny_cfg(21), prep, tiny_counts(), tmp.path().string());

  auto tl = cada::load_split(tmp.path().string(), cada::kSplitTargetLabeled);
  REQUIRE(tl.size() == 3);
  for (const auto& s : tl) {
    CHECK(s.domain == Domain::Target);
    CHECK(s.labeled);
    REQUIRE(s.image.shape() == std::vector<int>{1, 32, 32});
    REQUIRE(s.mask.shape() == std::vector<int>{1, 32, 32});
    CHECK(s.image.min() >= 0.0);
    CHECK(s.image.max() <= 1.0);
    for (int i = 0; i < s.mask.numel(); ++i)
      CHECK((s.mask[i] == 0.0 || s.mask[i] == 1.0));
  }

  auto tu = cada::load_split(tmp.path().string(), cada::kSplitTargetUnlabeled);
  REQUIRE(tu.size() == 3);
  for (const auto& s : tu) {
    CHECK_FALSE(s.labeled);
    CHECK(s.mask.numel() == 0);
  }

  CHECK_THROWS_AS(cada::load_split(tmp.path().string(), "no_such_split"), cada::DataError);
  CHECK_THROWS_AS(cada::read_manifest((tmp / "missing").string()), cada::DataError);
}

TEST_CASE("splits are disjoint by construction") {
  testutil::TempDir tmp("ds_disjoint");
  PreprocessConfig prep;
  cada::make_dataset(tiny_cfg(33), prep, tiny_counts(), tmp.path().string());
  auto refs = cada::read_manifest(tmp.path().string());

  // no two samples in different splits may share a tree: ids embed the
  // split, so compare the rendered image bytes instead
  std::set<std::string> images;
  for (const auto& r : refs) {
    CHECK(images.insert(testutil::read_file(tmp.path() / r.image_path)).second);
  }
}

TEST_CASE("filter_split preserves manifest order") {
  testutil::TempDir tmp("ds_filter");
  PreprocessConfig prep;
  cada::make_dataset(tiny_cfg(11), prep, tiny_counts(), tmp.path().string());
  auto refs = cada::read_manifest(tmp.path().string());
  auto val = cada::filter_split(refs, cada::kSplitVal);
  REQUIRE(val.size() == 2);
  CHECK(val[0].split == cada::kSplitVal);

  std::vector<std::string> order_all, order_filtered;
  for (const auto& r : refs)
    if (r.split == cada::kSplitVal) order_all.push_back(r.id);
  for (const auto& r : val) order_filtered.push_back(r.id);
  CHECK(order_all == order_filtered);
}

TEST_CASE("stacking builds batches and enforces labels") {
  testutil::TempDir tmp("ds_stack");
  PreprocessConfig prep;
  cada::make_dataset(tiny_cfg(55), prep, tiny_counts(), tmp.path().string());
  auto tl = cada::load_split(tmp.path().string(), cada::kSplitTargetLabeled);
  auto tu = cada::load_split(tmp.path().string(), cada::kSplitTargetUnlabeled);

  Tensor xb = cada::stack_images(tl, {0, 2, 1});
  REQUIRE(xb.shape() == std::vector<int>{3, 1, 32, 32});
  for (int i = 0; i < 32 * 32; ++i) CHECK(xb[i] == tl[0].image[i]);
  for (int i = 0; i < 32 * 32; ++i) CHECK(xb[32 * 32 + i] == tl[2].image[i]);

  Tensor yb = cada::stack_masks(tl, {1});
  REQUIRE(yb.shape() == std::vector<int>{1, 1, 32, 32});

  CHECK_THROWS_AS(cada::stack_masks(tu, {0}), std::invalid_argument);
  CHECK_THROWS_AS(cada::stack_images(tl, {}), std::invalid_argument);
  CHECK_THROWS_AS(cada::stack_images(tl, {5}), std::invalid_argument);
}

TEST_CASE("manifest.tsv is tab-separated with mask dash for unlabeled") {
  testutil::TempDir tmp("ds_tsv");
  PreprocessConfig prep;
  cada::make_dataset(tiny_cfg(66), prep, tiny_counts(), tmp.path().string());
  const std::string text = testutil::read_file(tmp.path() / "manifest.tsv");
  auto lines = testutil::split_lines(text);
  REQUIRE(lines.size() == 14);
  bool saw_dash = false;
  for (const auto& line : lines) {
    const auto tabs = std::count(line.begin(), line.end(), '\t');
    CHECK(tabs == 4);
    if (line.find("\t-") != std::string::npos) saw_dash = true;
  }
  CHECK(saw_dash);
}

TEST_CASE("corrupt manifest lines are rejected with line numbers") {
  testutil::TempDir tmp("ds_corrupt");
  PreprocessConfig prep;
  cada::make_dataset(tiny_cfg(77), prep, tiny_counts(), tmp.path().string());
  const fs::path mf = tmp.path() / "manifest.tsv";
  std::string text = testutil::read_file(mf);
  testutil::write_file(mf, text + "broken line without tabs\n");
  try {
    cada::read_manifest(tmp.path().string());
    FAIL("expected throw");
  } catch (const cada::DataError& e) {
    CHECK(std::string(e.what()).find("15") != std::string::npos);
  }
}

TEST_CASE("split counts validation") {
  SplitCounts bad;
  bad.n_val = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  SplitCounts{}.validate();

  PreprocessConfig pbad;
  pbad.clahe_tiles = 0;
  CHECK_THROWS_AS(pbad.validate(), std::invalid_argument);
  PreprocessConfig{}.validate();
}
