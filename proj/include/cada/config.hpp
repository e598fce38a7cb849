#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cada/dataset.hpp"
#include "cada/losses.hpp"
#include "cada/mean_teacher.hpp"
#include "cada/synth.hpp"
#include "cada/train_config.hpp"
#include "cada/unet.hpp"

namespace cada {

// Every tunable of the system, parsed from flat "key = value" text with
// section prefixes (e.g. "train.lr0 = 0.001"). Unknown keys are rejected by
// name; every field has a default, so an empty file is a valid config.
struct FullConfig {
  NetworkConfig net;
  SynthConfig synth;
  SplitCounts counts;
  PreprocessConfig prep;
  LossConfig loss;
  PerturbConfig perturb;
  TrainerConfig train;

  void validate() const;
};

FullConfig default_config();

// Parses one "key = value" assignment (UsageError on unknown key/bad value).
void apply_config_line(FullConfig& cfg, const std::string& key, const std::string& value);

// '#' starts a comment; blank lines are skipped; everything else must be
// "key = value".
FullConfig parse_config_text(const std::string& text, const std::string& origin);
FullConfig load_config(const std::string& path);

// Every key with its current value, sorted by key.
std::vector<std::pair<std::string, std::string>> config_kv(const FullConfig& cfg);

// Sorted "key = value" lines; reparsing reproduces the config exactly.
std::string render_config(const FullConfig& cfg);
void write_resolved_config(const FullConfig& cfg, const std::string& path);

// FNV-1a over the sorted key=value lines: stable under key reordering in the
// source file.
std::uint64_t config_hash(const FullConfig& cfg);

}  // namespace cada
