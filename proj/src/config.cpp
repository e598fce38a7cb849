#include "cada/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cada/errors.hpp"

namespace cada {

namespace {

struct Field {
  std::string key;
  enum Type { Int, Double, Bool, U64, RegimeName } type;
  void* ptr;
};

std::vector<Field> schema(FullConfig& c) {
  return {
      {"data.clahe_clip", Field::Double, &c.prep.clahe_clip},
      {"data.clahe_tiles", Field::Int, &c.prep.clahe_tiles},
      {"data.gamma", Field::Double, &c.prep.gamma},
      {"data.n_source_labeled", Field::Int, &c.counts.n_source_labeled},
      {"data.n_target_labeled", Field::Int, &c.counts.n_target_labeled},
      {"data.n_target_unlabeled", Field::Int, &c.counts.n_target_unlabeled},
      {"data.n_test", Field::Int, &c.counts.n_test},
      {"data.n_val", Field::Int, &c.counts.n_val},
      {"data.preprocess", Field::Bool, &c.prep.enabled},
      {"loss.ce_weight", Field::Double, &c.loss.ce_weight},
      {"loss.dice_smooth", Field::Double, &c.loss.dice_smooth},
      {"loss.dice_weight", Field::Double, &c.loss.dice_weight},
      {"loss.lambda_max", Field::Double, &c.loss.lambda_max},
      {"loss.t_max", Field::Int, &c.loss.t_max},
      {"net.base_channels", Field::Int, &c.net.base_channels},
      {"net.depth", Field::Int, &c.net.depth},
      {"net.in_channels", Field::Int, &c.net.in_channels},
      {"net.out_channels", Field::Int, &c.net.out_channels},
      {"perturb.flip_prob", Field::Double, &c.perturb.flip_prob},
      {"perturb.noise_sigma", Field::Double, &c.perturb.noise_sigma},
      {"synth.branch_prob", Field::Double, &c.synth.branch_prob},
      {"synth.n_trees_max", Field::Int, &c.synth.n_trees_max},
      {"synth.n_trees_min", Field::Int, &c.synth.n_trees_min},
      {"synth.radius_max", Field::Double, &c.synth.radius_max},
      {"synth.radius_min", Field::Double, &c.synth.radius_min},
      {"synth.seed", Field::U64, &c.synth.seed},
      {"synth.size", Field::Int, &c.synth.size},
      {"synth.source.background", Field::Double, &c.synth.source.background},
      {"synth.source.noise_sigma", Field::Double, &c.synth.source.noise_sigma},
      {"synth.source.vessel_intensity", Field::Double, &c.synth.source.vessel_intensity},
      {"synth.source.vignette_strength", Field::Double, &c.synth.source.vignette_strength},
      {"synth.target.background_texture_sigma", Field::Double,
       &c.synth.target.background_texture_sigma},
      {"synth.target.noise_sigma", Field::Double, &c.synth.target.noise_sigma},
      {"synth.target.vessel_contrast_decay", Field::Double,
       &c.synth.target.vessel_contrast_decay},
      {"train.batch_size", Field::Int, &c.train.batch_size},
      {"train.ema_decay", Field::Double, &c.train.ema_decay},
      {"train.epochs", Field::Int, &c.train.epochs},
      {"train.lr0", Field::Double, &c.train.lr0},
      {"train.lr_decay", Field::Double, &c.train.lr_decay},
      {"train.momentum", Field::Double, &c.train.momentum},
      {"train.n_source", Field::Int, &c.train.n_source},
      {"train.n_target", Field::Int, &c.train.n_target},
      {"train.n_unlabeled", Field::Int, &c.train.n_unlabeled},
      {"train.regime", Field::RegimeName, &c.train.regime},
      {"train.seed", Field::U64, &c.train.seed},
  };
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

void set_field(const Field& f, const std::string& value) {
  const char* begin = value.c_str();
  const char* end = begin + value.size();
  switch (f.type) {
    case Field::Int: {
      int v = 0;
      auto [p, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || p != end)
        throw UsageError("config key '" + f.key + "': invalid integer '" + value + "'");
      *static_cast<int*>(f.ptr) = v;
      break;
    }
    case Field::U64: {
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(begin, end, v);
      if (ec != std::errc() || p != end)
        throw UsageError("config key '" + f.key + "': invalid unsigned integer '" + value + "'");
      *static_cast<std::uint64_t*>(f.ptr) = v;
      break;
    }
    case Field::Double: {
      char* stop = nullptr;
      const double v = std::strtod(begin, &stop);
      if (stop != end || value.empty())
        throw UsageError("config key '" + f.key + "': invalid number '" + value + "'");
      *static_cast<double*>(f.ptr) = v;
      break;
    }
    case Field::Bool: {
      if (value == "true" || value == "1") {
        *static_cast<bool*>(f.ptr) = true;
      } else if (value == "false" || value == "0") {
        *static_cast<bool*>(f.ptr) = false;
      } else {
        throw UsageError("config key '" + f.key + "': expected true/false, got '" + value + "'");
      }
      break;
    }
    case Field::RegimeName:
      *static_cast<Regime*>(f.ptr) = parse_regime(value);
      break;
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

std::string get_field(const Field& f) {
  switch (f.type) {
    case Field::Int: return std::to_string(*static_cast<const int*>(f.ptr));
    case Field::U64: return std::to_string(*static_cast<const std::uint64_t*>(f.ptr));
    case Field::Double: return format_double(*static_cast<const double*>(f.ptr));
    case Field::Bool: return *static_cast<const bool*>(f.ptr) ? "true" : "false";
    case Field::RegimeName: return regime_name(*static_cast<const Regime*>(f.ptr));
  }
  return "";
}

}  // namespace

void FullConfig::validate() const {
  net.validate();
  synth.validate();
  counts.validate();
  prep.validate();
  loss.validate();
  perturb.validate();
  train.validate();
  if (synth.size % (1 << net.depth) != 0)
    throw std::invalid_argument("config: synth.size must be divisible by 2^net.depth");
}

FullConfig default_config() { return FullConfig{}; }

void apply_config_line(FullConfig& cfg, const std::string& key, const std::string& value) {
  for (const Field& f : schema(cfg)) {
    if (f.key == key) {
      set_field(f, value);
      return;
    }
  }
  throw UsageError("unknown config key '" + key + "'");
}

FullConfig parse_config_text(const std::string& text, const std::string& origin) {
  FullConfig cfg = default_config();
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(origin + ":" + std::to_string(lineno) +
                       ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw UsageError(origin + ":" + std::to_string(lineno) + ": missing key before '='");
    try {
      apply_config_line(cfg, key, value);
    } catch (const UsageError& e) {
      throw UsageError(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

FullConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::vector<std::pair<std::string, std::string>> config_kv(const FullConfig& cfg) {
  auto& mutable_cfg = const_cast<FullConfig&>(cfg);
  std::vector<std::pair<std::string, std::string>> kv;
  for (const Field& f : schema(mutable_cfg)) kv.emplace_back(f.key, get_field(f));
  std::sort(kv.begin(), kv.end());
  return kv;
}

std::string render_config(const FullConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_kv(cfg)) {
    out += k;
    out += " = ";
    out += v;
    out += "\n";
  }
  return out;
}

void write_resolved_config(const FullConfig& cfg, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write resolved config: " + path);
  os << render_config(cfg);
  os.close();
  if (!os) throw DataError("resolved config write failed: " + path);
}

std::uint64_t config_hash(const FullConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [k, v] : config_kv(cfg)) {
    for (const std::string* s : {&k, &v}) {
      for (const char c : *s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
      }
      h ^= '\n';
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

}  // namespace cada
