#include "cada/checkpoint.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "cada/errors.hpp"

namespace cada {

namespace {

constexpr const char* kMetaName = "meta.net_config";

Tensor net_config_tensor(const NetworkConfig& cfg) {
  return Tensor::from_values({4}, {static_cast<double>(cfg.depth),
                                   static_cast<double>(cfg.base_channels),
                                   static_cast<double>(cfg.in_channels),
                                   static_cast<double>(cfg.out_channels)});
}

NetworkConfig parse_net_config(const Tensor& t, const std::string& path) {
  if (t.numel() != 4)
    throw DataError(path + ": meta.net_config must have 4 entries, got " + shape_str(t));
  NetworkConfig cfg;
  cfg.depth = static_cast<int>(t[0]);
  cfg.base_channels = static_cast<int>(t[1]);
  cfg.in_channels = static_cast<int>(t[2]);
  cfg.out_channels = static_cast<int>(t[3]);
  cfg.validate();
  return cfg;
}

}  // namespace

void write_checkpoint(std::ostream& os,
                      const std::vector<std::pair<std::string, const Tensor*>>& entries) {
  std::set<std::string> seen;
  for (const auto& [name, t] : entries) {
    if (name.empty() || name.find('\n') != std::string::npos ||
        name.find('\r') != std::string::npos)
      throw std::invalid_argument("checkpoint: invalid entry name '" + name + "'");
    if (!seen.insert(name).second)
      throw std::invalid_argument("checkpoint: duplicate entry name '" + name + "'");
    (void)t;
  }
  os << "CKPT v1 " << entries.size() << "\n";
  for (const auto& [name, t] : entries) {
    os << name << "\n";
    write_tensor(os, *t);
  }
  if (!os) throw DataError("checkpoint: write failed");
}

std::vector<CheckpointEntry> read_checkpoint(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw DataError("checkpoint: missing header line");
  std::istringstream hs(header);
  std::string magic, version;
  std::size_t count = 0;
  hs >> magic >> version >> count;
  if (!hs || magic != "CKPT" || version != "v1")
    throw DataError("checkpoint: bad header '" + header + "' (expected 'CKPT v1 <count>')");
  std::vector<CheckpointEntry> entries;
  entries.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    if (!std::getline(is, name))
      throw DataError("checkpoint: unexpected end of file before entry " + std::to_string(i) +
                      " of " + std::to_string(count));
    try {
      entries.push_back({name, read_tensor(is)});
    } catch (const std::exception& e) {
      throw DataError("checkpoint entry '" + name + "': " + e.what());
    }
  }
  return entries;
}

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& entries) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open for writing: " + path);
  write_checkpoint(os, entries);
  os.close();
  if (!os) throw DataError("write failed: " + path);
}

std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint: " + path);
  try {
    return read_checkpoint(is);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

void save_network(const std::string& path, const UNet& net,
                  const std::vector<std::pair<std::string, const Tensor*>>& extra) {
  const Tensor meta = net_config_tensor(net.config());
  std::vector<std::pair<std::string, const Tensor*>> entries;
  entries.emplace_back(kMetaName, &meta);
  for (const auto& [name, t] : net.named_state()) entries.emplace_back(name, t);
  for (const auto& [name, t] : extra) entries.emplace_back(name, t);
  save_checkpoint(path, entries);
}

namespace {

std::vector<CheckpointEntry> restore_into(std::vector<CheckpointEntry> entries, UNet& net,
                                          const std::string& path) {
  std::unordered_map<std::string, Tensor*> state;
  for (auto& [name, t] : net.named_state()) state.emplace(name, t);
  std::vector<CheckpointEntry> leftover;
  std::set<std::string> restored;
  for (auto& e : entries) {
    if (e.name == kMetaName) {
      const NetworkConfig cfg = parse_net_config(e.tensor, path);
      const NetworkConfig& mine = net.config();
      if (cfg.depth != mine.depth || cfg.base_channels != mine.base_channels ||
          cfg.in_channels != mine.in_channels || cfg.out_channels != mine.out_channels)
        throw DataError(path + ": checkpoint network config does not match target network");
      continue;
    }
    auto it = state.find(e.name);
    if (it == state.end()) {
      leftover.push_back(std::move(e));
      continue;
    }
    if (!it->second->same_shape(e.tensor))
      throw DataError(path + ": entry '" + e.name + "' has shape " + shape_str(e.tensor) +
                      ", network expects " + shape_str(*it->second));
    *it->second = std::move(e.tensor);
    restored.insert(e.name);
  }
  for (const auto& [name, t] : state) {
    (void)t;
    if (!restored.count(name))
      throw DataError(path + ": checkpoint is missing network entry '" + name + "'");
  }
  return leftover;
}

}  // namespace

std::vector<CheckpointEntry> load_network(const std::string& path, UNet& net) {
  return restore_into(load_checkpoint(path), net, path);
}

UNet load_network(const std::string& path, std::vector<CheckpointEntry>* leftover) {
  std::vector<CheckpointEntry> entries = load_checkpoint(path);
  const CheckpointEntry* meta = nullptr;
  for (const auto& e : entries)
    if (e.name == kMetaName) meta = &e;
  if (!meta) throw DataError(path + ": checkpoint has no meta.net_config entry");
  UNet net(parse_net_config(meta->tensor, path), 0);
  std::vector<CheckpointEntry> rest = restore_into(std::move(entries), net, path);
  if (leftover) *leftover = std::move(rest);
  return net;
}

}  // namespace cada
