#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cada/tensor.hpp"
#include "cada/unet.hpp"

namespace cada {

struct CheckpointEntry {
  std::string name;
  Tensor tensor;
};

// "CKPT v1 <count>\n" followed by <count> entries, each a name line and a
// TNSR blob. Entry order is preserved, so save/load round trips bit-exactly.
void write_checkpoint(std::ostream& os,
                      const std::vector<std::pair<std::string, const Tensor*>>& entries);
std::vector<CheckpointEntry> read_checkpoint(std::istream& is);

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const Tensor*>>& entries);
std::vector<CheckpointEntry> load_checkpoint(const std::string& path);

// Network snapshot: a "meta.net_config" entry ([depth, base, in, out]) plus
// the full named state, plus any extra entries (teacher shadows etc.).
void save_network(const std::string& path, const UNet& net,
                  const std::vector<std::pair<std::string, const Tensor*>>& extra = {});

// Rebuilds the network from the meta entry and restores every state tensor.
// Returns the entries that are not part of the network state (e.g.
// "teacher.*"), in file order.
std::vector<CheckpointEntry> load_network(const std::string& path, UNet& net);
UNet load_network(const std::string& path, std::vector<CheckpointEntry>* leftover = nullptr);

}  // namespace cada
