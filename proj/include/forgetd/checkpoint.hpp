#pragma once

#include "forgetd/nn.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace forgetd {

// Layer kinds and dims flattened to little-endian u32 fields; this descriptor
// is what the checkpoint header stores and what the ledger fingerprint hashes.
std::vector<std::uint8_t> arch_descriptor(const Architecture& arch);
Architecture parse_arch_descriptor(class ByteReader& r);

using Fingerprint = std::array<std::uint8_t, 32>;
Fingerprint arch_fingerprint(const Architecture& arch);

std::vector<std::uint8_t> serialize_checkpoint(const ModelParams& params);
ModelParams deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace forgetd
