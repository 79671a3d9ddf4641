#pragma once

#include <filesystem>

#include "ingram/model.hpp"

namespace ingram {

// Binary checkpoint layout, little-endian throughout:
//   bytes 0..7   magic "INGRAM01"
//   u32 pair count, then per pair: u32 key length, key bytes,
//     u32 value length, value bytes (hyperparameters as decimal strings,
//     doubles printed with round-trip precision)
//   per tensor, in ModelParameters::for_each_parameter order:
//     u32 rows, u32 cols, rows*cols f64 payload (row-major)
//   u32 CRC-32 of all preceding bytes
// load(save(p)) reproduces p bit for bit.
void save_checkpoint(const ModelParameters& params, const std::filesystem::path& path);
ModelParameters load_checkpoint(const std::filesystem::path& path);

uint32_t crc32(const void* data, size_t len, uint32_t seed = 0);

}  // namespace ingram
