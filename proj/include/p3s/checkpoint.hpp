#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "p3s/latent_model.hpp"

namespace p3s {

// Binary layout, all little-endian:
//   "P3SMODEL" | version u32 | n u32 | m u32 | K u32 |
//   user factors (n*K f64, row-major) | item factors (m*K f64) | biases (m f64)
inline constexpr char kCheckpointMagic[8] = {'P', '3', 'S', 'M',
                                             'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderSize = 8 + 4 * 4;

std::string encode_checkpoint(const ModelParams& params);
// Throws kFormat on a bad magic, kVersion on an unknown version and kLength
// when the byte count disagrees with the header.
ModelParams decode_checkpoint(const std::string& bytes);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace p3s
