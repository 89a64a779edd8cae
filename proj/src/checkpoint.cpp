#include "p3s/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <limits>

#include <fmt/core.h>

#include "p3s/error.hpp"
#include "p3s/pipeline.hpp"

namespace p3s {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) {
    out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
}

std::uint64_t get_le(const std::string& in, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int b = 0; b < bytes; ++b) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + b]))
         << (8 * b);
  }
  return v;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kFormat, fmt::format("{} too large for checkpoint", what));
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string encode_checkpoint(const ModelParams& params) {
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, checked_u32(params.num_users(), "user count"));
  put_u32(out, checked_u32(params.num_items(), "item count"));
  put_u32(out, checked_u32(params.k(), "K"));
  out.reserve(kCheckpointHeaderSize +
              8 * (params.user_factors().size() + params.item_factors().size() +
                   params.item_bias().size()));
  for (double v : params.user_factors()) put_f64(out, v);
  for (double v : params.item_factors()) put_f64(out, v);
  for (double v : params.item_bias()) put_f64(out, v);
  return out;
}

ModelParams decode_checkpoint(const std::string& bytes) {
  // A short file that matches the magic so far counts as truncated.
  const std::size_t magic_len = std::min(bytes.size(), sizeof(kCheckpointMagic));
  if (std::memcmp(bytes.data(), kCheckpointMagic, magic_len) != 0) {
    throw Error(ErrorCode::kFormat, "not a model checkpoint (bad magic)");
  }
  if (bytes.size() < kCheckpointHeaderSize) {
    throw Error(ErrorCode::kLength, "checkpoint header truncated");
  }
  const auto version = static_cast<std::uint32_t>(get_le(bytes, 8, 4));
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kVersion,
                fmt::format("unsupported checkpoint version {}", version));
  }
  const std::uint64_t n = get_le(bytes, 12, 4);
  const std::uint64_t m = get_le(bytes, 16, 4);
  const std::uint64_t k = get_le(bytes, 20, 4);
  const std::uint64_t expected = kCheckpointHeaderSize + 8 * (n * k + m * k + m);
  if (bytes.size() != expected) {
    throw Error(ErrorCode::kLength,
                fmt::format("checkpoint has {} bytes, header implies {}",
                            bytes.size(), expected));
  }
  ModelParams params(n, m, k);
  std::size_t pos = kCheckpointHeaderSize;
  auto fill = [&](std::span<double> dst) {
    for (double& v : dst) {
      v = std::bit_cast<double>(get_le(bytes, pos, 8));
      pos += 8;
    }
  };
  fill(params.user_factors());
  fill(params.item_factors());
  fill(params.item_bias());
  return params;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  atomic_write(path, encode_checkpoint(params));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  try {
    return decode_checkpoint(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace p3s
