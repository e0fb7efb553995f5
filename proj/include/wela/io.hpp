#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace wela {

/// 64-bit FNV-1a over a byte range; used for dataset and checkpoint
/// content hashes.
std::uint64_t fnv1a64(const void* bytes, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hash_hex(std::uint64_t h);

/// Little-endian float32 binary blobs (independent of host endianness).
void write_f32_le(std::ostream& os, const float* values, std::size_t count);
std::vector<float> read_f32_le(std::istream& is, std::size_t count);

void write_file_bytes(const std::string& path, const std::string& bytes);
std::string read_file_bytes(const std::string& path);

/// 8-bit binary PGM (P5).
void write_pgm(const std::string& path, int width, int height,
               const std::vector<unsigned char>& gray);

}  // namespace wela
