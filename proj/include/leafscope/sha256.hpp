#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace leafscope {

// Lowercase hex SHA-256 digest of a byte buffer.
std::string sha256_hex(const void* data, std::size_t size);

// Digest of a file's contents. Throws std::runtime_error on read failure.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace leafscope
