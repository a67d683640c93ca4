#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace floodtile {

// SHA-256 hex digest; manifests use it to pin file contents.
std::string sha256_hex(std::span<const uint8_t> data);
std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::string& path);

}  // namespace floodtile
