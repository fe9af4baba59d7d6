#pragma once

#include <cstdint>
#include <string>

namespace mwsl {

// 64-bit FNV-1a over raw bytes. Used to fingerprint canonical network files
// so checkpoints refuse to run against a different network.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string fingerprint_hex(std::uint64_t h);
std::uint64_t fingerprint_file(const std::string& path);

}  // namespace mwsl
