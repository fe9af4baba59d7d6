#include "mwsl/fingerprint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mwsl {

std::string fingerprint_hex(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t fingerprint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for fingerprinting: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return fnv1a64(buf.str());
}

}  // namespace mwsl
