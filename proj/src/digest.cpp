#include "wecmatch/digest.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "wecmatch/rng.hpp"

namespace wecmatch {

uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for checksum: " + path);
  uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    h = fnv1a64(std::string_view(buf, static_cast<size_t>(in.gcount())), h);
  }
  return h;
}

std::string hex64(uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return std::string(buf);
}

}  // namespace wecmatch
