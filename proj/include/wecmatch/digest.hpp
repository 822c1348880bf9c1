#ifndef WECMATCH_DIGEST_HPP_
#define WECMATCH_DIGEST_HPP_

#include <cstdint>
#include <string>

namespace wecmatch {

// FNV-1a over the file's bytes; used to stamp model files with their inputs.
uint64_t fnv1a64_file(const std::string& path);

std::string hex64(uint64_t value);

}  // namespace wecmatch

#endif  // WECMATCH_DIGEST_HPP_
