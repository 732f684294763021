#pragma once
// Content hashing for provenance headers and determinism audits.

#include <cstdint>
#include <string>

namespace coreflow {

/// FNV-1a 64-bit over a byte string.
inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Hash rendered as 16 hex digits (the form embedded in file headers).
std::string hash_hex(const std::string& bytes);

/// FNV-1a of a whole file's contents; throws on I/O failure.
std::string file_hash_hex(const std::string& path);

/// Read a whole file into a string; throws on failure.
std::string slurp_file(const std::string& path);

}  // namespace coreflow
