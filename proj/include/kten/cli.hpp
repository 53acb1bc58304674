#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace kten {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr std::uint64_t kDefaultSeed = 20240607;

// Runs one subcommand. args excludes the program name.
// Exit codes: 0 success, 1 validation error, 2 numerical failure.
int dispatch(const std::vector<std::string>& args);

// 64-bit FNV-1a of a file's bytes as 16 hex digits.
std::string fnv1a_file(const std::string& path);

}  // namespace kten
