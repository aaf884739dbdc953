#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace mpm {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view s);
std::uint64_t hash_file(const std::string& path);

/// splitmix64 finalizer over a running combination.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

std::string hex64(std::uint64_t v);

}  // namespace mpm
