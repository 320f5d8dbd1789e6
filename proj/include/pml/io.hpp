#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pml {

/// Writes to a temporary file in the same directory, then renames over the target.
void atomic_write(const std::string& path, std::string_view content);
std::string read_file(const std::string& path);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 1469598103934665603ULL);
std::string hex64(std::uint64_t v);
std::uint64_t parse_hex64(const std::string& s);

/// Shortest decimal text that round-trips a double.
std::string format_double(double v);

}  // namespace pml
