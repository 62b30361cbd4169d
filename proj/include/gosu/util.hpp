#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gosu {

// ============================================================================
// Hashing
// ============================================================================

// SHA-256 digest as lowercase hex. Self-contained FIPS 180-4 implementation.
std::string sha256_hex(std::string_view data);

// FNV-1a 64-bit. Cheap non-cryptographic hash for seeding and bucketing.
std::uint64_t fnv1a64(std::string_view data) noexcept;

// splitmix64 step: advances state, returns next value. Used wherever the
// artifact needs platform-independent pseudo-randomness.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

// ============================================================================
// Strings
// ============================================================================

std::string trim(std::string_view s);
std::string to_upper_ascii(std::string_view s);
std::string to_lower_ascii(std::string_view s);

// Splits on an exact delimiter; keeps empty segments.
std::vector<std::string> split(std::string_view s, std::string_view delim);

std::string join(std::span<const std::string> parts, std::string_view sep);

bool starts_with_icase(std::string_view s, std::string_view prefix) noexcept;

// Replaces every LF, CR, and tab with a space; used when multi-line text has
// to live inside a one-row-per-line, tab-separated rendering.
std::string one_line(std::string_view s);

// Zero-padded decimal rendering (width digits, more if the value needs them).
std::string zero_pad(long value, int width);

// ============================================================================
// Filesystem
// ============================================================================

std::string read_text_file(const std::filesystem::path& path);

// Creates parent directories, then writes the full contents.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

// ============================================================================
// Vectors
// ============================================================================

// In-place L2 normalization. Throws ZeroVectorError on zero magnitude.
void l2_normalize(std::vector<float>& v);

// ============================================================================
// Concurrency
// ============================================================================

// Runs fn(0..n-1) on up to `workers` threads. Rethrows the first exception
// after all workers join. workers < 1 is treated as 1; with one worker the
// calls happen inline in index order.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace gosu
