#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace qrelex {

/// FNV-1a 64-bit hash. Used for seeding and config/template fingerprints;
/// stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull);

std::string to_hex(std::uint64_t v);

/// Deterministic RNG (splitmix64). All sampling in this codebase goes through
/// it so that a seed reproduces the same draw on any build of the tool.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next();

    /// Uniform integer in [0, bound), bound >= 1. Rejection sampling, no
    /// modulo bias.
    std::uint64_t bounded(std::uint64_t bound);

private:
    std::uint64_t state_;
};

/// Draw k distinct indices from [0, n), uniformly without replacement, in
/// draw order (partial Fisher-Yates).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, SplitMix64& rng);

std::string trim(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::string lowercase(std::string_view s);

/// "1234567" -> "1,234,567"
std::string format_count(std::uint64_t n);

/// Percent with exactly two decimals from an integer count ratio, half-up
/// rounding computed in integer arithmetic: 709/15028 -> "4.72".
std::string format_percent(std::uint64_t numerator, std::uint64_t denominator);

/// Hundredths of a percent, half-up: 709/15028 -> 472.
std::uint64_t percent_centi(std::uint64_t numerator, std::uint64_t denominator);

/// Render hundredths of a percent: 472 -> "4.72%".
std::string format_percent_centi(std::uint64_t centi);

std::string iso8601_now();

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Truncate to at most max_bytes without splitting a UTF-8 sequence.
std::string_view utf8_prefix(std::string_view s, std::size_t max_bytes);

std::string base64_encode(const unsigned char* data, std::size_t len);

}  // namespace qrelex
