#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace linefix {

// Removes every whitespace character. This is the normalization used for
// all "same line modulo whitespace" comparisons across the project.
std::string normalize_whitespace(std::string_view s);

// Splits on '\n'. A trailing newline does not produce an empty last element.
// Carriage returns before a newline are stripped.
std::vector<std::string> split_lines(std::string_view text);

std::string join_lines(const std::vector<std::string>& lines);

bool starts_with(std::string_view s, std::string_view prefix);

// FNV-1a over bytes; stable across platforms, used for content keys.
std::uint64_t fnv1a64(std::string_view data);

std::string to_hex(std::uint64_t value);

// CRC-32 (IEEE 802.3, reflected 0xEDB88320), as used by zip/zlib.
std::uint32_t crc32(const void* data, std::size_t len, std::uint32_t seed = 0);

}  // namespace linefix
