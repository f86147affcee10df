#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace provaudit {

// Lowercases ASCII, collapses whitespace runs to single spaces, trims ends.
std::string normalize_text(std::string_view text);

std::string to_lower_ascii(std::string_view text);
std::string trim(std::string_view text);

// 64-bit FNV-1a over the raw bytes.
std::uint64_t fnv1a64(std::string_view data);
std::string fnv1a64_hex(std::string_view data);

// Lowercased alphanumeric runs; everything else is a separator.
std::vector<std::string> tokenize(std::string_view text);

// Sentence boundaries: '.', '!' or '?' followed by whitespace, or a newline.
// Whitespace-only sentences are dropped.
std::vector<std::string> split_sentences(std::string_view text);

}  // namespace provaudit
