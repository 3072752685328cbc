#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace bertkit {

// Decodes UTF-8, throwing DecodeError with the byte offset of the first
// invalid sequence.
std::vector<uint32_t> decode_utf8(std::string_view text);

std::string encode_utf8(const std::vector<uint32_t>& codepoints);
std::string encode_utf8(uint32_t codepoint);

bool is_space(uint32_t cp);
bool is_control(uint32_t cp);

// Letter / uppercase cover ASCII plus the Latin-1..Latin Extended ranges,
// which is all the corpora here need.
bool is_letter(uint32_t cp);
bool is_upper(uint32_t cp);
bool is_digit(uint32_t cp);

uint32_t to_lower(uint32_t cp);
std::string lowercase(std::string_view text);

// Strips control characters, trims, and collapses internal whitespace runs
// to single spaces. Idempotent.
std::string normalize_text(std::string_view text);

std::vector<std::string> split_on_spaces(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace bertkit
