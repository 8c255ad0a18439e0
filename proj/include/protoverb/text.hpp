#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace protoverb::text {

inline constexpr std::string_view kMask = "[MASK]";
inline constexpr std::string_view kSentence = "[SENTENCE]";

std::string lowercase(std::string_view s);
std::string_view trim(std::string_view s);

// Whitespace split, ASCII-lowercased, leading/trailing punctuation stripped.
// Pieces that are pure punctuation are dropped.
std::vector<std::string> tokens(std::string_view s);

// Split on '.', '!' or '?' followed by whitespace (or end of text); pieces are
// trimmed and empty ones dropped. The terminator stays with its sentence.
std::vector<std::string> split_sentences(std::string_view document);

// Whole-token, case-insensitive containment.
bool contains_word(std::string_view sentence, std::string_view word);

std::size_t count_occurrences(std::string_view haystack, std::string_view needle);

}  // namespace protoverb::text
