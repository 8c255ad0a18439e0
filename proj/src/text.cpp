#include "protoverb/text.hpp"

#include <algorithm>
#include <cctype>

namespace protoverb::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string> tokens(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    std::string_view piece = s.substr(i, j - i);
    while (!piece.empty() && is_punct(piece.front())) piece.remove_prefix(1);
    while (!piece.empty() && is_punct(piece.back())) piece.remove_suffix(1);
    if (!piece.empty()) out.push_back(lowercase(piece));
    i = j;
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view document) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < document.size(); ++i) {
    const char c = document[i];
    if ((c == '.' || c == '!' || c == '?') && (i + 1 == document.size() || is_space(document[i + 1]))) {
      const auto piece = trim(document.substr(start, i + 1 - start));
      if (!piece.empty()) out.emplace_back(piece);
      start = i + 1;
    }
  }
  const auto tail = trim(document.substr(std::min(start, document.size())));
  if (!tail.empty()) out.emplace_back(tail);
  return out;
}

bool contains_word(std::string_view sentence, std::string_view word) {
  const auto needle = tokens(word);
  if (needle.size() != 1) return false;
  const auto hay = tokens(sentence);
  return std::find(hay.begin(), hay.end(), needle.front()) != hay.end();
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return 0;
  std::size_t count = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

}  // namespace protoverb::text
