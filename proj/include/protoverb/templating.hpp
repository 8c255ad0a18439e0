#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "protoverb/verbalizer.hpp"

namespace protoverb {

// A cloze pattern with exactly one [MASK] and one [SENTENCE] slot, e.g.
// "[Category: [MASK]] [SENTENCE]".
class Template {
 public:
  explicit Template(std::string pattern);

  const std::string& pattern() const { return pattern_; }

 private:
  std::string pattern_;
};

// One pattern per line; blank lines and lines starting with '#' are skipped.
std::vector<Template> load_templates(const std::filesystem::path& path);

// Substitutes the [SENTENCE] slot. Sentences that are empty or contain a
// literal [MASK] are rejected.
std::string fill_template(const Template& t, std::string_view sentence);

// "<sentence> In this sentence, <word> means [MASK]." The word must occur in
// the sentence as a whole token (case-insensitive).
std::string fill_pretrain_template(std::string_view sentence, std::string_view word);

struct KeywordSentence {
  std::string sentence;
  std::string word;  // the label word that matched
};

struct PretrainSampleSpec {
  int per_label = 30;
  std::filesystem::path corpus;

  void validate() const;
};

struct KeywordSample {
  std::vector<std::vector<KeywordSentence>> per_label;
  std::vector<std::string> warnings;  // labels that had fewer than Q hits
};

// For each label, up to `per_label` distinct sentences containing any of its
// words, drawn uniformly without replacement. Documents are split into
// sentences first. A label with no hit at all is a configuration error.
KeywordSample sample_keyword_sentences(const std::vector<std::string>& documents, const LabelSpace& labels,
                                       int per_label, std::uint64_t seed);
KeywordSample sample_keyword_sentences(const PretrainSampleSpec& spec, const LabelSpace& labels, std::uint64_t seed);

}  // namespace protoverb
