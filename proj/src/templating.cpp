#include "protoverb/templating.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "protoverb/error.hpp"
#include "protoverb/io.hpp"
#include "protoverb/log.hpp"
#include "protoverb/text.hpp"

namespace protoverb {

Template::Template(std::string pattern) : pattern_(std::move(pattern)) {
  if (pattern_.empty()) fail(ErrorKind::Template, "empty template pattern");
  const auto masks = text::count_occurrences(pattern_, text::kMask);
  const auto slots = text::count_occurrences(pattern_, text::kSentence);
  if (masks != 1 || slots != 1) {
    fail(ErrorKind::Template, "template '" + pattern_ + "' needs exactly one [MASK] and one [SENTENCE], found " +
                                  std::to_string(masks) + " and " + std::to_string(slots));
  }
}

std::vector<Template> load_templates(const std::filesystem::path& path) {
  std::vector<Template> out;
  const auto lines = io::read_lines(path);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const auto line = text::trim(lines[n]);
    if (line.empty() || line.front() == '#') continue;
    try {
      out.emplace_back(std::string(line));
    } catch (const Error& e) {
      fail(e.kind(), path.string() + ":" + std::to_string(n + 1) + ": " + e.what());
    }
  }
  if (out.empty()) fail(ErrorKind::Template, path.string() + ": no templates");
  return out;
}

namespace {

void check_sentence(std::string_view sentence) {
  if (text::trim(sentence).empty()) fail(ErrorKind::Template, "empty sentence");
  if (sentence.find(text::kMask) != std::string_view::npos) {
    fail(ErrorKind::Template, "sentence contains a literal [MASK]");
  }
}

}  // namespace

std::string fill_template(const Template& t, std::string_view sentence) {
  check_sentence(sentence);
  std::string out = t.pattern();
  const auto pos = out.find(text::kSentence);
  out.replace(pos, text::kSentence.size(), sentence);
  return out;
}

std::string fill_pretrain_template(std::string_view sentence, std::string_view word) {
  check_sentence(sentence);
  if (!text::contains_word(sentence, word)) {
    fail(ErrorKind::Template, "word '" + std::string(word) + "' does not occur in sentence '" +
                                  std::string(sentence) + "'");
  }
  std::string out(sentence);
  out += " In this sentence, ";
  out += word;
  out += " means [MASK].";
  return out;
}

void PretrainSampleSpec::validate() const {
  if (per_label < 1) fail(ErrorKind::Config, "sentences per label must be at least 1");
}

KeywordSample sample_keyword_sentences(const std::vector<std::string>& documents, const LabelSpace& labels,
                                       int per_label, std::uint64_t seed) {
  if (per_label < 1) fail(ErrorKind::Config, "sentences per label must be at least 1");
  labels.validate(1, true);

  std::vector<std::string> sentences;
  {
    std::set<std::string> seen;
    for (const auto& doc : documents) {
      for (auto& s : text::split_sentences(doc)) {
        if (s.find(text::kMask) != std::string::npos) continue;
        if (seen.insert(s).second) sentences.push_back(std::move(s));
      }
    }
  }
  // Token lists once; matching is whole-token and case-insensitive.
  std::vector<std::vector<std::string>> sentence_tokens;
  sentence_tokens.reserve(sentences.size());
  for (const auto& s : sentences) {
    auto toks = text::tokens(s);
    std::sort(toks.begin(), toks.end());
    sentence_tokens.push_back(std::move(toks));
  }

  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 7u};
  std::mt19937_64 rng(seq);
  KeywordSample out;
  for (std::size_t y = 0; y < labels.size(); ++y) {
    std::vector<KeywordSentence> hits;
    for (std::size_t s = 0; s < sentences.size(); ++s) {
      for (const auto& word : labels.label_words[y]) {
        const auto key = text::tokens(word);
        if (key.size() == 1 && std::binary_search(sentence_tokens[s].begin(), sentence_tokens[s].end(), key.front())) {
          hits.push_back({sentences[s], word});
          break;
        }
      }
    }
    if (hits.empty()) {
      std::string words;
      for (const auto& w : labels.label_words[y]) words += (words.empty() ? "" : ", ") + w;
      fail(ErrorKind::Config, "no corpus sentence contains a label word of '" + labels.names[y] + "' (" + words + ")");
    }
    const auto want = static_cast<std::size_t>(per_label);
    if (hits.size() < want) {
      out.warnings.push_back("label '" + labels.names[y] + "' has only " + std::to_string(hits.size()) +
                             " matching sentences, wanted " + std::to_string(want));
      log::warn("{}", out.warnings.back());
    }
    const std::size_t take = std::min(want, hits.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, hits.size() - 1);
      std::swap(hits[i], hits[pick(rng)]);
    }
    hits.resize(take);
    out.per_label.push_back(std::move(hits));
  }
  return out;
}

KeywordSample sample_keyword_sentences(const PretrainSampleSpec& spec, const LabelSpace& labels, std::uint64_t seed) {
  spec.validate();
  return sample_keyword_sentences(io::read_lines(spec.corpus), labels, spec.per_label, seed);
}

}  // namespace protoverb
