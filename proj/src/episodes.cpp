#include "protoverb/episodes.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "protoverb/error.hpp"
#include "protoverb/io.hpp"
#include "protoverb/text.hpp"

namespace protoverb {

std::vector<int> TextDataset::labels() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.label);
  return out;
}

namespace {

int parse_int(std::string_view s, std::string_view what) {
  s = text::trim(s);
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail(ErrorKind::Parse, std::string(what) + ": '" + std::string(s) + "' is not an integer");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

}  // namespace

DatasetSchema DatasetSchema::parse(std::string_view spec) {
  DatasetSchema schema;
  for (auto part : split(spec, ';')) {
    part = text::trim(part);
    if (part.empty()) continue;
    const auto eq = part.find('=');
    if (eq == std::string_view::npos) fail(ErrorKind::Usage, "schema entry '" + std::string(part) + "' lacks '='");
    const auto key = text::trim(part.substr(0, eq));
    const auto value = text::trim(part.substr(eq + 1));
    if (key == "label") {
      schema.label_column = parse_int(value, "schema label column");
    } else if (key == "text") {
      schema.text_columns.clear();
      for (auto c : split(value, ',')) schema.text_columns.push_back(parse_int(c, "schema text column"));
    } else if (key == "one_based") {
      if (value == "true" || value == "1") {
        schema.one_based = true;
      } else if (value == "false" || value == "0") {
        schema.one_based = false;
      } else {
        fail(ErrorKind::Usage, "schema one_based must be true or false");
      }
    } else {
      fail(ErrorKind::Usage, "unknown schema key '" + std::string(key) + "'");
    }
  }
  if (schema.label_column < 0 || schema.text_columns.empty()) fail(ErrorKind::Usage, "schema needs label and text columns");
  for (int c : schema.text_columns) {
    if (c < 0) fail(ErrorKind::Usage, "schema columns must be non-negative");
  }
  return schema;
}

std::string DatasetSchema::to_string() const {
  std::string out = "label=" + std::to_string(label_column) + ";text=";
  for (std::size_t i = 0; i < text_columns.size(); ++i) {
    out += (i > 0 ? "," : "") + std::to_string(text_columns[i]);
  }
  out += one_based ? ";one_based=true" : ";one_based=false";
  return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view content) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t row_no = 1;

  const auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  const auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row.front().empty())) rows.push_back(std::move(row));
    row.clear();
    ++row_no;
  };

  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
      end_row();
    } else if (c == '"') {
      fail(ErrorKind::Parse, "row " + std::to_string(row_no) + ": stray quote inside an unquoted field");
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) fail(ErrorKind::Parse, "row " + std::to_string(row_no) + ": unterminated quoted field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

TextDataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema, std::size_t num_classes,
                         Split split_kind) {
  if (num_classes < 1) fail(ErrorKind::Config, "dataset needs at least one class");
  const auto rows = parse_csv(io::read_text(path));
  TextDataset ds;
  ds.split = split_kind;
  ds.num_classes = num_classes;
  const auto where = [&](std::size_t r) { return path.string() + ": row " + std::to_string(r + 1) + ": "; };
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = rows[r];
    int needed = schema.label_column;
    for (int c : schema.text_columns) needed = std::max(needed, c);
    if (static_cast<int>(row.size()) <= needed) {
      fail(ErrorKind::Parse, where(r) + "has " + std::to_string(row.size()) + " fields, schema needs " +
                                 std::to_string(needed + 1));
    }
    int label = 0;
    try {
      label = parse_int(row[static_cast<std::size_t>(schema.label_column)], "label");
    } catch (const Error& e) {
      fail(ErrorKind::Parse, where(r) + e.what());
    }
    const int raw = label;
    if (schema.one_based) --label;
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
      fail(ErrorKind::Parse, where(r) + "label " + std::to_string(raw) + " is outside the " +
                                 std::to_string(num_classes) + "-class range" + (schema.one_based ? " (1-based)" : ""));
    }
    std::string joined;
    for (int c : schema.text_columns) {
      const auto piece = text::trim(row[static_cast<std::size_t>(c)]);
      if (piece.empty()) continue;
      if (!joined.empty()) joined += ' ';
      joined += piece;
    }
    if (joined.empty()) fail(ErrorKind::Parse, where(r) + "empty text");
    ds.records.push_back({std::move(joined), label});
  }
  return ds;
}

std::string format_dataset_csv(const TextDataset& ds) {
  std::string out;
  for (const auto& r : ds.records) {
    out += std::to_string(r.label);
    out += ",\"";
    for (char c : r.text) {
      if (c == '"') out += '"';
      out += c;
    }
    out += "\"\n";
  }
  return out;
}

std::vector<std::size_t> k_shot_indices(std::span<const int> labels, std::size_t num_classes, int k,
                                        std::uint64_t seed) {
  if (k < 0) fail(ErrorKind::Config, "k must be non-negative");
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      fail(ErrorKind::Config, "item " + std::to_string(i) + " has label " + std::to_string(labels[i]) +
                                  " outside [0, " + std::to_string(num_classes) + ")");
    }
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  const auto want = static_cast<std::size_t>(k);
  for (std::size_t y = 0; y < num_classes; ++y) {
    if (by_class[y].size() < want) {
      fail(ErrorKind::Config, "class " + std::to_string(y) + " has " + std::to_string(by_class[y].size()) +
                                  " instances, fewer than k=" + std::to_string(k));
    }
  }
  auto rng = make_rng(seed, 11);
  std::vector<std::size_t> out;
  out.reserve(want * num_classes);
  for (auto& pool : by_class) {
    for (std::size_t i = 0; i < want; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      out.push_back(pool[i]);
    }
  }
  return out;
}

TextDataset k_shot_sample(const TextDataset& ds, const EpisodeSpec& spec) {
  const auto labels = ds.labels();
  TextDataset out;
  out.split = ds.split;
  out.num_classes = ds.num_classes;
  for (auto i : k_shot_indices(labels, ds.num_classes, spec.k, spec.seed)) out.records.push_back(ds.records[i]);
  return out;
}

void SynthConfig::validate() const {
  if (classes < 2) fail(ErrorKind::Config, "synthetic data needs at least 2 classes");
  if (!(noise >= 0.0 && noise <= 1.0)) fail(ErrorKind::Config, "noise rate must lie in [0, 1]");
  if (!(filler_rate >= 0.0 && filler_rate < 1.0)) fail(ErrorKind::Config, "filler rate must lie in [0, 1)");
  if (!(label_word_rate > 0.0 && label_word_rate <= 1.0)) fail(ErrorKind::Config, "label word rate must lie in (0, 1]");
  if (train_per_class < 1 || test_size < 1 || corpus_docs < 1) fail(ErrorKind::Config, "synthetic sizes must be positive");
  if (signature_words < 1 || filler_words < 1) fail(ErrorKind::Config, "vocabulary sizes must be positive");
  if (min_len < 1 || max_len < min_len) fail(ErrorKind::Config, "document length range is invalid");
}

namespace {

class SynthWriter {
 public:
  SynthWriter(const SynthConfig& cfg, std::mt19937_64& rng) : cfg_(cfg), rng_(rng) {
    signatures_.resize(static_cast<std::size_t>(cfg.classes));
    for (auto& sig : signatures_) {
      for (int i = 0; i < cfg.signature_words; ++i) sig.push_back(fresh_word());
    }
    for (int i = 0; i < cfg.filler_words; ++i) filler_.push_back(fresh_word());
    for (int y = 0; y < cfg.classes; ++y) label_words_.push_back(fresh_word());
  }

  const std::vector<std::string>& label_words() const { return label_words_; }

  std::vector<std::string> document_tokens(int label) {
    std::uniform_int_distribution<int> len(cfg_.min_len, cfg_.max_len);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> any_class(0, cfg_.classes - 1);
    const int n = len(rng_);
    std::vector<std::string> toks;
    for (int i = 0; i < n; ++i) {
      if (coin(rng_) < cfg_.filler_rate) {
        toks.push_back(pick(filler_));
      } else {
        const int source = coin(rng_) < cfg_.noise ? any_class(rng_) : label;
        toks.push_back(pick(signatures_[static_cast<std::size_t>(source)]));
      }
    }
    return toks;
  }

  static std::string sentence(const std::vector<std::string>& toks) {
    std::string out;
    for (const auto& t : toks) {
      if (!out.empty()) out += ' ';
      out += t;
    }
    if (!out.empty()) out[0] = static_cast<char>(out[0] - 'a' + 'A');
    out += '.';
    return out;
  }

 private:
  std::string fresh_word() {
    static constexpr std::string_view kConsonants = "bdfgklmnprstvz";
    static constexpr std::string_view kVowels = "aeiou";
    std::uniform_int_distribution<int> syllables(2, 3);
    std::uniform_int_distribution<std::size_t> cons(0, kConsonants.size() - 1);
    std::uniform_int_distribution<std::size_t> vow(0, kVowels.size() - 1);
    for (;;) {
      std::string w;
      const int n = syllables(rng_);
      for (int i = 0; i < n; ++i) {
        w += kConsonants[cons(rng_)];
        w += kVowels[vow(rng_)];
      }
      if (used_.insert(w).second) return w;
    }
  }

  const std::string& pick(const std::vector<std::string>& pool) {
    std::uniform_int_distribution<std::size_t> idx(0, pool.size() - 1);
    return pool[idx(rng_)];
  }

  const SynthConfig& cfg_;
  std::mt19937_64& rng_;
  std::set<std::string> used_;
  std::vector<std::vector<std::string>> signatures_;
  std::vector<std::string> filler_;
  std::vector<std::string> label_words_;
};

}  // namespace

SynthData synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  auto rng = make_rng(cfg.seed, 23);
  SynthWriter writer(cfg, rng);

  SynthData out;
  out.labels.names = writer.label_words();
  for (const auto& w : writer.label_words()) out.labels.label_words.push_back({w});

  const auto k = static_cast<std::size_t>(cfg.classes);
  out.train.split = Split::Train;
  out.train.num_classes = k;
  for (int i = 0; i < cfg.train_per_class * cfg.classes; ++i) {
    const int y = i % cfg.classes;
    out.train.records.push_back({SynthWriter::sentence(writer.document_tokens(y)), y});
  }
  out.test.split = Split::Test;
  out.test.num_classes = k;
  for (int i = 0; i < cfg.test_size; ++i) {
    const int y = i % cfg.classes;
    out.test.records.push_back({SynthWriter::sentence(writer.document_tokens(y)), y});
  }

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> any_class(0, cfg.classes - 1);
  for (int i = 0; i < cfg.corpus_docs; ++i) {
    const int y = any_class(rng);
    auto first = writer.document_tokens(y);
    if (coin(rng) < cfg.label_word_rate) {
      std::uniform_int_distribution<std::size_t> at(0, first.size());
      first.insert(first.begin() + static_cast<std::ptrdiff_t>(at(rng)), writer.label_words()[static_cast<std::size_t>(y)]);
    }
    auto second = writer.document_tokens(any_class(rng));
    out.corpus.push_back(SynthWriter::sentence(first) + " " + SynthWriter::sentence(second));
  }
  return out;
}

std::string format_label_space(const LabelSpace& labels) {
  nlohmann::json j{{"names", labels.names}, {"label_words", labels.label_words}};
  return j.dump(2) + "\n";
}

LabelSpace load_label_space(const std::filesystem::path& path) {
  LabelSpace labels;
  try {
    const auto j = nlohmann::json::parse(io::read_text(path));
    labels.names = j.at("names").get<std::vector<std::string>>();
    if (j.contains("label_words")) {
      labels.label_words = j.at("label_words").get<std::vector<std::vector<std::string>>>();
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, path.string() + ": " + e.what());
  }
  try {
    labels.validate(1, false);
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
  return labels;
}

void load_label_words(const std::filesystem::path& path, LabelSpace& labels) {
  std::vector<std::vector<std::string>> words;
  for (const auto& line : io::read_lines(path)) {
    if (text::trim(line).empty()) continue;
    std::string normalized = line;
    std::replace(normalized.begin(), normalized.end(), ',', ' ');
    std::vector<std::string> row;
    std::size_t i = 0;
    while (i < normalized.size()) {
      while (i < normalized.size() && std::isspace(static_cast<unsigned char>(normalized[i]))) ++i;
      std::size_t j = i;
      while (j < normalized.size() && !std::isspace(static_cast<unsigned char>(normalized[j]))) ++j;
      if (j > i) row.push_back(normalized.substr(i, j - i));
      i = j;
    }
    words.push_back(std::move(row));
  }
  if (words.size() != labels.size()) {
    fail(ErrorKind::Config, path.string() + ": " + std::to_string(words.size()) + " lines of label words for " +
                                std::to_string(labels.size()) + " classes");
  }
  labels.label_words = std::move(words);
}

}  // namespace protoverb
