#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "protoverb/verbalizer.hpp"

namespace protoverb {

enum class Split { Train, Test };

struct TextRecord {
  std::string text;
  int label = 0;
};

struct TextDataset {
  std::vector<TextRecord> records;
  Split split = Split::Train;
  std::size_t num_classes = 0;

  std::vector<int> labels() const;
};

// Column mapping for a delimited dataset file, written on the command line as
// "label=0;text=1,2;one_based=true". Columns are 0-based.
struct DatasetSchema {
  int label_column = 0;
  std::vector<int> text_columns{1};
  bool one_based = false;

  static DatasetSchema parse(std::string_view spec);
  std::string to_string() const;
};

// Comma-delimited rows with optional double quoting ("" escapes a quote);
// quoted fields may contain commas and newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view content);

// Text columns are joined with single spaces. Errors name the 1-based row.
TextDataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema, std::size_t num_classes,
                         Split split = Split::Train);

// Inverse of load_dataset under the default schema (0-based label, one text column).
std::string format_dataset_csv(const TextDataset& ds);

struct EpisodeSpec {
  int k = 0;  // shots per class; 0 means zero-shot (empty training set)
  std::uint64_t seed = 0;
  int template_index = 0;
};

// Indices of exactly k items per class, without replacement, grouped by class
// in ascending class order. Throws Config if a class has fewer than k items.
std::vector<std::size_t> k_shot_indices(std::span<const int> labels, std::size_t num_classes, int k,
                                        std::uint64_t seed);

TextDataset k_shot_sample(const TextDataset& ds, const EpisodeSpec& spec);

struct SynthConfig {
  int classes = 10;
  int train_per_class = 50;
  int test_size = 1000;
  int corpus_docs = 1000;
  double noise = 0.1;           // fraction of signal tokens drawn from a random class
  int signature_words = 10;     // class-specific vocabulary size
  int filler_words = 50;        // shared vocabulary size
  double filler_rate = 0.3;     // fraction of tokens drawn from the shared vocabulary
  int min_len = 10;
  int max_len = 16;
  double label_word_rate = 0.5; // corpus documents that mention their class's label word
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthData {
  TextDataset train;
  TextDataset test;
  std::vector<std::string> corpus;  // unlabeled, one document per line
  LabelSpace labels;
};

// Desk-scale topic-classification stand-in. Each class owns a signature
// vocabulary; documents mix signature, shared filler and noise tokens. The
// corpus injects each class's label word next to its signature tokens so
// keyword-sentence pretraining has something to find.
SynthData synth_generate(const SynthConfig& cfg);

// {"names": [...], "label_words": [[...], ...]}
std::string format_label_space(const LabelSpace& labels);
LabelSpace load_label_space(const std::filesystem::path& path);

// One line per class, words separated by commas or whitespace. Replaces the
// label words of `labels`; the line count must equal K.
void load_label_words(const std::filesystem::path& path, LabelSpace& labels);

}  // namespace protoverb
