#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "protoverb/verbalizer.hpp"

namespace protoverb {

enum class EncoderKind { Toy, Precomputed };

struct EncoderSpec {
  EncoderKind kind = EncoderKind::Toy;
  int dim = 512;
  std::uint64_t seed = 0x5eed;
  int max_tokens = 512;

  void validate() const;
};

// Stand-in for a masked language model: hashed character 1/2/3-grams of each
// token, weighted by exp(-distance to [MASK] / 8), summed and L2-normalized.
// It only has to be deterministic and content-sensitive; it is not a PLM.
class ToyEncoder {
 public:
  explicit ToyEncoder(EncoderSpec spec);

  // `prompted` must hold exactly one [MASK]. When there are more than
  // max_tokens tokens, tail tokens are dropped first, then head tokens; the
  // mask itself is always kept.
  Vector encode(std::string_view prompted) const;

  const EncoderSpec& spec() const { return spec_; }

 private:
  void add_token(Vector& acc, const std::string& token, double weight) const;

  EncoderSpec spec_;
};

// Dispatches on spec.kind. Precomputed encoders have no text path; their
// vectors come from load_embeddings.
Vector encode_text(const EncoderSpec& spec, std::string_view prompted);

struct EmbeddingStore {
  int dim = 0;
  std::string source;
  std::vector<MaskEmbedding> records;

  // Rejects duplicate ids, wrong lengths and non-finite values.
  void add(MaskEmbedding record);

 private:
  std::unordered_set<std::string> ids_;
};

// Line-oriented interchange format:
//   {"m": M, "source": "..."}
//   {"id": "...", "label": 3, "v": [ ... M numbers ... ]}
// Values are stored at 32-bit precision and widened to double on load.
EmbeddingStore load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);
std::string format_embeddings(const EmbeddingStore& store);

}  // namespace protoverb
