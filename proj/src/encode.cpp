#include "protoverb/encode.hpp"

#include <charconv>
#include <cmath>

#include <nlohmann/json.hpp>

#include "protoverb/error.hpp"
#include "protoverb/io.hpp"
#include "protoverb/text.hpp"

namespace protoverb {

using nlohmann::json;

void EncoderSpec::validate() const {
  if (dim < 2) fail(ErrorKind::Config, "encoder dimension must be at least 2");
  if (max_tokens < 1) fail(ErrorKind::Config, "max_tokens must be positive");
}

namespace {

constexpr double kPositionDecay = 8.0;

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// FNV-1a over the bytes, seeded, with a final avalanche.
std::uint64_t hash_gram(std::string_view gram, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ mix64(seed);
  for (unsigned char c : gram) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

}  // namespace

ToyEncoder::ToyEncoder(EncoderSpec spec) : spec_(spec) {
  if (spec_.kind != EncoderKind::Toy) fail(ErrorKind::Config, "ToyEncoder requires a toy encoder spec");
  spec_.validate();
}

void ToyEncoder::add_token(Vector& acc, const std::string& token, double weight) const {
  const std::string framed = "<" + token + ">";
  std::vector<std::string_view> grams;
  for (std::size_t n = 1; n <= 3; ++n) {
    for (std::size_t i = 0; i + n <= framed.size(); ++i) {
      const std::string_view g(framed.data() + i, n);
      if (g == "<" || g == ">") continue;
      grams.push_back(g);
    }
  }
  const double per_gram = weight / std::sqrt(static_cast<double>(grams.size()));
  const auto buckets = static_cast<std::uint64_t>(spec_.dim);
  for (auto g : grams) {
    const std::uint64_t h = hash_gram(g, spec_.seed);
    const double sign = (h >> 63) != 0 ? -1.0 : 1.0;
    acc[static_cast<Eigen::Index>(h % buckets)] += sign * per_gram;
  }
}

Vector ToyEncoder::encode(std::string_view prompted) const {
  const std::size_t masks = text::count_occurrences(prompted, text::kMask);
  if (masks != 1) {
    fail(ErrorKind::Template, "encoder input must contain exactly one [MASK], found " + std::to_string(masks));
  }
  const auto pos = prompted.find(text::kMask);
  auto head = text::tokens(prompted.substr(0, pos));
  auto tail = text::tokens(prompted.substr(pos + text::kMask.size()));

  const auto budget = static_cast<std::size_t>(spec_.max_tokens) - 1;  // one slot for the mask
  while (head.size() + tail.size() > budget) {
    if (!tail.empty()) {
      tail.pop_back();
    } else {
      head.erase(head.begin());
    }
  }
  if (head.empty() && tail.empty()) fail(ErrorKind::Degenerate, "no tokens besides [MASK] after truncation");

  Vector acc = Vector::Zero(spec_.dim);
  for (std::size_t i = 0; i < head.size(); ++i) {
    const auto distance = static_cast<double>(head.size() - i);
    add_token(acc, head[i], std::exp(-distance / kPositionDecay));
  }
  for (std::size_t i = 0; i < tail.size(); ++i) {
    const auto distance = static_cast<double>(i + 1);
    add_token(acc, tail[i], std::exp(-distance / kPositionDecay));
  }
  const double norm = acc.norm();
  if (!(norm > 0.0)) fail(ErrorKind::Degenerate, "encoding cancelled to the zero vector");
  return acc / norm;
}

Vector encode_text(const EncoderSpec& spec, std::string_view prompted) {
  if (spec.kind != EncoderKind::Toy) {
    fail(ErrorKind::Config, "precomputed encoders read vectors from an embedding file, not from text");
  }
  return ToyEncoder(spec).encode(prompted);
}

void EmbeddingStore::add(MaskEmbedding record) {
  if (record.vector.size() != dim) {
    fail(ErrorKind::Shape, "embedding '" + record.id + "' has " + std::to_string(record.vector.size()) +
                               " values, store dimension is " + std::to_string(dim));
  }
  if (!record.vector.allFinite()) fail(ErrorKind::Numerical, "embedding '" + record.id + "' has non-finite values");
  if (!ids_.insert(record.id).second) fail(ErrorKind::Parse, "duplicate embedding id '" + record.id + "'");
  records.push_back(std::move(record));
}

std::string format_embeddings(const EmbeddingStore& store) {
  std::string out = json{{"m", store.dim}, {"source", store.source}}.dump();
  out += '\n';
  char buf[64];
  for (const auto& r : store.records) {
    if (r.vector.size() != store.dim) fail(ErrorKind::Shape, "embedding '" + r.id + "' has the wrong length");
    out += "{\"id\":";
    out += json(r.id).dump();
    out += ",\"label\":";
    out += r.label ? std::to_string(*r.label) : "null";
    out += ",\"v\":[";
    for (Eigen::Index i = 0; i < r.vector.size(); ++i) {
      if (i > 0) out += ',';
      const auto value = static_cast<float>(r.vector[i]);
      if (!std::isfinite(value)) fail(ErrorKind::Numerical, "embedding '" + r.id + "' has non-finite values");
      const auto res = std::to_chars(buf, buf + sizeof(buf), value);
      out.append(buf, res.ptr);
    }
    out += "]}\n";
  }
  return out;
}

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
  io::write_atomic(path, format_embeddings(store));
}

EmbeddingStore load_embeddings(const std::filesystem::path& path) {
  const auto lines = io::read_lines(path);
  const auto where = [&](std::size_t line) { return path.string() + ":" + std::to_string(line + 1) + ": "; };
  if (lines.empty()) fail(ErrorKind::Parse, path.string() + ": missing header line");

  EmbeddingStore store;
  try {
    const auto header = json::parse(lines[0]);
    if (!header.is_object() || !header.contains("m") || !header["m"].is_number_integer()) {
      fail(ErrorKind::Parse, where(0) + "header must be {\"m\": int, \"source\": string}");
    }
    store.dim = header["m"].get<int>();
    if (store.dim < 1) fail(ErrorKind::Parse, where(0) + "header dimension must be positive");
    if (header.contains("source") && header["source"].is_string()) store.source = header["source"].get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, where(0) + e.what());
  }

  for (std::size_t n = 1; n < lines.size(); ++n) {
    if (text::trim(lines[n]).empty()) continue;
    MaskEmbedding rec;
    try {
      const auto j = json::parse(lines[n]);
      if (!j.is_object() || !j.contains("id") || !j.contains("v") || !j["v"].is_array()) {
        fail(ErrorKind::Parse, where(n) + "record must have \"id\" and \"v\"");
      }
      rec.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
      if (j.contains("label") && !j["label"].is_null()) {
        if (!j["label"].is_number_integer()) fail(ErrorKind::Parse, where(n) + "label must be an integer or null");
        rec.label = j["label"].get<int>();
      }
      const auto& v = j["v"];
      if (static_cast<int>(v.size()) != store.dim) {
        fail(ErrorKind::Parse, where(n) + "record '" + rec.id + "' has " + std::to_string(v.size()) +
                                   " values, header declares " + std::to_string(store.dim));
      }
      rec.vector.resize(store.dim);
      for (int i = 0; i < store.dim; ++i) {
        if (!v[static_cast<std::size_t>(i)].is_number()) fail(ErrorKind::Parse, where(n) + "non-numeric value");
        const auto value = static_cast<float>(v[static_cast<std::size_t>(i)].get<double>());
        if (!std::isfinite(value)) fail(ErrorKind::Parse, where(n) + "non-finite value in '" + rec.id + "'");
        rec.vector[i] = static_cast<double>(value);
      }
    } catch (const json::exception& e) {
      fail(ErrorKind::Parse, where(n) + e.what());
    }
    try {
      store.add(std::move(rec));
    } catch (const Error& e) {
      fail(ErrorKind::Parse, where(n) + e.what());
    }
  }
  return store;
}

}  // namespace protoverb
