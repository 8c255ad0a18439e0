#pragma once

// In-process version of synth -> encode -> pretrain used by the slower tests.

#include <string>
#include <vector>

#include "protoverb/encode.hpp"
#include "protoverb/episodes.hpp"
#include "protoverb/eval.hpp"
#include "protoverb/optim.hpp"
#include "protoverb/templating.hpp"

namespace pipeline {

struct Synthetic {
  protoverb::SynthData data;
  std::vector<protoverb::MaskEmbedding> train;
  std::vector<protoverb::MaskEmbedding> test;
};

inline std::vector<protoverb::MaskEmbedding> embed(const protoverb::ToyEncoder& enc, const protoverb::Template& tpl,
                                                   const protoverb::TextDataset& ds) {
  std::vector<protoverb::MaskEmbedding> out;
  out.reserve(ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    out.push_back({std::to_string(i), enc.encode(protoverb::fill_template(tpl, ds.records[i].text)),
                   ds.records[i].label});
  }
  return out;
}

inline Synthetic synthetic(double noise, std::uint64_t seed, const std::string& pattern = "[Category: [MASK]] [SENTENCE]") {
  protoverb::SynthConfig sc;
  sc.noise = noise;
  sc.seed = seed;
  Synthetic s;
  s.data = protoverb::synth_generate(sc);
  const protoverb::ToyEncoder enc(protoverb::EncoderSpec{});
  const protoverb::Template tpl(pattern);
  s.train = embed(enc, tpl, s.data.train);
  s.test = embed(enc, tpl, s.data.test);
  return s;
}

inline protoverb::Experiment experiment(const Synthetic& s, std::uint64_t seed, int k = 20) {
  protoverb::Experiment ex;
  ex.train_pool = s.train;
  ex.test = s.test;
  ex.num_classes = s.data.labels.size();
  ex.k = k;
  ex.seed = seed;
  ex.optim.lr = protoverb::kToyEncoderLr;
  ex.optim.seed = seed;
  return ex;
}

// Keyword-sentence pretraining with Q sentences per label; returns the model.
inline protoverb::VerbalizerModel zero_shot(const Synthetic& s, std::uint64_t seed, int q = 30) {
  const protoverb::ToyEncoder enc(protoverb::EncoderSpec{});
  const auto sample = protoverb::sample_keyword_sentences(s.data.corpus, s.data.labels, q, seed);
  std::vector<std::vector<protoverb::Vector>> per_class(s.data.labels.size());
  for (std::size_t y = 0; y < per_class.size(); ++y) {
    for (const auto& ks : sample.per_label[y]) {
      per_class[y].push_back(enc.encode(protoverb::fill_pretrain_template(ks.sentence, ks.word)));
    }
  }
  const auto initial = protoverb::init_model(protoverb::EncoderSpec{}.dim, 256,
                                             static_cast<Eigen::Index>(per_class.size()), seed);
  protoverb::OptimConfig cfg;
  cfg.lr = protoverb::kToyEncoderLr;
  cfg.seed = seed;
  return protoverb::pretrain_prototypes(per_class, initial, {}, cfg).model;
}

}  // namespace pipeline
