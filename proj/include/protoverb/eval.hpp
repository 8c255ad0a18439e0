#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "protoverb/encode.hpp"
#include "protoverb/optim.hpp"
#include "protoverb/verbalizer.hpp"

namespace protoverb {

// Micro-averaged F1 from pooled TP/FP/FN. For single-label multiclass
// predictions this equals accuracy.
double micro_f1(std::span<const int> predicted, std::span<const int> gold, std::size_t num_classes);

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population (divide by n)
  double max = 0.0;
};

Aggregate aggregate(std::span<const double> values);

enum class HeadKind { Ppv, Spv };

// Trainable head parameters with the encoder frozen: prototype head is
// M*D + K*D, a soft verbalizer head is M*K (proto_dim unused).
std::uint64_t count_params(std::int64_t input_dim, std::int64_t proto_dim, std::int64_t num_classes, HeadKind head);

std::vector<int> predict(const VerbalizerModel& model, std::span<const MaskEmbedding> items);

// Scores labelled records; unlabelled ones are an error.
double evaluate(const VerbalizerModel& model, std::span<const MaskEmbedding> items);

struct RunRecord {
  std::uint64_t seed = 0;
  int template_index = 0;
  int k = 0;
  LossWeights lambda;
  double micro_f1 = 0.0;
};

struct RunReport {
  nlohmann::json config = nlohmann::json::object();
  std::vector<RunRecord> runs;
  std::optional<double> wall_clock_seconds;

  Aggregate summary() const;

  // Sorted keys, floats rounded to 6 decimals. Without a wall-clock value the
  // output depends only on the runs and config.
  nlohmann::json to_json() const;
  std::string dump() const;
};

// One k-shot episode over precomputed embeddings. The initial model is
// `init` when present (e.g. a pretrained checkpoint), otherwise a fresh
// init_model(seed).
struct Experiment {
  std::span<const MaskEmbedding> train_pool;
  std::span<const MaskEmbedding> test;
  std::size_t num_classes = 0;
  Eigen::Index proto_dim = 256;
  int k = 20;
  std::uint64_t seed = 0;
  int template_index = 0;
  OptimConfig optim;
  std::optional<VerbalizerModel> init;
};

struct EpisodeOutcome {
  RunRecord record;
  VerbalizerModel model;
  std::vector<double> epoch_losses;
};

EpisodeOutcome run_episode(const Experiment& exp, const LossWeights& w);

// The five loss combinations, in canonical order: Ls; Lp1+Lp2; Ls+Lp1; Ls+Lp2; Ls+Lp1+Lp2.
std::vector<LossWeights> canonical_ablation_combos();
std::string combo_name(const LossWeights& w);

// Same episode (seed, data, initial parameters) once per combination; one
// report per combination.
std::vector<RunReport> ablation_sweep(const Experiment& exp, std::span<const LossWeights> combos);

// Transformed embeddings (length D) with their labels, then the K prototypes
// with ids "proto:<name>" and label = class index.
EmbeddingStore dump_embeddings(const VerbalizerModel& model, std::span<const MaskEmbedding> items,
                               const std::vector<std::string>& label_names);

}  // namespace protoverb
