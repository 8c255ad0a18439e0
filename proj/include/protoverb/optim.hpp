#pragma once

#include <cstdint>
#include <vector>

#include "protoverb/verbalizer.hpp"

namespace protoverb {

struct OptimConfig {
  double lr = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  int epochs = 10;
  int batch_size = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

// Learning rate suited to the bundled toy encoder; the PLM-scale default stays
// in OptimConfig::lr.
inline constexpr double kToyEncoderLr = 1e-2;

struct TrainState {
  VerbalizerModel model;
  Matrix m_transform, v_transform;    // first/second moments for W
  Matrix m_prototypes, v_prototypes;  // first/second moments for P
  std::uint64_t step = 0;

  explicit TrainState(VerbalizerModel initial);
};

// One decoupled-weight-decay Adam update applied to W and P alike.
void adamw_step(TrainState& state, const GradientSet& grads, const OptimConfig& cfg);

// W ~ U[-1/sqrt(M), 1/sqrt(M)], prototype rows unit-normalized Gaussians.
VerbalizerModel init_model(Eigen::Index input_dim, Eigen::Index proto_dim, Eigen::Index num_classes,
                           std::uint64_t seed);

struct TrainResult {
  VerbalizerModel model;
  std::vector<double> batch_losses;
  std::vector<double> epoch_mean_losses;
};

// Mini-batch training: reshuffle every epoch, batches of cfg.batch_size (the
// last one may be short), backward + adamw_step per batch. Deterministic for
// a fixed cfg.seed.
TrainResult train(const EmbeddingBatch& data, const VerbalizerModel& initial, const LossWeights& w,
                  const OptimConfig& cfg);

// Zero-shot prototype initialization. `per_class[y]` holds the encoder
// embeddings of class y's keyword sentences. Prototype y starts as the
// unit-normalized mean of their transforms, then the whole set is trained as
// pseudo-labelled data with the same schedule as train().
TrainResult pretrain_prototypes(const std::vector<std::vector<Vector>>& per_class, const VerbalizerModel& initial,
                                const LossWeights& w, const OptimConfig& cfg);

// Phase one of pretrain_prototypes on its own.
Matrix mean_prototypes(const std::vector<std::vector<Vector>>& per_class, const Matrix& transform);

}  // namespace protoverb
