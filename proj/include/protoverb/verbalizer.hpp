#pragma once

// Metric-space classification head over [MASK] embeddings.
//
// An encoder embedding h (length M) is mapped into the prototype space by a
// bias-free linear transform u = W h (W is D x M). Each class k owns a
// prototype row p_k of P (K x D). Every score in the head is a cosine
// similarity, so the head is invariant to the scale of h and of each p_k.
//
// Three contrastive objectives train W and P jointly:
//   instance-instance   pulls same-label instances together, pushes others apart
//   instance-prototype  softmax over prototypes, per instance
//   prototype-instance  softmax over the anchor and different-label instances, per prototype
// Their weighted sum is the training loss; backward() returns it together with
// hand-derived gradients for W and P.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace protoverb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct LabelSpace {
  std::vector<std::string> names;
  // Literal words per class, used only to sample keyword sentences for
  // prototype pretraining. Never consulted at classification time.
  std::vector<std::vector<std::string>> label_words;

  std::size_t size() const { return names.size(); }

  // Throws Config when names are not unique, K < min_classes, or (when
  // require_words) some class has no label words.
  void validate(std::size_t min_classes = 2, bool require_words = false) const;
};

struct MaskEmbedding {
  std::string id;
  Vector vector;
  std::optional<int> label;
};

// N labelled embeddings stored column-wise (M x N).
struct EmbeddingBatch {
  Matrix inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  Eigen::Index input_dim() const { return inputs.rows(); }

  // Every record must carry a label; vectors must share one length.
  static EmbeddingBatch from(std::span<const MaskEmbedding> items);
  static EmbeddingBatch from(std::span<const MaskEmbedding> items, std::span<const std::size_t> pick);

  // N >= 1, labels in [0, num_classes), finite, no all-zero column.
  void validate(std::size_t num_classes) const;
};

struct VerbalizerModel {
  Matrix transform;   // D x M
  Matrix prototypes;  // K x D

  Eigen::Index input_dim() const { return transform.cols(); }
  Eigen::Index proto_dim() const { return transform.rows(); }
  Eigen::Index num_classes() const { return prototypes.rows(); }

  // M*D + K*D.
  std::size_t parameter_count() const {
    return static_cast<std::size_t>(transform.size() + prototypes.size());
  }

  // Shapes agree, entries finite, no zero prototype row.
  void validate() const;
};

struct LossWeights {
  double instance_instance = 1.0;
  double instance_prototype = 1.0;
  double prototype_instance = 1.0;

  // Non-negative, finite, and not all zero.
  void validate() const;
};

struct GradientSet {
  Matrix d_transform;   // D x M
  Matrix d_prototypes;  // K x D
};

struct LossParts {
  double instance_instance = 0.0;
  double instance_prototype = 0.0;
  double prototype_instance = 0.0;

  double weighted(const LossWeights& w) const {
    return w.instance_instance * instance_instance + w.instance_prototype * instance_prototype +
           w.prototype_instance * prototype_instance;
  }
};

struct BackwardResult {
  double loss = 0.0;
  LossParts parts;
  GradientSet grads;
};

Vector transform(const VerbalizerModel& model, const Vector& h);

// Throws Degenerate for a zero-norm operand rather than returning 0.
double cosine(const Vector& a, const Vector& b);

double loss_instance_instance(const EmbeddingBatch& batch, const VerbalizerModel& model);
double loss_instance_prototype(const EmbeddingBatch& batch, const VerbalizerModel& model);
double loss_prototype_instance(const EmbeddingBatch& batch, const VerbalizerModel& model);
LossParts loss_parts(const EmbeddingBatch& batch, const VerbalizerModel& model);
double total_loss(const EmbeddingBatch& batch, const VerbalizerModel& model, const LossWeights& w);

// Softmax over cosine similarities to every prototype. `temperature` divides
// the similarities; 1.0 is the plain head.
Vector class_probabilities(const VerbalizerModel& model, const Vector& h, double temperature = 1.0);

// Cosine similarity of transform(h) to each prototype.
Vector prototype_similarities(const VerbalizerModel& model, const Vector& h);

// Index of the most similar prototype; exact ties go to the lowest index.
int classify(const VerbalizerModel& model, const Vector& h);

// Weighted loss and its exact gradients. Components whose weight is zero are
// skipped entirely, so they cannot contribute NaNs.
BackwardResult backward(const EmbeddingBatch& batch, const VerbalizerModel& model, const LossWeights& w);

}  // namespace protoverb
