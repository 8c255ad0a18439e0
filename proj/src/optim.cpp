#include "protoverb/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "protoverb/error.hpp"

namespace protoverb {

void OptimConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) fail(ErrorKind::Config, "learning rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    fail(ErrorKind::Config, "Adam betas must lie in (0, 1)");
  }
  if (!(eps > 0.0)) fail(ErrorKind::Config, "Adam eps must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    fail(ErrorKind::Config, "weight decay must be non-negative");
  }
  if (epochs < 0) fail(ErrorKind::Config, "epochs must be non-negative");
  if (batch_size < 1) fail(ErrorKind::Config, "batch size must be positive");
}

TrainState::TrainState(VerbalizerModel initial)
    : model(std::move(initial)),
      m_transform(Matrix::Zero(model.transform.rows(), model.transform.cols())),
      v_transform(Matrix::Zero(model.transform.rows(), model.transform.cols())),
      m_prototypes(Matrix::Zero(model.prototypes.rows(), model.prototypes.cols())),
      v_prototypes(Matrix::Zero(model.prototypes.rows(), model.prototypes.cols())) {}

namespace {

void adamw_update(Matrix& param, Matrix& m, Matrix& v, const Matrix& g, const OptimConfig& cfg, double bias1,
                  double bias2) {
  m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
  v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  const Matrix m_hat = m / bias1;
  const Matrix v_hat = v / bias2;
  param -= cfg.lr * (m_hat.array() / (v_hat.array().sqrt() + cfg.eps) + cfg.weight_decay * param.array()).matrix();
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

}  // namespace

void adamw_step(TrainState& state, const GradientSet& grads, const OptimConfig& cfg) {
  auto& model = state.model;
  if (grads.d_transform.rows() != model.transform.rows() || grads.d_transform.cols() != model.transform.cols() ||
      grads.d_prototypes.rows() != model.prototypes.rows() || grads.d_prototypes.cols() != model.prototypes.cols()) {
    fail(ErrorKind::Shape, "gradient shapes do not match the model");
  }
  if (!grads.d_transform.allFinite() || !grads.d_prototypes.allFinite()) {
    fail(ErrorKind::Numerical, "non-finite gradient passed to the optimizer");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  adamw_update(model.transform, state.m_transform, state.v_transform, grads.d_transform, cfg, bias1, bias2);
  adamw_update(model.prototypes, state.m_prototypes, state.v_prototypes, grads.d_prototypes, cfg, bias1, bias2);
  if (!model.transform.allFinite() || !model.prototypes.allFinite()) {
    fail(ErrorKind::Numerical, "parameters became non-finite at step " + std::to_string(state.step));
  }
}

VerbalizerModel init_model(Eigen::Index input_dim, Eigen::Index proto_dim, Eigen::Index num_classes,
                           std::uint64_t seed) {
  if (input_dim < 1 || proto_dim < 1 || num_classes < 1) fail(ErrorKind::Config, "model dimensions must be positive");
  auto rng = make_rng(seed, 0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(input_dim));
  std::uniform_real_distribution<double> uniform(-bound, bound);
  std::normal_distribution<double> gauss(0.0, 1.0);

  VerbalizerModel model;
  model.transform.resize(proto_dim, input_dim);
  for (Eigen::Index r = 0; r < proto_dim; ++r) {
    for (Eigen::Index c = 0; c < input_dim; ++c) model.transform(r, c) = uniform(rng);
  }
  model.prototypes.resize(num_classes, proto_dim);
  for (Eigen::Index k = 0; k < num_classes; ++k) {
    do {
      for (Eigen::Index c = 0; c < proto_dim; ++c) model.prototypes(k, c) = gauss(rng);
    } while (model.prototypes.row(k).norm() == 0.0);
    model.prototypes.row(k).normalize();
  }
  return model;
}

TrainResult train(const EmbeddingBatch& data, const VerbalizerModel& initial, const LossWeights& w,
                  const OptimConfig& cfg) {
  cfg.validate();
  w.validate();
  initial.validate();
  if (data.size() == 0) fail(ErrorKind::Config, "no training data");
  if (data.input_dim() != initial.input_dim()) {
    fail(ErrorKind::Shape, "training data dimension " + std::to_string(data.input_dim()) +
                               " does not match model input " + std::to_string(initial.input_dim()));
  }
  data.validate(static_cast<std::size_t>(initial.num_classes()));

  TrainState state(initial);
  TrainResult result;
  auto rng = make_rng(cfg.seed, 1);
  std::vector<std::size_t> order(data.size());
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    std::size_t epoch_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      EmbeddingBatch batch;
      batch.inputs.resize(data.input_dim(), static_cast<Eigen::Index>(end - start));
      for (std::size_t c = start; c < end; ++c) {
        batch.inputs.col(static_cast<Eigen::Index>(c - start)) = data.inputs.col(static_cast<Eigen::Index>(order[c]));
        batch.labels.push_back(data.labels[order[c]]);
      }
      const BackwardResult step = backward(batch, state.model, w);
      adamw_step(state, step.grads, cfg);
      result.batch_losses.push_back(step.loss);
      epoch_sum += step.loss;
      ++epoch_batches;
    }
    result.epoch_mean_losses.push_back(epoch_sum / static_cast<double>(epoch_batches));
  }
  result.model = std::move(state.model);
  return result;
}

Matrix mean_prototypes(const std::vector<std::vector<Vector>>& per_class, const Matrix& transform) {
  Matrix protos(static_cast<Eigen::Index>(per_class.size()), transform.rows());
  for (std::size_t y = 0; y < per_class.size(); ++y) {
    if (per_class[y].empty()) {
      fail(ErrorKind::Config, "class " + std::to_string(y) + " has no pretraining sentences");
    }
    Vector mean = Vector::Zero(transform.rows());
    for (const auto& h : per_class[y]) {
      if (h.size() != transform.cols()) {
        fail(ErrorKind::Shape, "pretraining embedding for class " + std::to_string(y) + " has length " +
                                   std::to_string(h.size()) + ", expected " + std::to_string(transform.cols()));
      }
      mean += transform * h;
    }
    mean /= static_cast<double>(per_class[y].size());
    const double norm = mean.norm();
    if (!(norm > 0.0)) fail(ErrorKind::Degenerate, "mean pretraining embedding of class " + std::to_string(y) + " is zero");
    protos.row(static_cast<Eigen::Index>(y)) = (mean / norm).transpose();
  }
  return protos;
}

TrainResult pretrain_prototypes(const std::vector<std::vector<Vector>>& per_class, const VerbalizerModel& initial,
                                const LossWeights& w, const OptimConfig& cfg) {
  if (static_cast<Eigen::Index>(per_class.size()) != initial.num_classes()) {
    fail(ErrorKind::Config, "pretraining data covers " + std::to_string(per_class.size()) + " classes, model has " +
                                std::to_string(initial.num_classes()));
  }
  VerbalizerModel model = initial;
  model.prototypes = mean_prototypes(per_class, initial.transform);

  std::size_t total = 0;
  for (const auto& list : per_class) total += list.size();
  EmbeddingBatch pseudo;
  pseudo.inputs.resize(initial.input_dim(), static_cast<Eigen::Index>(total));
  Eigen::Index col = 0;
  for (std::size_t y = 0; y < per_class.size(); ++y) {
    for (const auto& h : per_class[y]) {
      pseudo.inputs.col(col++) = h;
      pseudo.labels.push_back(static_cast<int>(y));
    }
  }
  return train(pseudo, model, w, cfg);
}

}  // namespace protoverb
