#include "protoverb/verbalizer.hpp"

#include <cmath>
#include <set>

#include "protoverb/error.hpp"

namespace protoverb {

void LabelSpace::validate(std::size_t min_classes, bool require_words) const {
  if (names.size() < min_classes) {
    fail(ErrorKind::Config, "label space has " + std::to_string(names.size()) + " classes, need at least " +
                                std::to_string(min_classes));
  }
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) fail(ErrorKind::Config, "duplicate label name '" + n + "'");
  }
  if (!label_words.empty() && label_words.size() != names.size()) {
    fail(ErrorKind::Config, "label words given for " + std::to_string(label_words.size()) + " classes, expected " +
                                std::to_string(names.size()));
  }
  if (require_words) {
    if (label_words.size() != names.size()) fail(ErrorKind::Config, "label words are required for pretraining");
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (label_words[k].empty()) fail(ErrorKind::Config, "label '" + names[k] + "' has no label words");
    }
  }
}

EmbeddingBatch EmbeddingBatch::from(std::span<const MaskEmbedding> items) {
  std::vector<std::size_t> all(items.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return from(items, all);
}

EmbeddingBatch EmbeddingBatch::from(std::span<const MaskEmbedding> items, std::span<const std::size_t> pick) {
  if (pick.empty()) fail(ErrorKind::Degenerate, "empty embedding batch");
  const Eigen::Index m = items[pick.front()].vector.size();
  EmbeddingBatch batch;
  batch.inputs.resize(m, static_cast<Eigen::Index>(pick.size()));
  batch.labels.reserve(pick.size());
  for (std::size_t c = 0; c < pick.size(); ++c) {
    const auto& item = items[pick[c]];
    if (!item.label) fail(ErrorKind::Config, "embedding '" + item.id + "' has no label");
    if (item.vector.size() != m) {
      fail(ErrorKind::Shape, "embedding '" + item.id + "' has length " + std::to_string(item.vector.size()) +
                                 ", expected " + std::to_string(m));
    }
    batch.inputs.col(static_cast<Eigen::Index>(c)) = item.vector;
    batch.labels.push_back(*item.label);
  }
  return batch;
}

void EmbeddingBatch::validate(std::size_t num_classes) const {
  if (labels.empty()) fail(ErrorKind::Degenerate, "empty embedding batch");
  if (static_cast<std::size_t>(inputs.cols()) != labels.size()) {
    fail(ErrorKind::Shape, "batch has " + std::to_string(inputs.cols()) + " vectors but " +
                               std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      fail(ErrorKind::Config, "batch item " + std::to_string(i) + " has label " + std::to_string(labels[i]) +
                                  " outside [0, " + std::to_string(num_classes) + ")");
    }
    const auto col = inputs.col(static_cast<Eigen::Index>(i));
    if (!col.allFinite()) fail(ErrorKind::Numerical, "batch item " + std::to_string(i) + " is not finite");
    if (col.isZero(0.0)) fail(ErrorKind::Degenerate, "batch item " + std::to_string(i) + " is the zero vector");
  }
}

void VerbalizerModel::validate() const {
  if (transform.size() == 0 || prototypes.size() == 0) fail(ErrorKind::Shape, "model has an empty parameter matrix");
  if (prototypes.cols() != transform.rows()) {
    fail(ErrorKind::Shape, "prototype width " + std::to_string(prototypes.cols()) + " does not match transform rows " +
                               std::to_string(transform.rows()));
  }
  if (!transform.allFinite()) fail(ErrorKind::Numerical, "transform matrix has non-finite entries");
  if (!prototypes.allFinite()) fail(ErrorKind::Numerical, "prototype matrix has non-finite entries");
  for (Eigen::Index k = 0; k < prototypes.rows(); ++k) {
    if (prototypes.row(k).isZero(0.0)) fail(ErrorKind::Degenerate, "prototype " + std::to_string(k) + " is zero");
  }
}

void LossWeights::validate() const {
  for (double v : {instance_instance, instance_prototype, prototype_instance}) {
    if (!std::isfinite(v) || v < 0.0) fail(ErrorKind::Config, "loss weights must be finite and non-negative");
  }
  if (instance_instance + instance_prototype + prototype_instance <= 0.0) {
    fail(ErrorKind::Config, "loss weights must not all be zero");
  }
}

namespace {

void check_input(const VerbalizerModel& model, const Vector& h) {
  if (h.size() != model.input_dim()) {
    fail(ErrorKind::Shape, "input has length " + std::to_string(h.size()) + ", model expects " +
                               std::to_string(model.input_dim()));
  }
}

// Normalized transformed batch and prototypes with all pairwise cosines.
struct Forward {
  Matrix unit_u;     // D x N
  Vector u_norm;     // N
  Matrix unit_p;     // K x D
  Vector p_norm;     // K
  Matrix sim_uu;     // N x N
  Matrix sim_up;     // N x K
  const std::vector<int>* labels = nullptr;

  std::size_t n() const { return labels->size(); }
  int label(std::size_t i) const { return (*labels)[i]; }
};

Forward forward(const EmbeddingBatch& batch, const VerbalizerModel& model) {
  if (batch.input_dim() != model.input_dim()) {
    fail(ErrorKind::Shape, "batch dimension " + std::to_string(batch.input_dim()) + " does not match model input " +
                               std::to_string(model.input_dim()));
  }
  batch.validate(static_cast<std::size_t>(model.num_classes()));

  Forward f;
  f.labels = &batch.labels;
  const Matrix u = model.transform * batch.inputs;
  f.u_norm = u.colwise().norm().transpose();
  for (Eigen::Index i = 0; i < f.u_norm.size(); ++i) {
    if (!(f.u_norm[i] > 0.0)) {
      fail(ErrorKind::Degenerate, "transformed embedding " + std::to_string(i) + " has zero norm");
    }
  }
  f.unit_u = u * f.u_norm.cwiseInverse().asDiagonal();

  f.p_norm = model.prototypes.rowwise().norm();
  for (Eigen::Index k = 0; k < f.p_norm.size(); ++k) {
    if (!(f.p_norm[k] > 0.0)) fail(ErrorKind::Degenerate, "prototype " + std::to_string(k) + " has zero norm");
  }
  f.unit_p = f.p_norm.cwiseInverse().asDiagonal() * model.prototypes;

  f.sim_uu = f.unit_u.transpose() * f.unit_u;
  f.sim_up = f.unit_u.transpose() * f.unit_p.transpose();
  return f;
}

// Each routine returns its loss and, when grad is non-null, adds dL/dS into
// the matching similarity matrix.

double instance_instance(const Forward& f, Matrix* grad) {
  const std::size_t n = f.n();
  const double scale = 1.0 / static_cast<double>(n * n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    double neg_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (f.label(j) != f.label(i)) neg_sum += std::exp(f.sim_uu(row, static_cast<Eigen::Index>(j)));
    }
    double inv_z_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      const bool same = f.label(j) == f.label(i);
      const double logit = same ? f.sim_uu(row, col) : 0.0;
      const double theta = std::exp(logit);
      const double z = theta + neg_sum;
      total += std::log1p(neg_sum / theta);
      inv_z_sum += 1.0 / z;
      if (grad != nullptr && same) (*grad)(row, col) += scale * (theta / z - 1.0);
    }
    if (grad != nullptr) {
      for (std::size_t j = 0; j < n; ++j) {
        if (f.label(j) == f.label(i)) continue;
        const auto col = static_cast<Eigen::Index>(j);
        (*grad)(row, col) += scale * std::exp(f.sim_uu(row, col)) * inv_z_sum;
      }
    }
  }
  return scale * total;
}

double instance_prototype(const Forward& f, Matrix* grad) {
  const std::size_t n = f.n();
  const double scale = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double target = f.sim_up(row, f.label(i));
    const Eigen::ArrayXd e = f.sim_up.row(row).transpose().array().exp();
    const double z = e.sum();
    double others = 0.0;
    for (Eigen::Index k = 0; k < e.size(); ++k) {
      if (k != f.label(i)) others += std::exp(f.sim_up(row, k) - target);
    }
    total += std::log1p(others);
    if (grad != nullptr) {
      grad->row(row) += scale * (e / z).matrix().transpose();
      (*grad)(row, f.label(i)) -= scale;
    }
  }
  return scale * total;
}

double prototype_instance(const Forward& f, Matrix* grad) {
  const std::size_t n = f.n();
  const double scale = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto anchor = static_cast<Eigen::Index>(i);
    const int y = f.label(i);
    const double target = f.sim_up(anchor, y);
    const double pos = std::exp(target);
    double z = pos;
    double others = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (f.label(j) == y) continue;
      const double sim = f.sim_up(static_cast<Eigen::Index>(j), y);
      z += std::exp(sim);
      others += std::exp(sim - target);
    }
    total += std::log1p(others);
    if (grad != nullptr) {
      (*grad)(anchor, y) += scale * (pos / z - 1.0);
      for (std::size_t j = 0; j < n; ++j) {
        if (f.label(j) == y) continue;
        const auto other = static_cast<Eigen::Index>(j);
        (*grad)(other, y) += scale * std::exp(f.sim_up(other, y)) / z;
      }
    }
  }
  return scale * total;
}

LossParts weighted_parts(const Forward& f, const LossWeights& w, Matrix* grad_uu, Matrix* grad_up) {
  LossParts parts;
  if (w.instance_instance != 0.0) parts.instance_instance = instance_instance(f, grad_uu);
  Matrix g1, g2;
  if (w.instance_prototype != 0.0) {
    if (grad_up != nullptr) g1 = Matrix::Zero(grad_up->rows(), grad_up->cols());
    parts.instance_prototype = instance_prototype(f, grad_up != nullptr ? &g1 : nullptr);
  }
  if (w.prototype_instance != 0.0) {
    if (grad_up != nullptr) g2 = Matrix::Zero(grad_up->rows(), grad_up->cols());
    parts.prototype_instance = prototype_instance(f, grad_up != nullptr ? &g2 : nullptr);
  }
  if (grad_uu != nullptr) *grad_uu *= w.instance_instance;
  if (grad_up != nullptr) {
    if (g1.size() != 0) *grad_up += w.instance_prototype * g1;
    if (g2.size() != 0) *grad_up += w.prototype_instance * g2;
  }
  return parts;
}

template <typename Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!std::isfinite(m(r, c))) {
        fail(ErrorKind::Numerical,
             std::string("non-finite gradient in ") + what + " at (" + std::to_string(r) + ", " + std::to_string(c) + ")");
      }
    }
  }
}

}  // namespace

Vector transform(const VerbalizerModel& model, const Vector& h) {
  check_input(model, h);
  return model.transform * h;
}

double cosine(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    fail(ErrorKind::Shape, "cosine of vectors with lengths " + std::to_string(a.size()) + " and " +
                               std::to_string(b.size()));
  }
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) fail(ErrorKind::Degenerate, "cosine similarity of a zero-norm vector");
  return a.dot(b) / (na * nb);
}

double loss_instance_instance(const EmbeddingBatch& batch, const VerbalizerModel& model) {
  return instance_instance(forward(batch, model), nullptr);
}

double loss_instance_prototype(const EmbeddingBatch& batch, const VerbalizerModel& model) {
  return instance_prototype(forward(batch, model), nullptr);
}

double loss_prototype_instance(const EmbeddingBatch& batch, const VerbalizerModel& model) {
  return prototype_instance(forward(batch, model), nullptr);
}

LossParts loss_parts(const EmbeddingBatch& batch, const VerbalizerModel& model) {
  return weighted_parts(forward(batch, model), LossWeights{}, nullptr, nullptr);
}

double total_loss(const EmbeddingBatch& batch, const VerbalizerModel& model, const LossWeights& w) {
  w.validate();
  return weighted_parts(forward(batch, model), w, nullptr, nullptr).weighted(w);
}

Vector prototype_similarities(const VerbalizerModel& model, const Vector& h) {
  const Vector u = transform(model, h);
  const double un = u.norm();
  if (!(un > 0.0)) fail(ErrorKind::Degenerate, "transformed input has zero norm");
  const Vector pn = model.prototypes.rowwise().norm();
  for (Eigen::Index k = 0; k < pn.size(); ++k) {
    if (!(pn[k] > 0.0)) fail(ErrorKind::Degenerate, "prototype " + std::to_string(k) + " has zero norm");
  }
  return (model.prototypes * u).cwiseQuotient(pn) / un;
}

Vector class_probabilities(const VerbalizerModel& model, const Vector& h, double temperature) {
  if (!(temperature > 0.0)) fail(ErrorKind::Config, "softmax temperature must be positive");
  const Vector sims = prototype_similarities(model, h) / temperature;
  const Eigen::ArrayXd e = (sims.array() - sims.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

int classify(const VerbalizerModel& model, const Vector& h) {
  const Vector sims = prototype_similarities(model, h);
  Eigen::Index best = 0;
  for (Eigen::Index k = 1; k < sims.size(); ++k) {
    if (sims[k] > sims[best]) best = k;
  }
  return static_cast<int>(best);
}

BackwardResult backward(const EmbeddingBatch& batch, const VerbalizerModel& model, const LossWeights& w) {
  w.validate();
  const Forward f = forward(batch, model);
  const auto n = static_cast<Eigen::Index>(f.n());
  const Eigen::Index k = model.num_classes();

  Matrix g_uu = Matrix::Zero(n, n);
  Matrix g_up = Matrix::Zero(n, k);
  BackwardResult out;
  out.parts = weighted_parts(f, w, &g_uu, &g_up);
  out.loss = out.parts.weighted(w);

  // d cos(a,b) / da = (b_hat - cos * a_hat) / |a|
  const Matrix g_sym = g_uu + g_uu.transpose();
  const Vector c_uu = g_sym.cwiseProduct(f.sim_uu).rowwise().sum();
  const Vector c_up = g_up.cwiseProduct(f.sim_up).rowwise().sum();
  Matrix d_u = f.unit_u * g_sym + f.unit_p.transpose() * g_up.transpose();
  d_u -= f.unit_u * (c_uu + c_up).asDiagonal();
  d_u = d_u * f.u_norm.cwiseInverse().asDiagonal();

  const Vector c_p = g_up.cwiseProduct(f.sim_up).colwise().sum().transpose();
  Matrix d_p = g_up.transpose() * f.unit_u.transpose();
  d_p -= c_p.asDiagonal() * f.unit_p;
  d_p = f.p_norm.cwiseInverse().asDiagonal() * d_p;

  out.grads.d_transform = d_u * batch.inputs.transpose();
  out.grads.d_prototypes = std::move(d_p);
  require_finite(out.grads.d_transform, "transform");
  require_finite(out.grads.d_prototypes, "prototypes");
  if (!std::isfinite(out.loss)) fail(ErrorKind::Numerical, "loss is not finite");
  return out;
}

}  // namespace protoverb
