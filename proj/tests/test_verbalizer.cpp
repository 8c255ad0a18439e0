#include <doctest.h>

#include <cmath>
#include <random>

#include "oracle.hpp"
#include "protoverb/error.hpp"
#include "protoverb/verbalizer.hpp"

using namespace protoverb;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

EmbeddingBatch batch_of(std::initializer_list<Vector> cols, std::vector<int> labels) {
  EmbeddingBatch b;
  b.inputs.resize(cols.begin()->size(), static_cast<Eigen::Index>(cols.size()));
  Eigen::Index c = 0;
  for (const auto& v : cols) b.inputs.col(c++) = v;
  b.labels = std::move(labels);
  return b;
}

VerbalizerModel identity_model(Eigen::Index dim, Matrix prototypes) {
  return {Matrix::Identity(dim, dim), std::move(prototypes)};
}

Matrix rows(std::initializer_list<Vector> r) {
  Matrix m(static_cast<Eigen::Index>(r.size()), r.begin()->size());
  Eigen::Index i = 0;
  for (const auto& v : r) m.row(i++) = v.transpose();
  return m;
}

// Prototype at angle acos(s) from e1 in the plane.
Vector at_cosine(double s, double side = 1.0) { return vec({s, side * std::sqrt(1.0 - s * s)}); }

const double kLogOnePlusInvE = std::log1p(std::exp(-1.0));  // 0.313262

}  // namespace

TEST_CASE("transform examples") {
  const VerbalizerModel id = identity_model(3, Matrix::Ones(1, 3));
  CHECK(transform(id, vec({1, 2, 3})).isApprox(vec({1, 2, 3})));

  const VerbalizerModel zero{Matrix::Zero(2, 3), Matrix::Ones(1, 2)};
  CHECK(transform(zero, vec({4, -1, 7})).isZero(0.0));

  const VerbalizerModel hand{rows({vec({1, 1}), vec({0, 2})}), Matrix::Ones(1, 2)};
  CHECK(transform(hand, vec({3, 4})) == vec({7, 8}));

  CHECK_THROWS_AS(transform(hand, vec({1, 2, 3})), Error);
}

TEST_CASE("transform is linear") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  VerbalizerModel m{Matrix::NullaryExpr(3, 5, [&] { return g(rng); }), Matrix::Ones(2, 3)};
  const Vector a = Vector::NullaryExpr(5, [&] { return g(rng); });
  const Vector b = Vector::NullaryExpr(5, [&] { return g(rng); });
  CHECK(transform(m, 2.5 * a - 0.5 * b).isApprox(2.5 * transform(m, a) - 0.5 * transform(m, b), 1e-12));
}

TEST_CASE("cosine examples and degenerate input") {
  CHECK(cosine(vec({1, 0}), vec({1, 0})) == doctest::Approx(1.0));
  CHECK(cosine(vec({1, 0}), vec({0, 1})) == doctest::Approx(0.0));
  CHECK(cosine(vec({1, 0}), vec({-2, 0})) == doctest::Approx(-1.0));
  CHECK(cosine(vec({1, 2}), vec({3, -1})) == doctest::Approx(cosine(vec({3, -1}), vec({1, 2}))));
  try {
    cosine(vec({0, 0}), vec({1, 0}));
    FAIL("expected a degenerate-input error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Degenerate);
  }
}

TEST_CASE("instance-instance loss fixtures") {
  const Matrix protos = rows({vec({1, 0}), vec({0, 1})});
  const auto model = identity_model(2, protos);

  SUBCASE("same label, all similarities 1") {
    CHECK(loss_instance_instance(batch_of({vec({1, 0}), vec({2, 0})}, {0, 0}), model) == doctest::Approx(0.0));
  }
  SUBCASE("orthogonal pair with different labels") {
    const double ls = loss_instance_instance(batch_of({vec({1, 0}), vec({0, 1})}, {0, 1}), model);
    CHECK(std::abs(ls - 0.503205) <= 1e-6);
  }
  SUBCASE("single item") {
    CHECK(loss_instance_instance(batch_of({vec({1, 3})}, {1}), model) == 0.0);
  }
}

TEST_CASE("instance-prototype loss fixtures") {
  SUBCASE("one class") {
    const auto model = identity_model(2, rows({vec({1, 1})}));
    CHECK(loss_instance_prototype(batch_of({vec({1, 0})}, {0}), model) == doctest::Approx(0.0));
  }
  const auto model = identity_model(2, rows({vec({1, 0}), vec({0, 1})}));
  SUBCASE("two classes, true similarity 1") {
    const double l = loss_instance_prototype(batch_of({vec({1, 0})}, {0}), model);
    CHECK(std::abs(l - 0.313262) <= 1e-6);
  }
  SUBCASE("duplicated item keeps the mean") {
    const double l = loss_instance_prototype(batch_of({vec({1, 0}), vec({1, 0})}, {0, 0}), model);
    CHECK(l == doctest::Approx(kLogOnePlusInvE).epsilon(1e-12));
  }
}

TEST_CASE("prototype-instance loss fixtures") {
  const auto model = identity_model(2, rows({vec({1, 0}), vec({0, 1})}));
  SUBCASE("single item") {
    CHECK(loss_prototype_instance(batch_of({vec({0.3, 0.7})}, {1}), model) == doctest::Approx(0.0));
  }
  SUBCASE("two orthogonal items") {
    const double l = loss_prototype_instance(batch_of({vec({1, 0}), vec({0, 1})}, {0, 1}), model);
    CHECK(std::abs(l - 0.313262) <= 1e-6);
  }
  SUBCASE("one class only") {
    const double l =
        loss_prototype_instance(batch_of({vec({1, 0}), vec({0.2, 1}), vec({-1, 0.5}), vec({3, 3})}, {1, 1, 1, 1}), model);
    CHECK(l == doctest::Approx(0.0));
  }
}

TEST_CASE("total loss weighting") {
  LossParts parts{0.5, 0.3, 0.2};
  CHECK(parts.weighted({1, 1, 1}) == doctest::Approx(1.0));

  const auto model = identity_model(2, rows({vec({1, 0.2}), vec({-0.1, 1})}));
  const auto b = batch_of({vec({1, 0.4}), vec({0.3, 1}), vec({0.9, -0.2})}, {0, 1, 0});
  CHECK(total_loss(b, model, {1, 0, 0}) == doctest::Approx(loss_instance_instance(b, model)).epsilon(1e-14));
  CHECK(total_loss(b, model, {0, 1, 1}) ==
        doctest::Approx(loss_instance_prototype(b, model) + loss_prototype_instance(b, model)).epsilon(1e-14));
  CHECK_THROWS_AS(total_loss(b, model, {0, 0, 0}), Error);
  CHECK_THROWS_AS(total_loss(b, model, {-1, 1, 1}), Error);
}

TEST_CASE("class probabilities and classify") {
  SUBCASE("two classes, sims (1, 0)") {
    const auto model = identity_model(2, rows({vec({1, 0}), vec({0, 1})}));
    const Vector p = class_probabilities(model, vec({1, 0}));
    CHECK(std::abs(p[0] - 0.731059) <= 1e-6);
    CHECK(std::abs(p[1] - 0.268941) <= 1e-6);
    CHECK(classify(model, vec({1, 0})) == 0);
    CHECK(class_probabilities(model, vec({5, 0})).isApprox(p, 1e-15));
  }
  SUBCASE("three equal sims") {
    const auto model = identity_model(2, rows({at_cosine(0.4), at_cosine(0.4, -1), at_cosine(0.4)}));
    const Vector p = class_probabilities(model, vec({1, 0}));
    for (int k = 0; k < 3; ++k) CHECK(p[k] == doctest::Approx(1.0 / 3.0));
  }
  SUBCASE("argmax") {
    const auto model = identity_model(2, rows({at_cosine(0.2), at_cosine(0.9), at_cosine(0.1)}));
    CHECK(classify(model, vec({1, 0})) == 1);
  }
  SUBCASE("exact tie goes to the lowest index") {
    const auto model = identity_model(2, rows({at_cosine(0.5), at_cosine(0.5, -1)}));
    const Vector sims = prototype_similarities(model, vec({1, 0}));
    REQUIRE(sims[0] == sims[1]);
    CHECK(classify(model, vec({1, 0})) == 0);
  }
  SUBCASE("zero transformed input") {
    const VerbalizerModel model{Matrix::Zero(2, 2), rows({vec({1, 0}), vec({0, 1})})};
    CHECK_THROWS_AS(class_probabilities(model, vec({1, 1})), Error);
  }
  SUBCASE("temperature") {
    const auto model = identity_model(2, rows({vec({1, 0}), vec({0, 1})}));
    const Vector p = class_probabilities(model, vec({1, 0}), 0.5);
    CHECK(p[0] == doctest::Approx(std::exp(2.0) / (std::exp(2.0) + 1.0)));
  }
}

TEST_CASE("backward: constant loss has zero gradients") {
  const auto model = identity_model(2, rows({vec({1, 0.5})}));
  const auto b = batch_of({vec({1, 0}), vec({0.2, 1})}, {0, 0});
  const auto r = backward(b, model, {0, 1, 0});
  CHECK(r.loss == 0.0);
  CHECK(r.grads.d_transform.isZero(1e-15));
  CHECK(r.grads.d_prototypes.isZero(1e-15));
}

TEST_CASE("backward: forward value equals total_loss") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 50; ++t) {
    const auto inst = oracle::random_instance(rng, 6, 8, 4, 4);
    const LossWeights w{1.0, 0.5, 2.0};
    const double direct = total_loss(inst.batch, inst.model, w);
    CHECK(oracle::relative_diff(backward(inst.batch, inst.model, w).loss, direct) <= 1e-12);
  }
}

TEST_CASE("backward: duplicating the batch leaves the instance-prototype loss and gradient unchanged") {
  std::mt19937_64 rng(5);
  const auto inst = oracle::random_instance(rng, 5, 6, 3, 3);
  EmbeddingBatch twice;
  twice.inputs.resize(inst.batch.inputs.rows(), 2 * inst.batch.inputs.cols());
  twice.inputs << inst.batch.inputs, inst.batch.inputs;
  twice.labels = inst.batch.labels;
  twice.labels.insert(twice.labels.end(), inst.batch.labels.begin(), inst.batch.labels.end());
  const auto a = backward(inst.batch, inst.model, {0, 1, 0});
  const auto b = backward(twice, inst.model, {0, 1, 0});
  CHECK(oracle::relative_diff(a.loss, b.loss) <= 1e-12);
  CHECK(b.grads.d_transform.isApprox(a.grads.d_transform, 1e-12));
  CHECK(b.grads.d_prototypes.isApprox(a.grads.d_prototypes, 1e-12));
}

TEST_CASE("backward matches central finite differences on the fixed small instance") {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  VerbalizerModel model{Matrix::NullaryExpr(2, 4, [&] { return g(rng); }),
                        Matrix::NullaryExpr(2, 2, [&] { return g(rng); })};
  EmbeddingBatch b;
  b.inputs = Matrix::NullaryExpr(4, 3, [&] { return g(rng); });
  b.labels = {0, 1, 0};
  const LossWeights w{1, 1, 1};
  const auto analytic = backward(b, model, w);
  const auto numeric = oracle::finite_difference(model, [&](const VerbalizerModel& m) { return total_loss(b, m, w); });
  CHECK(oracle::max_relative_error(analytic.grads.d_transform, numeric.d_transform) <= 1e-5);
  CHECK(oracle::max_relative_error(analytic.grads.d_prototypes, numeric.d_prototypes) <= 1e-5);
}

TEST_CASE("production losses agree with the naive scalar oracle") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 200; ++t) {
    const auto inst = oracle::random_instance(rng, 6, 8, 4, 4);
    const auto o = oracle::from(inst.batch, inst.model);
    CHECK(oracle::relative_diff(loss_instance_instance(inst.batch, inst.model), oracle::loss_s(o)) <= 1e-10);
    CHECK(oracle::relative_diff(loss_instance_prototype(inst.batch, inst.model), oracle::loss_p1(o)) <= 1e-10);
    CHECK(oracle::relative_diff(loss_prototype_instance(inst.batch, inst.model), oracle::loss_p2(o)) <= 1e-10);
  }
}

TEST_CASE("loss properties on random instances") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int t = 0; t < 200; ++t) {
    auto inst = oracle::random_instance(rng, 6, 8, 4, 4);
    const auto parts = loss_parts(inst.batch, inst.model);
    CHECK(parts.instance_instance >= 0.0);
    CHECK(parts.instance_prototype >= 0.0);
    CHECK(parts.prototype_instance >= 0.0);

    // Reversal is one permutation; the acceptance suite covers random ones.
    EmbeddingBatch rev;
    rev.inputs = inst.batch.inputs.rowwise().reverse();
    rev.labels.assign(inst.batch.labels.rbegin(), inst.batch.labels.rend());
    const auto p2 = loss_parts(rev, inst.model);
    CHECK(oracle::relative_diff(parts.instance_instance, p2.instance_instance) <= 1e-12);
    CHECK(oracle::relative_diff(parts.instance_prototype, p2.instance_prototype) <= 1e-12);
    CHECK(oracle::relative_diff(parts.prototype_instance, p2.prototype_instance) <= 1e-12);

    EmbeddingBatch scaled = inst.batch;
    scaled.inputs *= scale(rng);
    const auto p3 = loss_parts(scaled, inst.model);
    CHECK(oracle::relative_diff(parts.instance_instance, p3.instance_instance) <= 1e-9);
    CHECK(oracle::relative_diff(parts.instance_prototype, p3.instance_prototype) <= 1e-9);
    CHECK(oracle::relative_diff(parts.prototype_instance, p3.prototype_instance) <= 1e-9);

    const Vector h = inst.batch.inputs.col(0);
    const Vector sims = prototype_similarities(inst.model, h);
    Eigen::Index best = 0;
    sims.maxCoeff(&best);
    CHECK(classify(inst.model, h) == static_cast<int>(best));
    // Scaling only preserves the argmax up to rounding, so near-ties are skipped.
    Vector rest = sims;
    rest[best] = -2.0;
    if (sims.size() == 1 || sims[best] - rest.maxCoeff() > 1e-9) {
      CHECK(classify(inst.model, 3.7 * h) == classify(inst.model, h));
    }
    CHECK(class_probabilities(inst.model, h).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("validation errors") {
  const auto model = identity_model(2, rows({vec({1, 0}), vec({0, 1})}));
  SUBCASE("label out of range") {
    CHECK_THROWS_AS(loss_instance_prototype(batch_of({vec({1, 0})}, {2}), model), Error);
  }
  SUBCASE("zero prototype") {
    const auto bad = identity_model(2, rows({vec({1, 0}), vec({0, 0})}));
    CHECK_THROWS_AS(loss_instance_prototype(batch_of({vec({1, 0})}, {0}), bad), Error);
    CHECK_THROWS_AS(bad.validate(), Error);
  }
  SUBCASE("zero transformed embedding") {
    const VerbalizerModel squash{rows({vec({1, 0}), vec({0, 0})}), rows({vec({1, 0}), vec({0, 1})})};
    try {
      loss_instance_instance(batch_of({vec({0, 1})}, {0}), squash);
      FAIL("expected degenerate input");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Degenerate);
    }
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(loss_parts(batch_of({vec({1, 0, 0})}, {0}), model), Error);
  }
  SUBCASE("parameter count") {
    const VerbalizerModel m{Matrix::Ones(256, 1024), Matrix::Ones(10, 256)};
    CHECK(m.parameter_count() == 264704);
  }
  SUBCASE("label space") {
    LabelSpace ls{{"a", "a"}, {}};
    CHECK_THROWS_AS(ls.validate(), Error);
    LabelSpace one{{"a"}, {}};
    CHECK_THROWS_AS(one.validate(2), Error);
    LabelSpace missing{{"a", "b"}, {{"x"}, {}}};
    CHECK_THROWS_AS(missing.validate(2, true), Error);
  }
}
