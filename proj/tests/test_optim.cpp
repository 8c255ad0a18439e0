#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include "protoverb/checkpoint.hpp"
#include "protoverb/error.hpp"
#include "protoverb/optim.hpp"

using namespace protoverb;

namespace {

VerbalizerModel scalar_model(double theta) {
  VerbalizerModel m;
  m.transform = Matrix::Constant(1, 1, theta);
  m.prototypes = Matrix::Constant(1, 1, theta);
  return m;
}

GradientSet scalar_grads(double g) {
  return {Matrix::Constant(1, 1, g), Matrix::Constant(1, 1, g)};
}

// Three well-separated Gaussian blobs in M=6.
EmbeddingBatch blobs(std::uint64_t seed, int per_class) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.15);
  EmbeddingBatch b;
  b.inputs.resize(6, 3 * per_class);
  Eigen::Index col = 0;
  for (int y = 0; y < 3; ++y) {
    for (int i = 0; i < per_class; ++i) {
      Vector v(6);
      for (Eigen::Index d = 0; d < 6; ++d) v[d] = g(rng);
      v[2 * y] += 1.0;
      v[2 * y + 1] += 1.0;
      b.inputs.col(col++) = v;
      b.labels.push_back(y);
    }
  }
  return b;
}

bool same_bytes(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("adamw single step example") {
  TrainState s(scalar_model(1.0));
  OptimConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.0;
  adamw_step(s, scalar_grads(0.5), cfg);
  CHECK(s.step == 1);
  CHECK(s.m_transform(0, 0) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(s.v_transform(0, 0) == doctest::Approx(0.00025).epsilon(1e-12));
  const double expected = 1.0 - 0.1 * 0.5 / (0.5 + 1e-8);
  CHECK(std::abs(s.model.transform(0, 0) - expected) <= 1e-12);
  CHECK(std::abs(s.model.prototypes(0, 0) - expected) <= 1e-12);
  CHECK(s.model.transform(0, 0) == doctest::Approx(0.9).epsilon(1e-7));
}

TEST_CASE("adamw zero gradient") {
  OptimConfig cfg;
  cfg.lr = 0.05;
  SUBCASE("no decay is the identity") {
    cfg.weight_decay = 0.0;
    TrainState s(scalar_model(0.7));
    for (int i = 0; i < 5; ++i) adamw_step(s, scalar_grads(0.0), cfg);
    CHECK(s.model.transform(0, 0) == 0.7);
    CHECK(s.model.prototypes(0, 0) == 0.7);
  }
  SUBCASE("decay acts alone") {
    cfg.weight_decay = 0.2;
    TrainState s(scalar_model(0.7));
    adamw_step(s, scalar_grads(0.0), cfg);
    CHECK(s.model.transform(0, 0) == doctest::Approx(0.7 * (1.0 - 0.05 * 0.2)).epsilon(1e-14));
    CHECK(s.model.prototypes(0, 0) == doctest::Approx(0.7 * (1.0 - 0.05 * 0.2)).epsilon(1e-14));
  }
}

TEST_CASE("adamw rejects mismatched or non-finite input") {
  TrainState s(scalar_model(1.0));
  OptimConfig cfg;
  GradientSet wrong{Matrix::Zero(2, 1), Matrix::Zero(1, 1)};
  CHECK_THROWS_AS(adamw_step(s, wrong, cfg), Error);
  cfg.lr = 1e308;
  cfg.weight_decay = 1e308;
  try {
    adamw_step(s, scalar_grads(1.0), cfg);
    FAIL("expected a numerical error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numerical);
  }
}

TEST_CASE("config validation") {
  OptimConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = OptimConfig{};
  cfg.lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = OptimConfig{};
  cfg.epochs = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("init_model shapes and ranges") {
  const auto m = init_model(16, 4, 3, 42);
  CHECK(m.transform.rows() == 4);
  CHECK(m.transform.cols() == 16);
  CHECK(m.prototypes.rows() == 3);
  CHECK(m.transform.cwiseAbs().maxCoeff() <= 0.25);
  for (Eigen::Index k = 0; k < 3; ++k) CHECK(m.prototypes.row(k).norm() == doctest::Approx(1.0).epsilon(1e-12));
  const auto again = init_model(16, 4, 3, 42);
  CHECK(same_bytes(m.transform, again.transform));
  CHECK(same_bytes(m.prototypes, again.prototypes));
  CHECK_FALSE(same_bytes(m.transform, init_model(16, 4, 3, 43).transform));
}

TEST_CASE("train") {
  const auto data = blobs(3, 12);
  const auto initial = init_model(6, 4, 3, 9);
  OptimConfig cfg;
  cfg.lr = 1e-2;
  cfg.seed = 5;

  SUBCASE("zero epochs returns the model unchanged") {
    cfg.epochs = 0;
    const auto r = train(data, initial, {}, cfg);
    CHECK(same_bytes(r.model.transform, initial.transform));
    CHECK(same_bytes(r.model.prototypes, initial.prototypes));
    CHECK(r.batch_losses.empty());
  }
  SUBCASE("same seed is bit-identical") {
    const auto a = train(data, initial, {}, cfg);
    const auto b = train(data, initial, {}, cfg);
    CHECK(same_bytes(a.model.transform, b.model.transform));
    CHECK(same_bytes(a.model.prototypes, b.model.prototypes));
    CHECK(a.batch_losses == b.batch_losses);
    cfg.seed = 6;
    const auto c = train(data, initial, {}, cfg);
    CHECK_FALSE(same_bytes(a.model.transform, c.model.transform));
  }
  SUBCASE("batch accounting") {
    cfg.epochs = 2;
    cfg.batch_size = 8;
    const auto r = train(data, initial, {}, cfg);
    CHECK(r.batch_losses.size() == 2 * 5);  // 36 items: 4 full batches and one of 4
    CHECK(r.epoch_mean_losses.size() == 2);
    for (double l : r.batch_losses) CHECK(std::isfinite(l));
  }
  SUBCASE("loss decreases on separable data") {
    const auto r = train(data, initial, {}, cfg);
    REQUIRE(r.epoch_mean_losses.size() == 10);
    CHECK(r.epoch_mean_losses.back() < r.epoch_mean_losses.front());
    int correct = 0;
    for (Eigen::Index i = 0; i < data.inputs.cols(); ++i) {
      correct += classify(r.model, data.inputs.col(i)) == data.labels[static_cast<std::size_t>(i)];
    }
    CHECK(correct == data.inputs.cols());
  }
  SUBCASE("errors") {
    EmbeddingBatch empty;
    empty.inputs.resize(6, 0);
    CHECK_THROWS_AS(train(empty, initial, {}, cfg), Error);
    auto bad = data;
    bad.labels[0] = 3;
    CHECK_THROWS_AS(train(bad, initial, {}, cfg), Error);
  }
}

TEST_CASE("pretrain prototypes") {
  const auto initial = init_model(3, 2, 2, 1);
  OptimConfig cfg;
  cfg.epochs = 0;
  Vector a(3), b(3);
  a << 1.0, 0.5, -0.2;
  b << -0.3, 1.0, 0.8;

  SUBCASE("one embedding per class") {
    const auto r = pretrain_prototypes({{a}, {b}}, initial, {}, cfg);
    const Vector ua = (initial.transform * a).normalized();
    const Vector ub = (initial.transform * b).normalized();
    CHECK((r.model.prototypes.row(0).transpose() - ua).norm() <= 1e-14);
    CHECK((r.model.prototypes.row(1).transpose() - ub).norm() <= 1e-14);
    CHECK(same_bytes(r.model.transform, initial.transform));
  }
  SUBCASE("duplicates are idempotent") {
    const Matrix once = mean_prototypes({{a}, {b}}, initial.transform);
    const Matrix twice = mean_prototypes({{a, a}, {b}}, initial.transform);
    CHECK((once - twice).norm() <= 1e-14);
  }
  SUBCASE("an empty class names itself") {
    try {
      pretrain_prototypes({{a}, {}}, initial, {}, cfg);
      FAIL("expected a config error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Config);
      CHECK(std::string(e.what()).find('1') != std::string::npos);
    }
  }
  SUBCASE("phase two trains") {
    cfg.epochs = 3;
    cfg.lr = 1e-2;
    const auto r = pretrain_prototypes({{a, a}, {b, b}}, initial, {}, cfg);
    CHECK_FALSE(r.batch_losses.empty());
    CHECK_FALSE(same_bytes(r.model.transform, initial.transform));
  }
}

TEST_CASE("checkpoint round trip") {
  Checkpoint ck;
  ck.model = init_model(5, 3, 2, 77);
  ck.model.transform(0, 0) = 0.1;  // not exactly representable in decimal
  ck.label_names = {"alpha", "beta"};
  ck.config = {{"seed", 77}, {"k", 4}};
  const auto dir = std::filesystem::temp_directory_path() / "protoverb_test_optim";
  std::filesystem::remove_all(dir);
  const auto path = dir / "sub" / "ck.json";
  save_checkpoint(ck, path);
  CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  const auto back = load_checkpoint(path);
  CHECK(same_bytes(back.model.transform, ck.model.transform));
  CHECK(same_bytes(back.model.prototypes, ck.model.prototypes));
  CHECK(back.label_names == ck.label_names);
  CHECK(back.config == ck.config);

  auto j = checkpoint_to_json(ck);
  j["format_version"] = 99;
  CHECK_THROWS_AS(checkpoint_from_json(j), Error);
  j = checkpoint_to_json(ck);
  j["W"].erase(j["W"].begin());
  CHECK_THROWS_AS(checkpoint_from_json(j), Error);
  j = checkpoint_to_json(ck);
  j["labels"] = {"only"};
  CHECK_THROWS_AS(checkpoint_from_json(j), Error);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.json"), Error);
  std::filesystem::remove_all(dir);
}
