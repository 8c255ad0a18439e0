#include "protoverb/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "protoverb/episodes.hpp"
#include "protoverb/error.hpp"

namespace protoverb {

using nlohmann::json;

double micro_f1(std::span<const int> predicted, std::span<const int> gold, std::size_t num_classes) {
  if (predicted.size() != gold.size()) {
    fail(ErrorKind::Shape, "micro-F1 over " + std::to_string(predicted.size()) + " predictions and " +
                               std::to_string(gold.size()) + " gold labels");
  }
  if (gold.empty()) fail(ErrorKind::Degenerate, "micro-F1 of an empty set");
  std::vector<std::size_t> tp(num_classes), fp(num_classes), fn(num_classes);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    for (int v : {predicted[i], gold[i]}) {
      if (v < 0 || static_cast<std::size_t>(v) >= num_classes) {
        fail(ErrorKind::Config, "label " + std::to_string(v) + " at position " + std::to_string(i) +
                                    " is outside [0, " + std::to_string(num_classes) + ")");
      }
    }
    const auto p = static_cast<std::size_t>(predicted[i]);
    const auto g = static_cast<std::size_t>(gold[i]);
    if (p == g) {
      ++tp[g];
    } else {
      ++fp[p];
      ++fn[g];
    }
  }
  const auto sum = [](const std::vector<std::size_t>& v) {
    return static_cast<double>(std::accumulate(v.begin(), v.end(), std::size_t{0}));
  };
  const double t = sum(tp), f_pos = sum(fp), f_neg = sum(fn);
  const double precision = t + f_pos > 0 ? t / (t + f_pos) : 0.0;
  const double recall = t + f_neg > 0 ? t / (t + f_neg) : 0.0;
  return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

Aggregate aggregate(std::span<const double> values) {
  if (values.empty()) fail(ErrorKind::Degenerate, "cannot aggregate an empty list");
  // Sorted summation keeps the result independent of input order.
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  Aggregate a;
  a.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : sorted) ss += (v - a.mean) * (v - a.mean);
  a.std = std::sqrt(ss / n);
  a.max = sorted.back();
  return a;
}

std::uint64_t count_params(std::int64_t input_dim, std::int64_t proto_dim, std::int64_t num_classes, HeadKind head) {
  if (input_dim < 1 || num_classes < 1 || (head == HeadKind::Ppv && proto_dim < 1)) {
    fail(ErrorKind::Config, "parameter counts need positive dimensions");
  }
  const auto m = static_cast<std::uint64_t>(input_dim);
  const auto k = static_cast<std::uint64_t>(num_classes);
  if (head == HeadKind::Spv) return m * k;
  const auto d = static_cast<std::uint64_t>(proto_dim);
  return m * d + k * d;
}

std::vector<int> predict(const VerbalizerModel& model, std::span<const MaskEmbedding> items) {
  std::vector<int> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(classify(model, item.vector));
  return out;
}

double evaluate(const VerbalizerModel& model, std::span<const MaskEmbedding> items) {
  std::vector<int> gold;
  gold.reserve(items.size());
  for (const auto& item : items) {
    if (!item.label) fail(ErrorKind::Config, "test embedding '" + item.id + "' has no label");
    gold.push_back(*item.label);
  }
  const auto pred = predict(model, items);
  return micro_f1(pred, gold, static_cast<std::size_t>(model.num_classes()));
}

namespace {

double round6(double x) { return std::round(x * 1e6) / 1e6; }

json lambda_json(const LossWeights& w) {
  return json::array({round6(w.instance_instance), round6(w.instance_prototype), round6(w.prototype_instance)});
}

}  // namespace

Aggregate RunReport::summary() const {
  std::vector<double> f1;
  for (const auto& r : runs) f1.push_back(r.micro_f1);
  return aggregate(f1);
}

json RunReport::to_json() const {
  json j;
  j["config"] = config;
  j["runs"] = json::array();
  for (const auto& r : runs) {
    j["runs"].push_back({{"seed", r.seed},
                         {"template", r.template_index},
                         {"k", r.k},
                         {"lambda", lambda_json(r.lambda)},
                         {"micro_f1", round6(r.micro_f1)}});
  }
  if (!runs.empty()) {
    const auto a = summary();
    j["aggregate"] = {{"mean", round6(a.mean)}, {"std", round6(a.std)}, {"max", round6(a.max)}};
  } else {
    j["aggregate"] = nullptr;
  }
  j["timing"] = wall_clock_seconds ? json{{"wall_clock_seconds", round6(*wall_clock_seconds)}}
                                   : json{{"wall_clock_seconds", nullptr}};
  return j;
}

std::string RunReport::dump() const { return to_json().dump(2) + "\n"; }

EpisodeOutcome run_episode(const Experiment& exp, const LossWeights& w) {
  if (exp.train_pool.empty()) fail(ErrorKind::Config, "empty training pool");
  if (exp.test.empty()) fail(ErrorKind::Config, "empty test set");
  if (exp.k < 1) fail(ErrorKind::Config, "k-shot training needs k >= 1; zero-shot is pretraining plus evaluation");
  std::vector<int> pool_labels;
  for (const auto& item : exp.train_pool) {
    if (!item.label) fail(ErrorKind::Config, "training embedding '" + item.id + "' has no label");
    pool_labels.push_back(*item.label);
  }
  const auto picked = k_shot_indices(pool_labels, exp.num_classes, exp.k, exp.seed);
  const auto data = EmbeddingBatch::from(exp.train_pool, picked);

  VerbalizerModel initial = exp.init ? *exp.init
                                     : init_model(data.input_dim(), exp.proto_dim,
                                                  static_cast<Eigen::Index>(exp.num_classes), exp.seed);
  OptimConfig cfg = exp.optim;
  cfg.seed = exp.seed;
  auto trained = train(data, initial, w, cfg);

  EpisodeOutcome out;
  out.record = {exp.seed, exp.template_index, exp.k, w, evaluate(trained.model, exp.test)};
  out.model = std::move(trained.model);
  out.epoch_losses = std::move(trained.epoch_mean_losses);
  return out;
}

std::vector<LossWeights> canonical_ablation_combos() {
  return {{1, 0, 0}, {0, 1, 1}, {1, 1, 0}, {1, 0, 1}, {1, 1, 1}};
}

std::string combo_name(const LossWeights& w) {
  std::string out;
  const auto add = [&](double lambda, const char* name) {
    if (lambda == 0.0) return;
    if (!out.empty()) out += "+";
    if (lambda != 1.0) out += json(lambda).dump() + "*";
    out += name;
  };
  add(w.instance_instance, "Ls");
  add(w.instance_prototype, "Lp1");
  add(w.prototype_instance, "Lp2");
  return out;
}

std::vector<RunReport> ablation_sweep(const Experiment& exp, std::span<const LossWeights> combos) {
  std::vector<RunReport> out;
  for (const auto& w : combos) {
    w.validate();
    RunReport report;
    report.config = {{"combo", combo_name(w)}};
    report.runs.push_back(run_episode(exp, w).record);
    out.push_back(std::move(report));
  }
  return out;
}

EmbeddingStore dump_embeddings(const VerbalizerModel& model, std::span<const MaskEmbedding> items,
                               const std::vector<std::string>& label_names) {
  if (static_cast<Eigen::Index>(label_names.size()) != model.num_classes()) {
    fail(ErrorKind::Config, "dump needs one name per class");
  }
  EmbeddingStore out;
  out.dim = static_cast<int>(model.proto_dim());
  out.source = "protoverb-dump";
  for (const auto& item : items) out.add({item.id, transform(model, item.vector), item.label});
  for (Eigen::Index k = 0; k < model.num_classes(); ++k) {
    out.add({"proto:" + label_names[static_cast<std::size_t>(k)], model.prototypes.row(k).transpose(),
             static_cast<int>(k)});
  }
  return out;
}

}  // namespace protoverb
