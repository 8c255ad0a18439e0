#include "protoverb/cli.hpp"

#include <chrono>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "protoverb/checkpoint.hpp"
#include "protoverb/encode.hpp"
#include "protoverb/episodes.hpp"
#include "protoverb/error.hpp"
#include "protoverb/eval.hpp"
#include "protoverb/io.hpp"
#include "protoverb/log.hpp"
#include "protoverb/optim.hpp"
#include "protoverb/templating.hpp"

namespace protoverb::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kDefaultTemplates =
    "# One pattern per line: exactly one [MASK] and one [SENTENCE].\n"
    "[Category: [MASK]] [SENTENCE]\n"
    "[SENTENCE] Topic: [MASK].\n"
    "A [MASK] item: [SENTENCE]\n"
    "[SENTENCE] This text is about [MASK].\n";

// Flags shared by every command that trains.
struct TrainFlags {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;
  std::optional<double> lr;
  int epochs = 10;
  int batch_size = 8;
  double weight_decay = 0.01;

  void add_to(CLI::App& app) {
    app.add_option("--lambda1", lambda1, "Weight of the instance-instance loss")->capture_default_str();
    app.add_option("--lambda2", lambda2, "Weight of the instance-prototype loss")->capture_default_str();
    app.add_option("--lambda3", lambda3, "Weight of the prototype-instance loss")->capture_default_str();
    app.add_option("--lr", lr, "AdamW learning rate (default 1e-2 with the toy encoder, 3e-5 otherwise)");
    app.add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app.add_option("--batch-size", batch_size, "Mini-batch size")->capture_default_str();
    app.add_option("--weight-decay", weight_decay, "Decoupled weight decay")->capture_default_str();
  }

  LossWeights weights() const {
    LossWeights w{lambda1, lambda2, lambda3};
    w.validate();
    return w;
  }

  OptimConfig optim(bool toy, std::uint64_t seed) const {
    OptimConfig cfg;
    cfg.lr = lr.value_or(toy ? kToyEncoderLr : OptimConfig{}.lr);
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.weight_decay = weight_decay;
    cfg.seed = seed;
    cfg.validate();
    return cfg;
  }
};

json echo(const OptimConfig& cfg, const LossWeights& w) {
  return {{"lr", cfg.lr},
          {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"weight_decay", cfg.weight_decay},
          {"seed", cfg.seed},
          {"lambda", {w.instance_instance, w.instance_prototype, w.prototype_instance}}};
}

EncoderKind parse_encoder(const std::string& name) {
  if (name == "toy") return EncoderKind::Toy;
  if (name == "precomputed") return EncoderKind::Precomputed;
  fail(ErrorKind::Usage, "--encoder must be toy or precomputed");
}

// Output path for one seed of a fan-out: unchanged for a single seed,
// otherwise "<stem>.seed<N><ext>".
fs::path seed_path(const fs::path& out, std::uint64_t seed, bool fan_out) {
  if (!fan_out) return out;
  fs::path p = out.parent_path() / out.stem();
  p += ".seed" + std::to_string(seed);
  p += out.extension();
  return p;
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

// Filled texts for an external encoder plus a label sidecar "<out>.labels".
void write_export_inputs(const fs::path& out, const std::vector<std::string>& texts, const std::vector<int>& labels) {
  std::string body, label_body;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    body += one_line(texts[i]) + "\n";
    label_body += std::to_string(labels[i]) + "\n";
  }
  io::write_atomic(out, body);
  fs::path sidecar = out;
  sidecar += ".labels";
  io::write_atomic(sidecar, label_body);
}

LabelSpace read_labels(const std::string& labels_path, const std::string& words_path) {
  if (labels_path.empty()) fail(ErrorKind::Usage, "--labels is required");
  auto labels = load_label_space(labels_path);
  if (!words_path.empty()) load_label_words(words_path, labels);
  return labels;
}

void check_labels(const EmbeddingStore& store, std::size_t k, const std::string& path) {
  for (const auto& r : store.records) {
    if (!r.label) fail(ErrorKind::Parse, path + ": record '" + r.id + "' has no label");
    if (*r.label < 0 || static_cast<std::size_t>(*r.label) >= k) {
      fail(ErrorKind::Parse, path + ": record '" + r.id + "' has label " + std::to_string(*r.label) +
                                 " outside [0, " + std::to_string(k) + ")");
    }
  }
}

class Commands {
 public:
  Commands(std::ostream& out) : out_(out) {}

  void setup(CLI::App& app) {
    app.require_subcommand(1);
    setup_synth(app);
    setup_encode(app);
    setup_pretrain(app);
    setup_train(app);
    setup_eval(app);
    setup_ablate(app);
    setup_params(app);
    setup_dump(app);
  }

 private:
  // synth -------------------------------------------------------------------
  struct {
    std::string out;
    std::uint64_t seed = 0;
    SynthConfig cfg;
  } synth_;

  void setup_synth(CLI::App& app) {
    auto* c = app.add_subcommand("synth", "Write a synthetic dataset, corpus, label file and templates");
    c->add_option("--out", synth_.out, "Output directory")->required();
    c->add_option("--seed", synth_.seed, "Generator seed")->capture_default_str();
    c->add_option("--classes", synth_.cfg.classes, "Number of classes")->capture_default_str();
    c->add_option("--train-per-class", synth_.cfg.train_per_class, "Training items per class")->capture_default_str();
    c->add_option("--test-size", synth_.cfg.test_size, "Test items")->capture_default_str();
    c->add_option("--corpus-docs", synth_.cfg.corpus_docs, "Unlabelled corpus documents")->capture_default_str();
    c->add_option("--noise", synth_.cfg.noise, "Signal-token noise rate in [0, 1]")->capture_default_str();
    c->callback([this] { cmd_synth(); });
  }

  void cmd_synth() {
    synth_.cfg.seed = synth_.seed;
    const auto data = synth_generate(synth_.cfg);
    const fs::path dir(synth_.out);
    io::write_atomic(dir / "train.csv", format_dataset_csv(data.train));
    io::write_atomic(dir / "test.csv", format_dataset_csv(data.test));
    std::string corpus;
    for (const auto& doc : data.corpus) corpus += doc + "\n";
    io::write_atomic(dir / "corpus.txt", corpus);
    io::write_atomic(dir / "labels.json", format_label_space(data.labels));
    io::write_atomic(dir / "templates.txt", kDefaultTemplates);
    out_ << "wrote " << data.train.records.size() << " train, " << data.test.records.size() << " test, "
         << data.corpus.size() << " corpus documents to " << dir.string() << "\n";
  }

  // encode ------------------------------------------------------------------
  struct {
    std::string dataset, schema = "label=0;text=1", labels, template_file, encoder = "toy", out;
    int template_index = 0;
    int dim_m = 512;
    std::uint64_t encoder_seed = EncoderSpec{}.seed;
  } encode_;

  void setup_encode(CLI::App& app) {
    auto* c = app.add_subcommand("encode", "Apply a template and encoder to a dataset");
    c->add_option("--dataset", encode_.dataset, "Delimited dataset file")->required();
    c->add_option("--schema", encode_.schema, "Column schema, e.g. label=0;text=1,2;one_based=true")->capture_default_str();
    c->add_option("--labels", encode_.labels, "Label space JSON")->required();
    c->add_option("--template-file", encode_.template_file, "Template file")->required();
    c->add_option("--template-index", encode_.template_index, "Template to apply")->capture_default_str();
    c->add_option("--encoder", encode_.encoder, "toy writes embeddings; precomputed writes filled texts for export")
        ->check(CLI::IsMember({"toy", "precomputed"}))
        ->capture_default_str();
    c->add_option("--dim-m", encode_.dim_m, "Toy encoder output dimension")->capture_default_str();
    c->add_option("--encoder-seed", encode_.encoder_seed, "Toy encoder hash seed")->capture_default_str();
    c->add_option("--out", encode_.out, "Embedding file (toy) or text file (precomputed)")->required();
    c->callback([this] { cmd_encode(); });
  }

  void cmd_encode() {
    const auto labels = read_labels(encode_.labels, "");
    const auto templates = load_templates(encode_.template_file);
    if (encode_.template_index < 0 || static_cast<std::size_t>(encode_.template_index) >= templates.size()) {
      fail(ErrorKind::Usage, "--template-index " + std::to_string(encode_.template_index) + " out of range (file has " +
                                 std::to_string(templates.size()) + ")");
    }
    const auto& tpl = templates[static_cast<std::size_t>(encode_.template_index)];
    const auto ds = load_dataset(encode_.dataset, DatasetSchema::parse(encode_.schema), labels.size());

    std::vector<std::string> texts;
    for (const auto& r : ds.records) texts.push_back(fill_template(tpl, r.text));

    if (parse_encoder(encode_.encoder) == EncoderKind::Precomputed) {
      write_export_inputs(encode_.out, texts, ds.labels());
      out_ << "wrote " << texts.size() << " filled texts to " << encode_.out << "\n";
      return;
    }
    EncoderSpec spec;
    spec.dim = encode_.dim_m;
    spec.seed = encode_.encoder_seed;
    const ToyEncoder encoder(spec);
    EmbeddingStore store;
    store.dim = spec.dim;
    store.source = "toy:seed=" + std::to_string(spec.seed) + ";template=" + std::to_string(encode_.template_index);
    for (std::size_t i = 0; i < texts.size(); ++i) {
      store.add({std::to_string(i), encoder.encode(texts[i]), ds.records[i].label});
    }
    save_embeddings(store, encode_.out);
    out_ << "wrote " << store.records.size() << " embeddings (M=" << store.dim << ") to " << encode_.out << "\n";
  }

  // pretrain ----------------------------------------------------------------
  struct {
    std::string corpus, labels, label_words, encoder = "toy", embeddings, out;
    int q = 30;
    std::vector<std::uint64_t> seeds{0};
    int dim_m = 512;
    int dim_d = 256;
    std::uint64_t encoder_seed = EncoderSpec{}.seed;
    TrainFlags train;
  } pre_;

  void setup_pretrain(CLI::App& app) {
    auto* c = app.add_subcommand("pretrain", "Zero-shot prototype pretraining from keyword sentences");
    c->add_option("--corpus", pre_.corpus, "Unlabelled corpus, one document per line");
    c->add_option("--labels", pre_.labels, "Label space JSON")->required();
    c->add_option("--label-words", pre_.label_words, "Override label words: one line per class");
    c->add_option("--q", pre_.q, "Sentences sampled per label")->capture_default_str();
    c->add_option("--seed", pre_.seeds, "Seed list, e.g. 1,2,3")->delimiter(',');
    c->add_option("--encoder", pre_.encoder, "toy or precomputed")
        ->check(CLI::IsMember({"toy", "precomputed"}))
        ->capture_default_str();
    c->add_option("--embeddings", pre_.embeddings, "Precomputed embeddings of the filled pretraining texts");
    c->add_option("--dim-m", pre_.dim_m, "Toy encoder output dimension")->capture_default_str();
    c->add_option("--dim-d", pre_.dim_d, "Prototype space dimension")->capture_default_str();
    c->add_option("--encoder-seed", pre_.encoder_seed, "Toy encoder hash seed")->capture_default_str();
    c->add_option("--out", pre_.out, "Checkpoint (or filled-text file when exporting)")->required();
    pre_.train.add_to(*c);
    c->callback([this, c] { cmd_pretrain(*c); });
  }

  void cmd_pretrain(const CLI::App& c) {
    const bool toy = parse_encoder(pre_.encoder) == EncoderKind::Toy;
    if (toy && !pre_.embeddings.empty()) fail(ErrorKind::Usage, "--embeddings conflicts with --encoder toy");
    if (!toy && !pre_.embeddings.empty() && c.count("--dim-m") > 0) {
      fail(ErrorKind::Usage, "--dim-m conflicts with --embeddings (M comes from the file)");
    }
    auto labels = read_labels(pre_.labels, pre_.label_words);
    labels.validate(2, true);
    const auto weights = pre_.train.weights();
    const bool fan_out = pre_.seeds.size() > 1;

    if (!toy && !pre_.embeddings.empty()) {
      if (fan_out) fail(ErrorKind::Usage, "precomputed pretraining takes a single --seed");
      const auto store = load_embeddings(pre_.embeddings);
      check_labels(store, labels.size(), pre_.embeddings);
      std::vector<std::vector<Vector>> per_class(labels.size());
      for (const auto& r : store.records) per_class[static_cast<std::size_t>(*r.label)].push_back(r.vector);
      pretrain_one(per_class, labels, weights, pre_.seeds.front(), store.dim, false, pre_.out, 0);
      return;
    }

    if (pre_.corpus.empty()) fail(ErrorKind::Usage, "--corpus is required");
    PretrainSampleSpec spec;
    spec.per_label = pre_.q;
    spec.corpus = pre_.corpus;
    for (const auto seed : pre_.seeds) {
      const auto sample = sample_keyword_sentences(spec, labels, seed);
      std::vector<std::vector<std::string>> texts(labels.size());
      std::size_t sampled = 0;
      for (std::size_t y = 0; y < labels.size(); ++y) {
        for (const auto& ks : sample.per_label[y]) texts[y].push_back(fill_pretrain_template(ks.sentence, ks.word));
        sampled += texts[y].size();
      }
      log::info("seed {}: sampled {} pretraining sentences", seed, sampled);

      if (!toy) {
        std::vector<std::string> flat;
        std::vector<int> flat_labels;
        for (std::size_t y = 0; y < texts.size(); ++y) {
          for (auto& t : texts[y]) {
            flat.push_back(t);
            flat_labels.push_back(static_cast<int>(y));
          }
        }
        const auto path = seed_path(pre_.out, seed, fan_out);
        write_export_inputs(path, flat, flat_labels);
        out_ << "wrote " << flat.size() << " pretraining texts to " << path.string() << "\n";
        continue;
      }
      EncoderSpec es;
      es.dim = pre_.dim_m;
      es.seed = pre_.encoder_seed;
      const ToyEncoder encoder(es);
      std::vector<std::vector<Vector>> per_class(labels.size());
      for (std::size_t y = 0; y < texts.size(); ++y) {
        for (const auto& t : texts[y]) per_class[y].push_back(encoder.encode(t));
      }
      pretrain_one(per_class, labels, weights, seed, es.dim, true, seed_path(pre_.out, seed, fan_out), sampled);
    }
  }

  void pretrain_one(const std::vector<std::vector<Vector>>& per_class, const LabelSpace& labels,
                    const LossWeights& weights, std::uint64_t seed, int dim_m, bool toy, const fs::path& path,
                    std::size_t sampled) {
    const auto cfg = pre_.train.optim(toy, seed);
    const auto initial = init_model(dim_m, pre_.dim_d, static_cast<Eigen::Index>(labels.size()), seed);
    auto result = pretrain_prototypes(per_class, initial, weights, cfg);
    Checkpoint ckpt{std::move(result.model), labels.names, echo(cfg, weights)};
    ckpt.config["stage"] = "pretrain";
    ckpt.config["k"] = 0;
    ckpt.config["template"] = 0;
    ckpt.config["q"] = pre_.q;
    if (toy) ckpt.config["sampled_sentences"] = sampled;
    save_checkpoint(ckpt, path);
    out_ << "wrote pretrained checkpoint " << path.string() << "\n";
  }

  // train -------------------------------------------------------------------
  struct {
    std::string embeddings, labels, checkpoint, out;
    int k = 20;
    int template_index = 0;
    int dim_d = 256;
    std::string encoder = "toy";
    std::vector<std::uint64_t> seeds{0};
    TrainFlags train;
  } train_;

  void setup_train(CLI::App& app) {
    auto* c = app.add_subcommand("train", "k-shot training on an embedding file");
    c->add_option("--embeddings", train_.embeddings, "Labelled training pool")->required();
    c->add_option("--labels", train_.labels, "Label space JSON")->required();
    c->add_option("--k", train_.k, "Shots per class (>= 1)")->capture_default_str();
    c->add_option("--seed", train_.seeds, "Seed list, e.g. 1,2,3")->delimiter(',');
    c->add_option("--checkpoint", train_.checkpoint, "Initial (e.g. pretrained) checkpoint");
    c->add_option("--dim-d", train_.dim_d, "Prototype space dimension for a fresh model")->capture_default_str();
    c->add_option("--template-index", train_.template_index, "Template the embeddings were made with")
        ->capture_default_str();
    c->add_option("--encoder", train_.encoder, "Selects the default learning rate")
        ->check(CLI::IsMember({"toy", "precomputed"}))
        ->capture_default_str();
    c->add_option("--out", train_.out, "Output checkpoint")->required();
    train_.train.add_to(*c);
    c->callback([this, c] { cmd_train(*c); });
  }

  void cmd_train(const CLI::App& c) {
    if (train_.k < 1) {
      fail(ErrorKind::Usage, "--k must be at least 1; zero-shot runs use pretrain followed by eval");
    }
    if (!train_.checkpoint.empty() && c.count("--dim-d") > 0) {
      fail(ErrorKind::Usage, "--dim-d conflicts with --checkpoint (D comes from the checkpoint)");
    }
    const auto labels = read_labels(train_.labels, "");
    const auto weights = train_.train.weights();
    const auto store = load_embeddings(train_.embeddings);
    check_labels(store, labels.size(), train_.embeddings);
    std::optional<VerbalizerModel> init;
    if (!train_.checkpoint.empty()) {
      auto ckpt = load_checkpoint(train_.checkpoint);
      if (ckpt.label_names != labels.names) fail(ErrorKind::Config, train_.checkpoint + ": label names differ from --labels");
      init = std::move(ckpt.model);
    }
    const bool toy = parse_encoder(train_.encoder) == EncoderKind::Toy;
    const bool fan_out = train_.seeds.size() > 1;
    std::vector<int> pool_labels;
    for (const auto& r : store.records) pool_labels.push_back(*r.label);
    for (const auto seed : train_.seeds) {
      const auto cfg = train_.train.optim(toy, seed);
      const auto picked = k_shot_indices(pool_labels, labels.size(), train_.k, seed);
      const auto data = EmbeddingBatch::from(store.records, picked);
      const auto initial = init ? *init
                                : init_model(data.input_dim(), train_.dim_d,
                                             static_cast<Eigen::Index>(labels.size()), seed);
      auto result = protoverb::train(data, initial, weights, cfg);

      Checkpoint ckpt{std::move(result.model), labels.names, echo(cfg, weights)};
      ckpt.config["stage"] = "train";
      ckpt.config["k"] = train_.k;
      ckpt.config["template"] = train_.template_index;
      ckpt.config["pretrained"] = !train_.checkpoint.empty();
      const auto path = seed_path(train_.out, seed, fan_out);
      save_checkpoint(ckpt, path);
      out_ << "seed " << seed << ": trained on " << data.size() << " items, final epoch loss "
           << (result.epoch_mean_losses.empty() ? 0.0 : result.epoch_mean_losses.back()) << ", wrote "
           << path.string() << "\n";
    }
  }

  // eval --------------------------------------------------------------------
  struct {
    std::vector<std::string> checkpoints;
    std::string embeddings, out;
    std::optional<int> template_index;
    bool record_timing = false;
  } eval_;

  void setup_eval(CLI::App& app) {
    auto* c = app.add_subcommand("eval", "Score checkpoints on a labelled embedding file");
    c->add_option("--checkpoint", eval_.checkpoints, "Checkpoint list, comma separated")->required()->delimiter(',');
    c->add_option("--embeddings", eval_.embeddings, "Labelled test embeddings")->required();
    c->add_option("--template-index", eval_.template_index, "Template recorded in the report (default: checkpoint's)");
    c->add_option("--out", eval_.out, "Report JSON")->required();
    c->add_flag("--record-timing", eval_.record_timing, "Add wall-clock seconds to the report");
    c->callback([this] { cmd_eval(); });
  }

  void cmd_eval() {
    const auto start = std::chrono::steady_clock::now();
    const auto store = load_embeddings(eval_.embeddings);
    RunReport report;
    report.config = {{"command", "eval"}, {"embeddings", eval_.embeddings}, {"checkpoints", eval_.checkpoints}};
    for (const auto& path : eval_.checkpoints) {
      const auto ckpt = load_checkpoint(path);
      check_labels(store, ckpt.label_names.size(), eval_.embeddings);
      RunRecord rec;
      const auto& cfg = ckpt.config;
      rec.seed = cfg.value("seed", std::uint64_t{0});
      rec.k = cfg.value("k", 0);
      rec.template_index = eval_.template_index.value_or(cfg.value("template", 0));
      if (cfg.contains("lambda") && cfg["lambda"].is_array() && cfg["lambda"].size() == 3) {
        rec.lambda = {cfg["lambda"][0].get<double>(), cfg["lambda"][1].get<double>(), cfg["lambda"][2].get<double>()};
      }
      rec.micro_f1 = evaluate(ckpt.model, store.records);
      out_ << path << ": micro-F1 " << rec.micro_f1 << "\n";
      report.runs.push_back(rec);
    }
    if (eval_.record_timing) {
      report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    io::write_atomic(eval_.out, report.dump());
  }

  // ablate ------------------------------------------------------------------
  struct {
    std::string embeddings, test_embeddings, labels, checkpoint, out, encoder = "toy";
    int k = 20;
    int template_index = 0;
    int dim_d = 256;
    std::vector<std::uint64_t> seeds{0};
    TrainFlags train;
  } ablate_;

  void setup_ablate(CLI::App& app) {
    auto* c = app.add_subcommand("ablate", "Loss-combination sweep over one episode per seed");
    c->add_option("--embeddings", ablate_.embeddings, "Labelled training pool")->required();
    c->add_option("--test-embeddings", ablate_.test_embeddings, "Labelled test embeddings")->required();
    c->add_option("--labels", ablate_.labels, "Label space JSON")->required();
    c->add_option("--k", ablate_.k, "Shots per class")->capture_default_str();
    c->add_option("--seed", ablate_.seeds, "Seed list")->delimiter(',');
    c->add_option("--checkpoint", ablate_.checkpoint, "Initial checkpoint shared by every combination");
    c->add_option("--dim-d", ablate_.dim_d, "Prototype space dimension for a fresh model")->capture_default_str();
    c->add_option("--template-index", ablate_.template_index, "Template the embeddings were made with")
        ->capture_default_str();
    c->add_option("--encoder", ablate_.encoder, "Selects the default learning rate")
        ->check(CLI::IsMember({"toy", "precomputed"}))
        ->capture_default_str();
    c->add_option("--out", ablate_.out, "Report JSON")->required();
    ablate_.train.add_to(*c);
    c->callback([this, c] { cmd_ablate(*c); });
  }

  void cmd_ablate(const CLI::App& c) {
    if (ablate_.k < 1) fail(ErrorKind::Usage, "--k must be at least 1");
    if (!ablate_.checkpoint.empty() && c.count("--dim-d") > 0) {
      fail(ErrorKind::Usage, "--dim-d conflicts with --checkpoint");
    }
    for (const char* flag : {"--lambda1", "--lambda2", "--lambda3"}) {
      if (c.count(flag) > 0) fail(ErrorKind::Usage, std::string(flag) + " conflicts with ablate (it sweeps the weights)");
    }
    const auto labels = read_labels(ablate_.labels, "");
    const auto pool = load_embeddings(ablate_.embeddings);
    const auto test = load_embeddings(ablate_.test_embeddings);
    check_labels(pool, labels.size(), ablate_.embeddings);
    check_labels(test, labels.size(), ablate_.test_embeddings);
    std::optional<VerbalizerModel> init;
    if (!ablate_.checkpoint.empty()) init = load_checkpoint(ablate_.checkpoint).model;
    const bool toy = parse_encoder(ablate_.encoder) == EncoderKind::Toy;

    const auto combos = canonical_ablation_combos();
    std::vector<RunReport> reports(combos.size());
    for (std::size_t i = 0; i < combos.size(); ++i) {
      reports[i].config = {{"command", "ablate"}, {"combo", combo_name(combos[i])}};
    }
    for (const auto seed : ablate_.seeds) {
      Experiment exp;
      exp.train_pool = pool.records;
      exp.test = test.records;
      exp.num_classes = labels.size();
      exp.proto_dim = ablate_.dim_d;
      exp.k = ablate_.k;
      exp.seed = seed;
      exp.template_index = ablate_.template_index;
      exp.optim = ablate_.train.optim(toy, seed);
      exp.init = init;
      const auto sweep = ablation_sweep(exp, combos);
      for (std::size_t i = 0; i < combos.size(); ++i) {
        reports[i].runs.push_back(sweep[i].runs.front());
        out_ << "seed " << seed << " " << combo_name(combos[i]) << ": micro-F1 " << sweep[i].runs.front().micro_f1
             << "\n";
      }
    }
    json doc{{"reports", json::array()}};
    for (const auto& r : reports) doc["reports"].push_back(r.to_json());
    io::write_atomic(ablate_.out, doc.dump(2) + "\n");
  }

  // params ------------------------------------------------------------------
  struct {
    std::int64_t dim_m = 1024, dim_d = 256, classes = 0;
    std::string labels, head = "both";
  } params_;

  void setup_params(CLI::App& app) {
    auto* c = app.add_subcommand("params", "Trainable head parameter counts with a frozen encoder");
    c->add_option("--dim-m", params_.dim_m, "Encoder hidden size")->capture_default_str();
    c->add_option("--dim-d", params_.dim_d, "Prototype space dimension")->capture_default_str();
    auto* classes = c->add_option("--classes", params_.classes, "Number of classes");
    auto* labels = c->add_option("--labels", params_.labels, "Label space JSON (alternative to --classes)");
    classes->excludes(labels);
    c->add_option("--head", params_.head, "ppv, spv or both")
        ->check(CLI::IsMember({"ppv", "spv", "both"}))
        ->capture_default_str();
    c->callback([this] { cmd_params(); });
  }

  void cmd_params() {
    std::int64_t k = params_.classes;
    if (!params_.labels.empty()) k = static_cast<std::int64_t>(load_label_space(params_.labels).size());
    if (k < 1) fail(ErrorKind::Usage, "--classes or --labels is required");
    if (params_.head != "spv") {
      out_ << "ppv " << count_params(params_.dim_m, params_.dim_d, k, HeadKind::Ppv) << "\n";
    }
    if (params_.head != "ppv") {
      out_ << "spv " << count_params(params_.dim_m, params_.dim_d, k, HeadKind::Spv) << "\n";
    }
  }

  // dump --------------------------------------------------------------------
  struct {
    std::string checkpoint, embeddings, out;
  } dump_;

  void setup_dump(CLI::App& app) {
    auto* c = app.add_subcommand("dump", "Write transformed embeddings and prototypes for plotting");
    c->add_option("--checkpoint", dump_.checkpoint, "Checkpoint")->required();
    c->add_option("--embeddings", dump_.embeddings, "Embeddings to transform")->required();
    c->add_option("--out", dump_.out, "Output embedding file")->required();
    c->callback([this] { cmd_dump(); });
  }

  void cmd_dump() {
    const auto ckpt = load_checkpoint(dump_.checkpoint);
    const auto store = load_embeddings(dump_.embeddings);
    const auto dumped = dump_embeddings(ckpt.model, store.records, ckpt.label_names);
    save_embeddings(dumped, dump_.out);
    out_ << "wrote " << dumped.records.size() << " records to " << dump_.out << "\n";
  }

  std::ostream& out_;
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Usage: return kUsageError;
    case ErrorKind::Numerical: return kNumericalError;
    default: return kDataError;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (!log::init_from_env()) {
    err << "usage error: PROTOVERB_LOG must be one of error, warn, info, debug\n";
    return kUsageError;
  }
  CLI::App app{"Prototype verbalizer: contrastive metric head over [MASK] embeddings", "protoverb"};
  Commands commands(out);
  commands.setup(app);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const Error& e) {
    err << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace protoverb::cli
