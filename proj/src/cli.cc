#include "gcner/cli.h"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gcner/corpus.h"
#include "gcner/embedio.h"
#include "gcner/errors.h"
#include "gcner/fusion.h"
#include "gcner/gcn.h"
#include "gcner/metrics.h"
#include "text_util.h"

namespace gcner {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

// Standalone graph tagger; not one of the joint-model modes.
constexpr std::string_view kGcnMode = "gcn";

struct RunConfig {
  std::string verb;
  std::string config_file;
  std::string out;
  std::string mode = "joint";
  std::uint64_t seed = 7;

  std::string train, train_deps, train_ctxe;
  std::string test, test_deps, test_ctxe;
  std::string glove;
  int glove_dim = 300;
  std::string scheme = "iob1";
  std::string model;

  TrainConfig head;
  std::string optimizer = "sgd";
  GcnConfig gcn;
  std::string gcn_tap = "layer2";

  Json echo() const {
    Json j;
    j["command"] = verb;
    j["mode"] = mode;
    j["seed"] = seed;
    j["train"] = train;
    j["train_deps"] = train_deps;
    j["train_ctxe"] = train_ctxe;
    j["test"] = test;
    j["test_deps"] = test_deps;
    j["test_ctxe"] = test_ctxe;
    j["glove"] = glove;
    j["glove_dim"] = glove_dim;
    j["scheme"] = scheme;
    j["model"] = model;
    j["out"] = out;
    j["epochs"] = head.epochs;
    j["batch_size"] = head.batch_size;
    j["lr"] = head.learning_rate;
    j["dropout"] = head.dropout;
    j["optimizer"] = optimizer;
    j["gcn_hidden"] = gcn.hidden_dim;
    j["gcn_out"] = gcn.out_dim;
    j["gcn_dropout"] = gcn.dropout_rate;
    j["gcn_lr"] = gcn.learning_rate;
    j["gcn_epochs"] = gcn.epochs;
    j["gcn_tap"] = gcn_tap;
    return j;
  }
};

void add_flag(CLI::App& app, const std::string& name, auto& target,
              const std::string& help) {
  // Accept both dash and underscore spellings, so config-file keys can use
  // either.
  std::string names = "--" + name;
  std::string underscored = name;
  std::replace(underscored.begin(), underscored.end(), '-', '_');
  if (underscored != name) names += ",--" + underscored;
  app.add_option(names, target, help)->capture_default_str();
}

void build_app(CLI::App& app, RunConfig& c) {
  app.add_option("verb", c.verb, "train | eval | predict | validate | stats | ablate")
      ->required()
      ->check(CLI::IsMember({"train", "eval", "predict", "validate", "stats", "ablate"}));
  app.set_config("--config", "", "flat key = value file; flags override it");
  add_flag(app, "out", c.out, "output directory");
  add_flag(app, "mode", c.mode, "joint | global_only | contextual_only | gcn");
  add_flag(app, "seed", c.seed, "random seed");
  add_flag(app, "train", c.train, "training CoNLL file");
  add_flag(app, "train-deps", c.train_deps, "training CoNLL-U file");
  add_flag(app, "train-ctxe", c.train_ctxe, "training CTXE file");
  add_flag(app, "test", c.test, "evaluation / prediction CoNLL file");
  add_flag(app, "test-deps", c.test_deps, "evaluation CoNLL-U file");
  add_flag(app, "test-ctxe", c.test_ctxe, "evaluation CTXE file");
  add_flag(app, "glove", c.glove, "GloVe text file");
  add_flag(app, "glove-dim", c.glove_dim, "GloVe width (0 = infer)");
  add_flag(app, "scheme", c.scheme, "tag scheme of input files: iob1 | iob2");
  add_flag(app, "model", c.model, "model file (.fuse or .gcnp)");
  add_flag(app, "epochs", c.head.epochs, "joint training epochs");
  add_flag(app, "batch-size", c.head.batch_size, "sentences per minibatch");
  add_flag(app, "lr", c.head.learning_rate, "joint learning rate");
  add_flag(app, "dropout", c.head.dropout, "dropout on the fused vector");
  add_flag(app, "optimizer", c.optimizer, "sgd | adam");
  add_flag(app, "gcn-hidden", c.gcn.hidden_dim, "GCN hidden width");
  add_flag(app, "gcn-out", c.gcn.out_dim, "GCN global-feature width");
  add_flag(app, "gcn-dropout", c.gcn.dropout_rate, "GCN dropout");
  add_flag(app, "gcn-lr", c.gcn.learning_rate, "standalone GCN learning rate");
  add_flag(app, "gcn-epochs", c.gcn.epochs, "standalone GCN epochs");
  add_flag(app, "gcn-tap", c.gcn_tap, "layer1 | layer2");
}

void resolve(RunConfig& c) {
  if (c.mode != kGcnMode) {
    std::optional<Mode> m = parse_mode(c.mode);
    if (!m) throw ConfigError("unknown mode '" + c.mode + "'");
    c.head.mode = *m;
  }
  std::optional<Optimizer> opt = parse_optimizer(c.optimizer);
  if (!opt) throw ConfigError("unknown optimizer '" + c.optimizer + "'");
  c.head.optimizer = *opt;
  if (c.gcn_tap == "layer1") {
    c.gcn.tap = GcnTap::kLayer1;
  } else if (c.gcn_tap == "layer2") {
    c.gcn.tap = GcnTap::kLayer2;
  } else {
    throw ConfigError("unknown gcn_tap '" + c.gcn_tap + "'");
  }
  if (!parse_scheme(c.scheme)) throw ConfigError("unknown scheme '" + c.scheme + "'");
  if (c.glove_dim < 0) throw ConfigError("glove_dim must be >= 0");
  c.head.seed = c.seed;
  c.gcn.seed = c.seed;
  c.head.check();
  c.gcn.check();
}

std::ifstream open_input(const std::string& path, const char* key) {
  if (path.empty()) throw ConfigError(std::string("missing required input: ") + key);
  if (!fs::is_regular_file(path)) {
    throw ConfigError(std::string(key) + " file not found: " + path);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(std::string("cannot open ") + key + ": " + path);
  return in;
}

fs::path require_out(const RunConfig& c) {
  if (c.out.empty()) throw ConfigError("missing required input: out");
  fs::create_directories(c.out);
  return fs::path(c.out);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw ConfigError("cannot write " + path.string());
}

void write_json(const fs::path& path, const Json& j) {
  write_text(path, j.dump(2) + "\n");
}

TagSet tagset_of(const RunConfig& c) {
  return TagSet::conll2003(*parse_scheme(c.scheme));
}

// Corpus, word vectors and contextual vectors for one split.
struct SplitInputs {
  Corpus corpus;
  std::optional<WordVectors> wv;
  std::optional<ContextualFile> ctx;

  ModelInputs view() const {
    return {&corpus, wv ? &*wv : nullptr, ctx ? &*ctx : nullptr};
  }
};

struct SplitPaths {
  const std::string& conll;
  const std::string& deps;
  const std::string& ctxe;
  const char* conll_key;
  const char* deps_key;
  const char* ctxe_key;
};

SplitPaths train_paths(const RunConfig& c) {
  return {c.train, c.train_deps, c.train_ctxe, "train", "train_deps", "train_ctxe"};
}

SplitPaths test_paths(const RunConfig& c) {
  return {c.test, c.test_deps, c.test_ctxe, "test", "test_deps", "test_ctxe"};
}

Corpus load_corpus(const std::string& path, const char* key, const TagSet& tags) {
  std::ifstream in = open_input(path, key);
  Corpus corpus = parse_conll(in, tags);
  if (corpus.sentences.empty()) throw DataError(std::string(key) + " contains no sentences: " + path);
  return corpus;
}

WordVectors load_vectors(const RunConfig& c, int dim) {
  std::ifstream in = open_input(c.glove, "glove");
  return load_glove(in, dim);
}

// Loads what `global` / `contextual` need. All paths are checked before any
// file is parsed so a missing input is reported as a configuration error.
SplitInputs load_split(const RunConfig& c, const SplitPaths& paths, bool global,
                       bool contextual, int glove_dim, const TagSet& tags) {
  open_input(paths.conll, paths.conll_key);
  if (global) {
    open_input(paths.deps, paths.deps_key);
    open_input(c.glove, "glove");
  }
  if (contextual) open_input(paths.ctxe, paths.ctxe_key);

  SplitInputs s;
  s.corpus = load_corpus(paths.conll, paths.conll_key, tags);
  if (global) {
    std::ifstream in = open_input(paths.deps, paths.deps_key);
    s.corpus = attach_deps(std::move(s.corpus), parse_conllu_deps(in));
    s.wv = load_vectors(c, glove_dim);
  }
  if (contextual) {
    std::ifstream in = open_input(paths.ctxe, paths.ctxe_key);
    s.ctx = read_ctxe(in);
  }
  return s;
}

enum class ModelKind { kFuse, kGcnp };

struct LoadedModel {
  ModelKind kind;
  std::optional<JointParams> joint;
  std::optional<GcnParams> gcn;
};

LoadedModel load_model(const RunConfig& c) {
  std::ifstream in = open_input(c.model, "model");
  char magic[4] = {};
  in.read(magic, 4);
  in.seekg(0);
  const std::string m(magic, static_cast<std::size_t>(in ? 4 : 0));
  in.clear();
  LoadedModel out;
  if (m == "GCNP") {
    out.kind = ModelKind::kGcnp;
    out.gcn = read_gcnp(in);
  } else {
    out.kind = ModelKind::kFuse;
    out.joint = read_fuse(in);
  }
  return out;
}

std::string model_mode(const LoadedModel& m) {
  return m.kind == ModelKind::kGcnp ? std::string(kGcnMode)
                                    : std::string(to_string(m.joint->mode()));
}

void check_mode_matches(const RunConfig& c, const LoadedModel& m,
                        bool mode_given) {
  if (mode_given && c.mode != model_mode(m)) {
    throw ConfigError("--mode " + c.mode + " does not match the model (" +
                      model_mode(m) + ")");
  }
}

// Runs a loaded model over the split at `paths`.
Evaluation run_model(const RunConfig& c, const LoadedModel& m,
                     const SplitPaths& paths, const TagSet& tags) {
  if (m.kind == ModelKind::kGcnp) {
    SplitInputs s = load_split(c, paths, true, false, m.gcn->input_dim(), tags);
    if (m.gcn->output_dim() != tags.size()) {
      throw ShapeMismatch("GCNP model does not emit one score per tag");
    }
    const std::vector<GraphExample> ex = make_graph_examples(s.corpus, *s.wv, tags);
    return evaluate_gcn(*m.gcn, ex, tags);
  }
  const JointParams& p = *m.joint;
  const Mode mode = p.mode();
  const int dim = p.gcn ? p.gcn->input_dim() : 0;
  SplitInputs s = load_split(c, paths, uses_global(mode), uses_contextual(mode), dim, tags);
  const JointDataset data = make_joint_dataset(s.corpus, s.wv ? &*s.wv : nullptr,
                                               s.ctx ? &*s.ctx : nullptr, tags, mode);
  if (uses_contextual(mode) && data.ctx_dim != p.ctx_dim) {
    throw ShapeMismatch("CTXE width " + std::to_string(data.ctx_dim) +
                        " does not match the model (" + std::to_string(p.ctx_dim) + ")");
  }
  return evaluate(p, data, tags);
}

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

void write_timing(const fs::path& dir, const Timer& timer) {
  Json j;
  j["wall_seconds"] = timer.seconds();
  write_json(dir / "timing.json", j);
}

int cmd_train(const RunConfig& c, std::ostream& out) {
  const Timer timer;
  const TagSet tags = tagset_of(c);
  const bool standalone = c.mode == kGcnMode;
  const bool global = standalone || uses_global(c.head.mode);
  const bool contextual = !standalone && uses_contextual(c.head.mode);
  const fs::path dir = require_out(c);
  SplitInputs s = load_split(c, train_paths(c), global, contextual, c.glove_dim, tags);

  Json report;
  report["config"] = c.echo();
  std::string model_name;
  std::vector<double> losses;
  double accuracy = 0.0;
  if (standalone) {
    const std::vector<GraphExample> ex = make_graph_examples(s.corpus, *s.wv, tags);
    GcnConfig gcfg = c.gcn;
    gcfg.tap = GcnTap::kLayer2;
    const GcnTrainResult r = train_gcn(ex, tags.size(), gcfg);
    losses = r.losses;
    accuracy = gcn_accuracy(r.params, ex);
    model_name = "model.gcnp";
    std::ostringstream buf(std::ios::binary);
    write_gcnp(r.params, buf);
    write_text(dir / model_name, buf.str());
  } else {
    const JointDataset data = make_joint_dataset(
        s.corpus, s.wv ? &*s.wv : nullptr, s.ctx ? &*s.ctx : nullptr, tags, c.head.mode);
    const JointTrainResult r = train_joint(data, c.gcn, c.head, tags.size());
    losses = r.losses;
    accuracy = token_accuracy(r.params, data);
    model_name = "model.fuse";
    std::ostringstream buf(std::ios::binary);
    write_fuse(r.params, buf);
    write_text(dir / model_name, buf.str());
  }
  report["model"] = model_name;
  report["sentences"] = s.corpus.sentences.size();
  report["epoch_losses"] = losses;
  report["train_token_accuracy"] = accuracy;
  write_json(dir / "report.json", report);
  write_timing(dir, timer);
  out << "trained " << c.mode << " model on " << s.corpus.sentences.size()
      << " sentences; final loss "
      << (losses.empty() ? 0.0 : losses.back()) << "; wrote "
      << (dir / model_name).string() << "\n";
  return kExitOk;
}

int cmd_eval(const RunConfig& c, bool mode_given, std::ostream& out) {
  const TagSet tags = tagset_of(c);
  const LoadedModel m = load_model(c);
  check_mode_matches(c, m, mode_given);
  const Evaluation e = run_model(c, m, test_paths(c), tags);
  const std::string table = format_report(e.relaxed);
  out << table;
  if (!c.out.empty()) {
    const fs::path dir = require_out(c);
    write_text(dir / "eval_report.txt", table);
    write_json(dir / "eval_report.json", report_record(e.relaxed));
    write_json(dir / "eval_strict.json", report_record(e.strict));
  }
  return kExitOk;
}

int cmd_predict(const RunConfig& c, bool mode_given, std::ostream& out) {
  const TagSet tags = tagset_of(c);
  const LoadedModel m = load_model(c);
  check_mode_matches(c, m, mode_given);
  const Evaluation e = run_model(c, m, test_paths(c), tags);

  // Re-read the raw lines and append one tag per token line, leaving every
  // other byte as it was.
  std::ifstream in = open_input(c.test, "test");
  std::string line, result;
  std::size_t sent = 0, word = 0;
  bool in_sentence = false;
  while (std::getline(in, line)) {
    const bool cr = !line.empty() && line.back() == '\r';
    std::string body = cr ? line.substr(0, line.size() - 1) : line;
    const bool blank = text::trim(body).empty();
    const bool docstart = !blank && text::split_ws(body).front() == "-DOCSTART-";
    if (blank || docstart) {
      if (in_sentence) {
        ++sent;
        word = 0;
        in_sentence = false;
      }
      result += line;
    } else {
      if (sent >= e.predictions.size() || word >= e.predictions[sent].tags.size()) {
        throw DataError("prediction count does not match the input file");
      }
      in_sentence = true;
      const char sep = body.find('\t') != std::string::npos ? '\t' : ' ';
      result += body + sep + e.predictions[sent].tags[word++];
      if (cr) result += '\r';
    }
    if (!in.eof()) result += '\n';
  }
  if (c.out.empty()) {
    out << result;
  } else {
    const fs::path dir = require_out(c);
    write_text(dir / "predictions.conll", result);
  }
  return kExitOk;
}

int cmd_validate(const RunConfig& c, std::ostream& out) {
  const TagSet tags = tagset_of(c);
  Json j = Json::object();
  std::size_t total = 0;
  bool any = false;
  for (const SplitPaths& paths : {train_paths(c), test_paths(c)}) {
    if (paths.conll.empty()) continue;
    any = true;
    Corpus corpus = load_corpus(paths.conll, paths.conll_key, tags);
    Json split;
    split["sentences"] = corpus.sentences.size();
    if (!paths.deps.empty()) {
      std::ifstream in = open_input(paths.deps, paths.deps_key);
      corpus = attach_deps(std::move(corpus), parse_conllu_deps(in));
      split["deps"] = "ok";
    }
    if (!paths.ctxe.empty()) {
      std::ifstream in = open_input(paths.ctxe, paths.ctxe_key);
      const ContextualFile ctx = read_ctxe(in);
      const ValidationReport r = validate_ctxe_against_corpus(ctx, corpus);
      split["ctxe_violations"] = r.total_violations;
      split["ctxe_messages"] = r.violations;
      total += r.total_violations;
      for (const std::string& v : r.violations) {
        out << paths.ctxe_key << ": " << v << "\n";
      }
    }
    j[paths.conll_key] = split;
  }
  if (!any) throw ConfigError("missing required input: train or test");
  j["total_violations"] = total;
  if (!c.out.empty()) write_json(require_out(c) / "validate.json", j);
  out << (total == 0 ? "ok" : "violations: " + std::to_string(total)) << "\n";
  if (total != 0) throw DataError(std::to_string(total) + " CTXE violation(s)");
  return kExitOk;
}

int cmd_stats(const RunConfig& c, std::ostream& out) {
  const TagSet tags = tagset_of(c);
  const SplitPaths paths = c.train.empty() ? test_paths(c) : train_paths(c);
  Corpus corpus = load_corpus(paths.conll, paths.conll_key, tags);
  if (!paths.deps.empty()) {
    std::ifstream in = open_input(paths.deps, paths.deps_key);
    corpus = attach_deps(std::move(corpus), parse_conllu_deps(in));
  }
  const Stats s = corpus_stats(corpus);
  Json j;
  j["sentences"] = s.sentences;
  j["documents"] = s.documents;
  j["tokens"] = s.tokens;
  j["entity_tokens"] = s.entity_tokens;
  j["entities"] = Json::object();
  for (const auto& [type, n] : s.entities) j["entities"][std::string(to_string(type))] = n;
  j["entity_surface_mentions"] = s.entity_surface_mentions;
  j["pos_counts"] = s.pos_counts;
  j["deprel_counts"] = s.deprel_counts;
  out << j.dump(2) << "\n";
  if (!c.out.empty()) write_json(require_out(c) / "stats.json", j);
  return kExitOk;
}

int cmd_ablate(const RunConfig& c, std::ostream& out) {
  const Timer timer;
  const TagSet tags = tagset_of(c);
  const fs::path dir = require_out(c);
  const SplitInputs train = load_split(c, train_paths(c), true, true, c.glove_dim, tags);
  const SplitInputs test = load_split(c, test_paths(c), true, true, c.glove_dim, tags);
  const std::vector<AblationRow> rows =
      ablation_run(train.view(), test.view(), c.gcn, c.head, tags);
  const std::string table = format_ablation(rows);
  out << table;
  Json j;
  j["config"] = c.echo();
  j["rows"] = Json::array();
  for (const AblationRow& r : rows) {
    Json row;
    row["mode"] = std::string(to_string(r.mode));
    row["label"] = r.label;
    row["relaxed"] = report_record(r.eval.relaxed);
    row["strict"] = report_record(r.eval.strict);
    j["rows"].push_back(row);
  }
  write_json(dir / "report.json", j);
  write_text(dir / "ablation.txt", table);
  write_timing(dir, timer);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err) {
  RunConfig c;
  CLI::App app("Joint graph-convolution + contextual-embedding NER toolkit", "gcner");
  build_app(app, c);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  const bool mode_given = app.get_option("--mode")->count() > 0;
  try {
    resolve(c);
    if (c.verb == "train") return cmd_train(c, out);
    if (c.verb == "eval") return cmd_eval(c, mode_given, out);
    if (c.verb == "predict") return cmd_predict(c, mode_given, out);
    if (c.verb == "validate") return cmd_validate(c, out);
    if (c.verb == "stats") return cmd_stats(c, out);
    return cmd_ablate(c, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace gcner
