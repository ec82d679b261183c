#include "gcner/fusion.h"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "gcner/binio.h"
#include "gcner/errors.h"
#include "rng.h"

namespace gcner {

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kGlobalOnly: return "global_only";
    case Mode::kContextualOnly: return "contextual_only";
    case Mode::kJoint: return "joint";
  }
  return "?";
}

std::optional<Mode> parse_mode(std::string_view name) {
  for (Mode m : {Mode::kGlobalOnly, Mode::kContextualOnly, Mode::kJoint}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

std::string_view to_string(Optimizer opt) {
  return opt == Optimizer::kSgd ? "sgd" : "adam";
}

std::optional<Optimizer> parse_optimizer(std::string_view name) {
  if (name == "sgd") return Optimizer::kSgd;
  if (name == "adam") return Optimizer::kAdam;
  return std::nullopt;
}

void TrainConfig::check() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("dropout must be in [0, 1)");
  }
}

Mode JointParams::mode() const {
  if (global_dim > 0 && ctx_dim > 0) return Mode::kJoint;
  return global_dim > 0 ? Mode::kGlobalOnly : Mode::kContextualOnly;
}

bool operator==(const JointParams& a, const JointParams& b) {
  return a.global_dim == b.global_dim && a.ctx_dim == b.ctx_dim &&
         a.w_out.rows() == b.w_out.rows() && a.w_out.cols() == b.w_out.cols() &&
         a.b.cols() == b.b.cols() && a.w_out == b.w_out && a.b == b.b &&
         a.gcn == b.gcn;
}

Eigen::MatrixXd align_global(const Eigen::MatrixXd& word_features,
                             const AlignmentMask& mask) {
  if (mask.word_count() != word_features.rows()) {
    throw MaskSumMismatch("mask marks " + std::to_string(mask.word_count()) +
                              " words, features have " +
                              std::to_string(word_features.rows()) + " rows",
                          -1);
  }
  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(mask.subword_count(), word_features.cols());
  Eigen::Index next = 0;
  for (int k = 0; k < mask.subword_count(); ++k) {
    if (mask.bits[k]) out.row(k) = word_features.row(next++);
  }
  return out;
}

Eigen::MatrixXd fuse(const Eigen::MatrixXd& global_aligned,
                     const Eigen::MatrixXd& contextual) {
  if (global_aligned.rows() != contextual.rows()) {
    throw ShapeMismatch("cannot concatenate " +
                        std::to_string(global_aligned.rows()) + " and " +
                        std::to_string(contextual.rows()) + " rows");
  }
  Eigen::MatrixXd out(global_aligned.rows(),
                      global_aligned.cols() + contextual.cols());
  out << global_aligned, contextual;
  return out;
}

Eigen::MatrixXd classifier_forward(const Eigen::MatrixXd& fused,
                                   const JointParams& p,
                                   const DropoutState& dropout) {
  if (fused.cols() != p.w_out.rows()) {
    throw ShapeMismatch("fused width " + std::to_string(fused.cols()) +
                        " != classifier input " +
                        std::to_string(p.w_out.rows()));
  }
  const Eigen::MatrixXd mask = dropout_mask(fused.rows(), fused.cols(), dropout);
  Eigen::MatrixXd logits = fused.cwiseProduct(mask) * p.w_out;
  logits.rowwise() += p.b.row(0);
  return softmax_rows(logits);
}

double masked_cross_entropy(const Eigen::MatrixXd& probs,
                            std::span<const int> gold,
                            const AlignmentMask& mask) {
  if (probs.rows() != mask.subword_count() ||
      static_cast<int>(gold.size()) != mask.word_count()) {
    throw ShapeMismatch("probabilities / gold do not match the mask");
  }
  double loss = 0.0;
  std::size_t word = 0;
  for (int k = 0; k < mask.subword_count(); ++k) {
    if (!mask.bits[k]) continue;
    loss -= std::log(probs(k, gold[word++]));
  }
  return word == 0 ? 0.0 : loss / static_cast<double>(word);
}

JointDataset make_joint_dataset(const Corpus& corpus, const WordVectors* wv,
                                const ContextualFile* ctx, const TagSet& tagset,
                                Mode mode) {
  JointDataset data;
  data.mode = mode;
  if (uses_global(mode)) {
    if (wv == nullptr) throw ConfigError("word vectors are required for mode " + std::string(to_string(mode)));
    if (!corpus.has_deps()) {
      throw DataError("dependency arcs are required for mode " +
                      std::string(to_string(mode)));
    }
    data.input_dim = wv->dim();
  }
  if (uses_contextual(mode)) {
    if (ctx == nullptr) throw ConfigError("a CTXE file is required for mode " + std::string(to_string(mode)));
    const ValidationReport report = validate_ctxe_against_corpus(*ctx, corpus);
    if (!report.ok()) {
      throw DataError("CTXE does not match corpus: " + report.violations.front());
    }
    data.ctx_dim = static_cast<int>(ctx->ctx_dim);
  }
  for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
    const Sentence& s = corpus.sentences[i];
    JointExample ex;
    ex.sent_id = s.sent_id;
    for (const Token& t : s.tokens) {
      std::optional<int> y = tagset.index(t.gold_tag);
      if (!y) throw UnknownTag(t.gold_tag);
      ex.gold.push_back(*y);
    }
    if (uses_contextual(mode)) {
      const ContextualSentence& c = ctx->sentences[i];
      ex.mask = c.mask;
      ex.ctx = c.vectors.cast<double>();
    } else {
      ex.mask = AlignmentMask::identity(s.size());
    }
    if (uses_global(mode)) {
      ex.x = embed_tokens(*wv, s);
      ex.adj = normalize_adjacency(build_graph(*s.arcs, s.size()));
    }
    data.examples.push_back(std::move(ex));
  }
  return data;
}

namespace {

struct BatchForward {
  std::optional<GcnActivations> gcn;
  NormAdj adj;
  Eigen::MatrixXd head_mask;
  Eigen::MatrixXd dropped;  // fused input after dropout
  Eigen::MatrixXd probs;
  std::vector<Eigen::Index> word_offsets;
  std::vector<Eigen::Index> subword_offsets;
};

BatchForward forward_batch(const JointParams& p,
                           std::span<const JointExample* const> batch,
                           const JointDropout& dropout) {
  const bool global = p.global_dim > 0;
  const bool contextual = p.ctx_dim > 0;
  BatchForward f;
  Eigen::Index words = 0, subwords = 0;
  for (const JointExample* ex : batch) {
    if (static_cast<int>(ex->gold.size()) != ex->mask.word_count()) {
      throw MaskSumMismatch("sentence " + std::to_string(ex->sent_id) +
                                ": mask does not cover every word",
                            ex->sent_id);
    }
    f.word_offsets.push_back(words);
    f.subword_offsets.push_back(subwords);
    words += ex->mask.word_count();
    subwords += ex->mask.subword_count();
  }

  const Eigen::Index width = p.global_dim + p.ctx_dim;
  Eigen::MatrixXd fused = Eigen::MatrixXd::Zero(subwords, width);
  if (global) {
    if (!p.gcn) throw ShapeMismatch("global features requested without GCN weights");
    std::vector<const NormAdj*> blocks;
    for (const JointExample* ex : batch) blocks.push_back(&ex->adj);
    f.adj = block_diag(std::span<const NormAdj* const>(blocks));
    Eigen::MatrixXd x(words, p.gcn->input_dim());
    for (std::size_t k = 0; k < batch.size(); ++k) {
      if (batch[k]->x.rows() != batch[k]->mask.word_count() ||
          batch[k]->x.cols() != p.gcn->input_dim()) {
        throw ShapeMismatch("sentence " + std::to_string(batch[k]->sent_id) +
                            ": word features do not match the model");
      }
      x.middleRows(f.word_offsets[k], batch[k]->x.rows()) = batch[k]->x;
    }
    f.gcn = gcn_forward_cached(x, f.adj, *p.gcn, dropout.gcn);
    if (f.gcn->out.cols() != p.global_dim) {
      throw ShapeMismatch("GCN feature width does not match the classifier");
    }
  }
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const JointExample& ex = *batch[k];
    const Eigen::Index s = ex.mask.subword_count();
    if (global) {
      fused.block(f.subword_offsets[k], 0, s, p.global_dim) = align_global(
          f.gcn->out.middleRows(f.word_offsets[k], ex.mask.word_count()),
          ex.mask);
    }
    if (contextual) {
      if (ex.ctx.rows() != s || ex.ctx.cols() != p.ctx_dim) {
        throw ShapeMismatch("sentence " + std::to_string(ex.sent_id) +
                            ": contextual vectors do not match the model");
      }
      fused.block(f.subword_offsets[k], p.global_dim, s, p.ctx_dim) = ex.ctx;
    }
  }
  f.head_mask = dropout_mask(subwords, width, dropout.head);
  f.dropped = fused.cwiseProduct(f.head_mask);
  Eigen::MatrixXd logits = f.dropped * p.w_out;
  logits.rowwise() += p.b.row(0);
  f.probs = softmax_rows(logits);
  return f;
}

}  // namespace

JointGradients joint_backward(const JointParams& p,
                              std::span<const JointExample* const> batch,
                              const JointDropout& dropout) {
  const BatchForward f = forward_batch(p, batch, dropout);
  JointGradients g;
  for (const JointExample* ex : batch) g.supervised += ex->mask.word_count();

  Eigen::MatrixXd d_logits = Eigen::MatrixXd::Zero(f.probs.rows(), f.probs.cols());
  if (g.supervised > 0) {
    const double scale = 1.0 / static_cast<double>(g.supervised);
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const JointExample& ex = *batch[k];
      std::size_t word = 0;
      for (int s = 0; s < ex.mask.subword_count(); ++s) {
        if (!ex.mask.bits[s]) continue;
        const Eigen::Index row = f.subword_offsets[k] + s;
        const int y = ex.gold[word++];
        g.loss -= std::log(f.probs(row, y));
        d_logits.row(row) = f.probs.row(row) * scale;
        d_logits(row, y) -= scale;
      }
    }
    g.loss *= scale;
  }
  g.w_out = f.dropped.transpose() * d_logits;
  g.b = d_logits.colwise().sum();

  if (p.global_dim > 0) {
    const Eigen::MatrixXd d_global =
        (d_logits * p.w_out.topRows(p.global_dim).transpose())
            .cwiseProduct(f.head_mask.leftCols(p.global_dim));
    Eigen::MatrixXd d_features =
        Eigen::MatrixXd::Zero(f.gcn->out.rows(), p.global_dim);
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const JointExample& ex = *batch[k];
      Eigen::Index word = f.word_offsets[k];
      for (int s = 0; s < ex.mask.subword_count(); ++s) {
        if (ex.mask.bits[s]) d_features.row(word++) = d_global.row(f.subword_offsets[k] + s);
      }
    }
    g.gcn = gcn_backward_from_output(*f.gcn, f.adj, *p.gcn, d_features);
  }
  return g;
}

JointParams init_joint(const JointDataset& data, const GcnConfig& gcn_cfg,
                       int num_tags, std::uint64_t seed) {
  JointParams p;
  if (uses_global(data.mode)) {
    gcn_cfg.check();
    const int out = gcn_cfg.tap == GcnTap::kLayer1 ? 0 : gcn_cfg.out_dim;
    p.gcn = init_gcn(data.input_dim, gcn_cfg.hidden_dim, out, rng::mix(seed, 0x1));
    p.global_dim = p.gcn->feature_dim();
  }
  if (uses_contextual(data.mode)) p.ctx_dim = data.ctx_dim;
  p.w_out = glorot_uniform(p.global_dim + p.ctx_dim, num_tags, rng::mix(seed, 0x2));
  p.b = Eigen::MatrixXd::Zero(1, num_tags);
  return p;
}

namespace {

class ParamOptimizer {
 public:
  ParamOptimizer(Optimizer kind, double lr) : kind_(kind), lr_(lr) {}

  void step(std::span<Eigen::MatrixXd* const> params,
            std::span<const Eigen::MatrixXd* const> grads) {
    ++t_;
    if (moments_.empty()) {
      for (const Eigen::MatrixXd* p : params) {
        moments_.push_back({Eigen::MatrixXd::Zero(p->rows(), p->cols()),
                            Eigen::MatrixXd::Zero(p->rows(), p->cols())});
      }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      Eigen::MatrixXd& w = *params[i];
      const Eigen::MatrixXd& g = *grads[i];
      if (kind_ == Optimizer::kSgd) {
        w -= lr_ * g;
        continue;
      }
      auto& [m, v] = moments_[i];
      m = kBeta1 * m + (1.0 - kBeta1) * g;
      v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
      w.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  Optimizer kind_;
  double lr_;
  long t_ = 0;
  std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> moments_;
};

}  // namespace

JointTrainResult train_joint(const JointDataset& data, const GcnConfig& gcn_cfg,
                             const TrainConfig& cfg, int num_tags) {
  cfg.check();
  if (data.mode != cfg.mode) {
    throw ConfigError("dataset was built for mode " +
                      std::string(to_string(data.mode)) + ", config says " +
                      std::string(to_string(cfg.mode)));
  }
  if (data.examples.empty()) throw DataError("cannot train on an empty corpus");

  JointTrainResult result;
  JointParams& p = result.params;
  p = init_joint(data, gcn_cfg, num_tags, cfg.seed);
  ParamOptimizer opt(cfg.optimizer, cfg.learning_rate);

  std::vector<std::size_t> order(data.examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const JointExample*> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 gen(rng::mix(cfg.seed, 0x5f1, static_cast<std::uint64_t>(epoch)));
    rng::shuffle(order, gen);
    double loss_sum = 0.0;
    long supervised = 0;
    for (std::size_t start = 0, b = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size), ++b) {
      batch.clear();
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&data.examples[order[i]]);

      const std::uint64_t step_seed =
          rng::mix(cfg.seed, static_cast<std::uint64_t>(epoch) + 1, b);
      JointDropout dropout{
          DropoutState::train(gcn_cfg.dropout_rate, rng::mix(step_seed, 1)),
          DropoutState::train(cfg.dropout, rng::mix(step_seed, 2))};
      JointGradients g = joint_backward(p, batch, dropout);
      loss_sum += g.loss * static_cast<double>(g.supervised);
      supervised += g.supervised;

      std::vector<Eigen::MatrixXd*> params = {&p.w_out, &p.b};
      std::vector<const Eigen::MatrixXd*> grads = {&g.w_out, &g.b};
      if (p.gcn) {
        params.push_back(&p.gcn->w0);
        grads.push_back(&g.gcn->w0);
        if (p.gcn->w1.size() > 0) {
          params.push_back(&p.gcn->w1);
          grads.push_back(&g.gcn->w1);
        }
      }
      opt.step(params, grads);
    }
    const double epoch_loss =
        supervised > 0 ? loss_sum / static_cast<double>(supervised) : 0.0;
    if (!std::isfinite(epoch_loss)) {
      throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
    }
    check_finite(p.w_out, "classifier weights");
    check_finite(p.b, "classifier bias");
    if (p.gcn) {
      check_finite(p.gcn->w0, "gcn W0");
      check_finite(p.gcn->w1, "gcn W1");
    }
    result.losses.push_back(epoch_loss);
  }
  return result;
}

Prediction predict(const JointParams& p, const JointExample& ex,
                   const TagSet& tagset) {
  if (p.num_tags() != tagset.size()) {
    throw ShapeMismatch("model has " + std::to_string(p.num_tags()) +
                        " tags, tag set has " + std::to_string(tagset.size()));
  }
  const JointExample* one[] = {&ex};
  const BatchForward f = forward_batch(p, one, JointDropout{});
  Prediction out;
  out.sent_id = ex.sent_id;
  out.probs.resize(ex.mask.word_count(), p.num_tags());
  Eigen::Index word = 0;
  for (int s = 0; s < ex.mask.subword_count(); ++s) {
    if (!ex.mask.bits[s]) continue;
    out.probs.row(word) = f.probs.row(s);
    out.tags.push_back(tagset.label(argmax_row(f.probs, s)));
    ++word;
  }
  return out;
}

double token_accuracy(const JointParams& p, const JointDataset& data) {
  const TagSet tags = TagSet::conll2003();
  long correct = 0, total = 0;
  for (const JointExample& ex : data.examples) {
    const Prediction pred = predict(p, ex, tags);
    for (std::size_t i = 0; i < ex.gold.size(); ++i) {
      correct += argmax_row(pred.probs, static_cast<Eigen::Index>(i)) == ex.gold[i] ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

namespace {

std::vector<std::string> labels_of(std::span<const int> ids, const TagSet& tagset) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int y : ids) out.push_back(tagset.label(y));
  return out;
}

}  // namespace

Evaluation evaluate(const JointParams& p, const JointDataset& data,
                    const TagSet& tagset) {
  Evaluation e;
  SpanLists gold, pred;
  DecodeStats stats;
  for (const JointExample& ex : data.examples) {
    gold.push_back(iob_to_spans(labels_of(ex.gold, tagset), Scheme::kIob2));
    e.predictions.push_back(predict(p, ex, tagset));
    pred.push_back(iob_to_spans(e.predictions.back().tags, Scheme::kIob2, &stats));
  }
  e.relaxed = relaxed_prf(gold, pred);
  e.strict = strict_prf(gold, pred);
  e.repairs = stats.repairs;
  return e;
}

Evaluation evaluate_gcn(const GcnParams& p, std::span<const GraphExample> data,
                        const TagSet& tagset) {
  Evaluation e;
  SpanLists gold, pred;
  DecodeStats stats;
  int sent_id = 0;
  for (const GraphExample& ex : data) {
    gold.push_back(iob_to_spans(labels_of(ex.gold, tagset), Scheme::kIob2));
    Prediction out;
    out.sent_id = sent_id++;
    out.probs = gcn_forward_full(ex.x, ex.adj, p, DropoutState::eval());
    for (Eigen::Index i = 0; i < out.probs.rows(); ++i) {
      out.tags.push_back(tagset.label(argmax_row(out.probs, i)));
    }
    pred.push_back(iob_to_spans(out.tags, Scheme::kIob2, &stats));
    e.predictions.push_back(std::move(out));
  }
  e.relaxed = relaxed_prf(gold, pred);
  e.strict = strict_prf(gold, pred);
  e.repairs = stats.repairs;
  return e;
}

std::string ablation_label(Mode mode) {
  switch (mode) {
    case Mode::kGlobalOnly: return "Global features";
    case Mode::kContextualOnly: return "Contextual features";
    case Mode::kJoint: return "Global + contextual features";
  }
  return "?";
}

std::vector<AblationRow> ablation_run(const ModelInputs& train,
                                      const ModelInputs& test,
                                      const GcnConfig& gcn_cfg,
                                      const TrainConfig& cfg,
                                      const TagSet& tagset) {
  if (train.corpus == nullptr || test.corpus == nullptr) {
    throw ConfigError("ablation needs both a training and a test corpus");
  }
  std::vector<AblationRow> rows;
  for (Mode mode : {Mode::kGlobalOnly, Mode::kContextualOnly, Mode::kJoint}) {
    TrainConfig mode_cfg = cfg;
    mode_cfg.mode = mode;
    const JointDataset train_data =
        make_joint_dataset(*train.corpus, train.wv, train.ctx, tagset, mode);
    const JointDataset test_data =
        make_joint_dataset(*test.corpus, test.wv, test.ctx, tagset, mode);
    const JointTrainResult trained =
        train_joint(train_data, gcn_cfg, mode_cfg, tagset.size());
    rows.push_back({mode, ablation_label(mode),
                    evaluate(trained.params, test_data, tagset)});
  }
  return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
  std::string out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-32s %10s\n", "Embeddings", "F1 score");
  out += line;
  out += std::string(43, '-') + "\n";
  for (const AblationRow& r : rows) {
    std::snprintf(line, sizeof(line), "%-32s %10.2f\n", r.label.c_str(),
                  r.eval.relaxed.overall.f1);
    out += line;
  }
  return out;
}

namespace {

void write_dense(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      binio::write_f32(out, static_cast<float>(m(i, j)));
    }
  }
}

}  // namespace

void write_fuse(const JointParams& p, std::ostream& out) {
  if (p.w_out.rows() != p.global_dim + p.ctx_dim || p.b.cols() != p.w_out.cols() ||
      (p.global_dim > 0) != p.gcn.has_value()) {
    throw ShapeMismatch("inconsistent joint model");
  }
  binio::write_magic(out, "FUSE");
  binio::write_u32(out, kFuseVersion);
  binio::write_u32(out, static_cast<std::uint32_t>(p.global_dim));
  binio::write_u32(out, static_cast<std::uint32_t>(p.ctx_dim));
  binio::write_u32(out, static_cast<std::uint32_t>(p.num_tags()));
  write_dense(out, p.w_out);
  write_dense(out, p.b);
  if (p.gcn) write_gcnp(*p.gcn, out);
}

JointParams read_fuse(std::istream& in) {
  binio::expect_magic(in, "FUSE");
  const std::uint32_t version = binio::read_u32(in, "version");
  if (version != kFuseVersion) {
    throw BadVersion("unsupported FUSE version " + std::to_string(version));
  }
  JointParams p;
  p.global_dim = static_cast<int>(binio::read_u32(in, "F_g"));
  p.ctx_dim = static_cast<int>(binio::read_u32(in, "ctx_dim"));
  const auto t = static_cast<int>(binio::read_u32(in, "T"));
  const int k = p.global_dim + p.ctx_dim;
  p.w_out.resize(k, t);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < t; ++j) p.w_out(i, j) = binio::read_f32(in, "W_out");
  }
  p.b.resize(1, t);
  for (int j = 0; j < t; ++j) p.b(0, j) = binio::read_f32(in, "b");
  if (p.global_dim > 0) {
    p.gcn = read_gcnp(in);
    if (p.gcn->feature_dim() != p.global_dim) {
      throw InvalidContainer("embedded GCNP feature width does not match F_g");
    }
  }
  return p;
}

}  // namespace gcner
