#include "gcner/gcn.h"

#include <algorithm>
#include <cmath>
#include <set>

#include "gcner/binio.h"
#include "gcner/errors.h"
#include "rng.h"

namespace gcner {

SentenceGraph build_graph(std::span<const DepArc> arcs, int n) {
  std::set<std::pair<int, int>> edges;
  for (const DepArc& a : arcs) {
    if (a.dependent < 0 || a.dependent >= n) {
      throw IndexOutOfRange("arc dependent " + std::to_string(a.dependent) +
                            " outside sentence of " + std::to_string(n));
    }
    if (a.head == kRootHead) continue;
    if (a.head < 0 || a.head >= n) {
      throw IndexOutOfRange("arc head " + std::to_string(a.head) +
                            " outside sentence of " + std::to_string(n));
    }
    if (a.head == a.dependent) continue;
    edges.emplace(std::min(a.head, a.dependent), std::max(a.head, a.dependent));
  }
  return {n, {edges.begin(), edges.end()}};
}

int NormAdj::block_size(std::size_t k) const {
  const int end = k + 1 < block_offsets_.size() ? block_offsets_[k + 1] : n_;
  return end - block_offsets_[k];
}

double NormAdj::at(int i, int j) const {
  for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
    if (cols_[k] == j) return values_[k];
  }
  return 0.0;
}

Eigen::MatrixXd NormAdj::multiply(const Eigen::MatrixXd& m) const {
  if (m.rows() != n_) {
    throw ShapeMismatch("adjacency has " + std::to_string(n_) +
                        " nodes, operand has " + std::to_string(m.rows()) +
                        " rows");
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_, m.cols());
  for (int i = 0; i < n_; ++i) {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) {
      out.row(i) += values_[k] * m.row(cols_[k]);
    }
  }
  return out;
}

Eigen::MatrixXd NormAdj::to_dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n_, n_);
  for (int i = 0; i < n_; ++i) {
    for (int k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k) d(i, cols_[k]) = values_[k];
  }
  return d;
}

NormAdj normalize_adjacency(const SentenceGraph& g) {
  std::vector<std::vector<int>> neighbors(g.n);
  for (auto [i, j] : g.edges) {
    if (i < 0 || j >= g.n || i >= j) {
      throw IndexOutOfRange("edge (" + std::to_string(i) + "," +
                            std::to_string(j) + ") invalid for n=" +
                            std::to_string(g.n));
    }
    neighbors[i].push_back(j);
    neighbors[j].push_back(i);
  }
  // Degrees of A + I.
  for (int i = 0; i < g.n; ++i) {
    neighbors[i].push_back(i);
    std::sort(neighbors[i].begin(), neighbors[i].end());
  }
  NormAdj a;
  a.n_ = g.n;
  a.block_offsets_ = {0};
  for (int i = 0; i < g.n; ++i) {
    for (int j : neighbors[i]) {
      // 1/sqrt(d_i d_j) with an exact integer product: symmetric, and exact
      // whenever d_i d_j is a perfect square.
      const double dd = static_cast<double>(neighbors[i].size() * neighbors[j].size());
      a.cols_.push_back(j);
      a.values_.push_back(1.0 / std::sqrt(dd));
    }
    a.row_ptr_.push_back(static_cast<int>(a.cols_.size()));
  }
  return a;
}

NormAdj block_diag(std::span<const NormAdj* const> blocks) {
  NormAdj out;
  for (const NormAdj* b : blocks) {
    const int offset = out.n_;
    const int base = static_cast<int>(out.cols_.size());
    out.block_offsets_.push_back(offset);
    for (int i = 0; i < b->n_; ++i) {
      for (int k = b->row_ptr_[i]; k < b->row_ptr_[i + 1]; ++k) {
        out.cols_.push_back(b->cols_[k] + offset);
        out.values_.push_back(b->values_[k]);
      }
      out.row_ptr_.push_back(base + b->row_ptr_[i + 1]);
    }
    out.n_ += b->n_;
  }
  return out;
}

NormAdj block_diag(std::span<const NormAdj> blocks) {
  std::vector<const NormAdj*> ptrs;
  ptrs.reserve(blocks.size());
  for (const NormAdj& b : blocks) ptrs.push_back(&b);
  return block_diag(std::span<const NormAdj* const>(ptrs));
}

void GcnConfig::check() const {
  if (hidden_dim < 1) throw ConfigError("gcn hidden_dim must be >= 1");
  if (tap == GcnTap::kLayer2 && out_dim < 1) {
    throw ConfigError("gcn out_dim must be >= 1");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("gcn dropout_rate must be in [0, 1)");
  }
  if (epochs < 0) throw ConfigError("gcn epochs must be >= 0");
}

DropoutState DropoutState::derive(std::uint64_t site) const {
  DropoutState d = *this;
  d.seed = rng::mix(seed, 0xd50u, site);
  return d;
}

Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols,
                             const DropoutState& state) {
  if (!state.active()) return Eigen::MatrixXd::Ones(rows, cols);
  std::mt19937_64 gen(state.seed);
  const double keep_scale = 1.0 / (1.0 - state.rate);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = rng::uniform01(gen) < state.rate ? 0.0 : keep_scale;
    }
  }
  return m;
}

Eigen::MatrixXd glorot_uniform(int fan_in, int fan_out, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Eigen::MatrixXd w(fan_in, fan_out);
  for (int i = 0; i < fan_in; ++i) {
    for (int j = 0; j < fan_out; ++j) w(i, j) = rng::uniform(gen, -limit, limit);
  }
  return w;
}

namespace {

constexpr std::uint64_t kSiteLayer1 = 1;
constexpr std::uint64_t kSiteLayer2 = 2;

}  // namespace

GcnParams init_gcn(int input_dim, int hidden_dim, int out_dim,
                   std::uint64_t seed) {
  GcnParams p;
  p.w0 = glorot_uniform(input_dim, hidden_dim, rng::mix(seed, 0x6c0, 0));
  p.w1 = out_dim > 0
             ? glorot_uniform(hidden_dim, out_dim, rng::mix(seed, 0x6c0, 1))
             : Eigen::MatrixXd(hidden_dim, 0);
  return p;
}

GcnActivations gcn_forward_cached(const Eigen::MatrixXd& x, const NormAdj& adj,
                                  const GcnParams& p,
                                  const DropoutState& dropout) {
  if (x.rows() != adj.n() || x.cols() != p.w0.rows() ||
      p.w1.rows() != p.w0.cols()) {
    throw ShapeMismatch("gcn input " + std::to_string(x.rows()) + "x" +
                        std::to_string(x.cols()) + " does not fit adjacency n=" +
                        std::to_string(adj.n()) + " and W0 " +
                        std::to_string(p.w0.rows()) + "x" +
                        std::to_string(p.w0.cols()));
  }
  GcnActivations a;
  a.ax = adj.multiply(x);
  a.z1 = a.ax * p.w0;
  a.mask1 = dropout_mask(a.z1.rows(), a.z1.cols(), dropout.derive(kSiteLayer1));
  a.h1 = a.z1.cwiseMax(0.0).cwiseProduct(a.mask1);
  if (p.tap() == GcnTap::kLayer1) {
    a.out = a.h1;
    return a;
  }
  a.ah1 = adj.multiply(a.h1);
  Eigen::MatrixXd z2 = a.ah1 * p.w1;
  a.mask2 = dropout_mask(z2.rows(), z2.cols(), dropout.derive(kSiteLayer2));
  a.out = z2.cwiseProduct(a.mask2);
  return a;
}

Eigen::MatrixXd gcn_hidden(const Eigen::MatrixXd& x, const NormAdj& adj,
                           const GcnParams& p, const DropoutState& dropout) {
  return gcn_forward_cached(x, adj, p, dropout).out;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

int argmax_row(const Eigen::MatrixXd& m, Eigen::Index row) {
  int best = 0;
  for (Eigen::Index j = 1; j < m.cols(); ++j) {
    if (m(row, j) > m(row, best)) best = static_cast<int>(j);
  }
  return best;
}

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite values in ") + what);
}

Eigen::MatrixXd gcn_forward_full(const Eigen::MatrixXd& x, const NormAdj& adj,
                                 const GcnParams& p,
                                 const DropoutState& dropout) {
  return softmax_rows(gcn_hidden(x, adj, p, dropout));
}

GcnGradients gcn_backward_from_output(const GcnActivations& act,
                                      const NormAdj& adj, const GcnParams& p,
                                      const Eigen::MatrixXd& d_out) {
  if (d_out.rows() != act.out.rows() || d_out.cols() != act.out.cols()) {
    throw ShapeMismatch("gradient shape does not match gcn output");
  }
  GcnGradients g;
  Eigen::MatrixXd d_h1;
  if (p.tap() == GcnTap::kLayer1) {
    g.w1 = Eigen::MatrixXd(p.w1.rows(), 0);
    d_h1 = d_out;
  } else {
    const Eigen::MatrixXd d_z2 = d_out.cwiseProduct(act.mask2);
    g.w1 = act.ah1.transpose() * d_z2;
    // Ahat is symmetric, so Ahat^T d = Ahat d.
    d_h1 = adj.multiply(d_z2 * p.w1.transpose());
  }
  const Eigen::MatrixXd relu_grad =
      (act.z1.array() > 0.0).cast<double>().matrix();
  const Eigen::MatrixXd d_z1 =
      d_h1.cwiseProduct(act.mask1).cwiseProduct(relu_grad);
  g.w0 = act.ax.transpose() * d_z1;
  return g;
}

GcnGradients gcn_backward(const Eigen::MatrixXd& x, const NormAdj& adj,
                          const GcnParams& p, std::span<const int> gold,
                          std::span<const std::uint8_t> loss_mask,
                          const DropoutState& dropout) {
  if (static_cast<Eigen::Index>(gold.size()) != x.rows() ||
      gold.size() != loss_mask.size()) {
    throw ShapeMismatch("gold labels / loss mask must have one entry per node");
  }
  const GcnActivations act = gcn_forward_cached(x, adj, p, dropout);
  const Eigen::MatrixXd probs = softmax_rows(act.out);
  const Eigen::Index n = probs.rows();
  long supervised = 0;
  for (std::uint8_t m : loss_mask) supervised += m ? 1 : 0;

  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(n, probs.cols());
  double loss = 0.0;
  if (supervised > 0) {
    const double scale = 1.0 / static_cast<double>(supervised);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!loss_mask[i]) continue;
      const int y = gold[i];
      if (y < 0 || y >= probs.cols()) {
        throw IndexOutOfRange("gold label " + std::to_string(y) +
                              " outside output width");
      }
      loss -= std::log(probs(i, y));
      d_out.row(i) = probs.row(i) * scale;
      d_out(i, y) -= scale;
    }
    loss *= scale;
  }
  GcnGradients g = gcn_backward_from_output(act, adj, p, d_out);
  g.loss = loss;
  return g;
}

std::vector<GraphExample> make_graph_examples(const Corpus& corpus,
                                              const WordVectors& wv,
                                              const TagSet& tagset) {
  std::vector<GraphExample> out;
  out.reserve(corpus.sentences.size());
  for (const Sentence& s : corpus.sentences) {
    if (!s.arcs) {
      throw DataError("sentence " + std::to_string(s.sent_id) +
                      " has no dependency arcs");
    }
    GraphExample ex;
    ex.x = embed_tokens(wv, s);
    ex.adj = normalize_adjacency(build_graph(*s.arcs, s.size()));
    for (const Token& t : s.tokens) {
      std::optional<int> y = tagset.index(t.gold_tag);
      if (!y) throw UnknownTag(t.gold_tag);
      ex.gold.push_back(*y);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

GcnTrainResult train_gcn(const Corpus& corpus, const WordVectors& wv,
                         const GcnConfig& cfg, const TagSet& tagset) {
  const std::vector<GraphExample> examples =
      make_graph_examples(corpus, wv, tagset);
  return train_gcn(examples, tagset.size(), cfg);
}

GcnTrainResult train_gcn(std::span<const GraphExample> examples, int num_tags,
                         const GcnConfig& cfg) {
  cfg.check();
  if (examples.empty()) throw DataError("cannot train on an empty corpus");
  const Eigen::Index c = examples.front().x.cols();

  std::vector<const NormAdj*> blocks;
  Eigen::Index total = 0;
  for (const GraphExample& ex : examples) {
    blocks.push_back(&ex.adj);
    total += ex.x.rows();
  }
  const NormAdj adj = block_diag(std::span<const NormAdj* const>(blocks));
  Eigen::MatrixXd x(total, c);
  std::vector<int> gold;
  gold.reserve(static_cast<std::size_t>(total));
  Eigen::Index row = 0;
  for (const GraphExample& ex : examples) {
    x.middleRows(row, ex.x.rows()) = ex.x;
    row += ex.x.rows();
    gold.insert(gold.end(), ex.gold.begin(), ex.gold.end());
  }
  const std::vector<std::uint8_t> all(static_cast<std::size_t>(total), 1);

  GcnTrainResult result;
  result.params = init_gcn(static_cast<int>(c), cfg.hidden_dim, num_tags, cfg.seed);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const DropoutState dropout = DropoutState::train(
        cfg.dropout_rate, rng::mix(cfg.seed, 0x7a1, static_cast<std::uint64_t>(epoch)));
    GcnGradients g = gcn_backward(x, adj, result.params, gold, all, dropout);
    if (!std::isfinite(g.loss)) {
      throw NumericError("non-finite gcn loss at epoch " + std::to_string(epoch));
    }
    result.losses.push_back(g.loss);
    result.params.w0 -= cfg.learning_rate * g.w0;
    result.params.w1 -= cfg.learning_rate * g.w1;
    check_finite(result.params.w0, "gcn W0");
    check_finite(result.params.w1, "gcn W1");
  }
  return result;
}

std::vector<int> gcn_predict(const GcnParams& p, const GraphExample& ex) {
  const Eigen::MatrixXd probs =
      gcn_forward_full(ex.x, ex.adj, p, DropoutState::eval());
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) out[i] = argmax_row(probs, i);
  return out;
}

double gcn_accuracy(const GcnParams& p, std::span<const GraphExample> examples) {
  long correct = 0, total = 0;
  for (const GraphExample& ex : examples) {
    const std::vector<int> pred = gcn_predict(p, ex);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      correct += pred[i] == ex.gold[i] ? 1 : 0;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

namespace {

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      binio::write_f32(out, static_cast<float>(m(i, j)));
    }
  }
}

Eigen::MatrixXd read_matrix(std::istream& in, std::uint32_t rows,
                            std::uint32_t cols, const char* what) {
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i) {
    for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = binio::read_f32(in, what);
  }
  return m;
}

}  // namespace

void write_gcnp(const GcnParams& p, std::ostream& out) {
  binio::write_magic(out, "GCNP");
  binio::write_u32(out, kGcnpVersion);
  binio::write_u32(out, static_cast<std::uint32_t>(p.w0.rows()));
  binio::write_u32(out, static_cast<std::uint32_t>(p.w0.cols()));
  binio::write_u32(out, static_cast<std::uint32_t>(p.w1.cols()));
  write_matrix(out, p.w0);
  write_matrix(out, p.w1);
}

GcnParams read_gcnp(std::istream& in) {
  binio::expect_magic(in, "GCNP");
  const std::uint32_t version = binio::read_u32(in, "version");
  if (version != kGcnpVersion) {
    throw BadVersion("unsupported GCNP version " + std::to_string(version));
  }
  const std::uint32_t c = binio::read_u32(in, "C");
  const std::uint32_t h = binio::read_u32(in, "H");
  const std::uint32_t f = binio::read_u32(in, "F");
  GcnParams p;
  p.w0 = read_matrix(in, c, h, "W0");
  p.w1 = read_matrix(in, h, f, "W1");
  return p;
}

}  // namespace gcner
