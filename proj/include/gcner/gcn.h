#ifndef GCNER_GCN_H_
#define GCNER_GCN_H_

// Two-layer spectral graph convolution over per-sentence dependency graphs.
//
//   Ahat = D~^-1/2 (A + I) D~^-1/2
//   G    = drop(Ahat . drop(ReLU(Ahat X W0)) . W1)      (global features)
//   Z    = softmax(G)                                    (standalone tagger)
//
// Dropout is inverted (kept units scaled by 1/(1-rate)) and only active when
// the DropoutState is in training mode.

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gcner/corpus.h"
#include "gcner/embedio.h"

namespace gcner {

// Undirected, unweighted sentence graph. Edges are stored as (i, j), i < j,
// sorted and unique.
struct SentenceGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;
};

SentenceGraph build_graph(std::span<const DepArc> arcs, int n);

// Sparse symmetric operator in CSR form. Batched instances are block
// diagonal; block_offsets[k] is the first node of block k.
class NormAdj {
 public:
  NormAdj() = default;

  int n() const { return n_; }
  std::size_t nonzeros() const { return values_.size(); }
  const std::vector<int>& block_offsets() const { return block_offsets_; }
  std::size_t num_blocks() const { return block_offsets_.size(); }
  // Node count of block k.
  int block_size(std::size_t k) const;

  // Stored value at (i, j); 0 when structurally absent.
  double at(int i, int j) const;

  // Ahat * m. Row-wise accumulation in CSR order, so results are
  // reproducible bit for bit.
  Eigen::MatrixXd multiply(const Eigen::MatrixXd& m) const;

  Eigen::MatrixXd to_dense() const;

  const std::vector<int>& row_ptr() const { return row_ptr_; }
  const std::vector<int>& cols() const { return cols_; }
  const std::vector<double>& values() const { return values_; }

 private:
  friend NormAdj normalize_adjacency(const SentenceGraph& g);
  friend NormAdj block_diag(std::span<const NormAdj* const> blocks);

  int n_ = 0;
  std::vector<int> row_ptr_ = {0};
  std::vector<int> cols_;
  std::vector<double> values_;
  std::vector<int> block_offsets_;
};

NormAdj normalize_adjacency(const SentenceGraph& g);
NormAdj block_diag(std::span<const NormAdj* const> blocks);
NormAdj block_diag(std::span<const NormAdj> blocks);

// Which activation serves as the global feature: the second convolution
// output (default) or the first layer's ReLU output. A layer-1 model has an
// empty W1 (H x 0).
enum class GcnTap { kLayer1, kLayer2 };

struct GcnParams {
  Eigen::MatrixXd w0;  // C x H, input-to-hidden
  Eigen::MatrixXd w1;  // H x F, hidden-to-output

  int input_dim() const { return static_cast<int>(w0.rows()); }
  int hidden_dim() const { return static_cast<int>(w0.cols()); }
  int output_dim() const { return static_cast<int>(w1.cols()); }
  GcnTap tap() const { return w1.cols() == 0 ? GcnTap::kLayer1 : GcnTap::kLayer2; }
  // Width of the global feature for this tap.
  int feature_dim() const { return tap() == GcnTap::kLayer1 ? hidden_dim() : output_dim(); }

  friend bool operator==(const GcnParams& a, const GcnParams& b) {
    return a.w0.rows() == b.w0.rows() && a.w0.cols() == b.w0.cols() &&
           a.w1.rows() == b.w1.rows() && a.w1.cols() == b.w1.cols() &&
           a.w0 == b.w0 && a.w1 == b.w1;
  }
};

struct GcnConfig {
  int hidden_dim = 128;
  // F_g, the global-feature width when the GCN feeds the joint classifier.
  int out_dim = 128;
  double dropout_rate = 0.5;
  double learning_rate = 0.05;
  int epochs = 300;
  std::uint64_t seed = 7;
  GcnTap tap = GcnTap::kLayer2;

  void check() const;
};

// Dropout switch plus the seed of its mask stream.
struct DropoutState {
  bool training = false;
  double rate = 0.0;
  std::uint64_t seed = 0;

  static DropoutState eval() { return {}; }
  static DropoutState train(double rate, std::uint64_t seed) {
    return {true, rate, seed};
  }
  bool active() const { return training && rate > 0.0; }
  // Independent sub-stream for dropout site `site`.
  DropoutState derive(std::uint64_t site) const;
};

// Scaled keep-mask (entries 0 or 1/(1-rate)); all ones when inactive.
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols,
                             const DropoutState& state);

// U(-l, l) with l = sqrt(6 / (fan_in + fan_out)).
Eigen::MatrixXd glorot_uniform(int fan_in, int fan_out, std::uint64_t seed);

// Glorot-uniform initialization; input_dim x hidden, hidden x out_dim.
// out_dim == 0 gives a layer-1-tap model.
GcnParams init_gcn(int input_dim, int hidden_dim, int out_dim,
                   std::uint64_t seed);

// Everything the backward pass needs from a forward pass.
struct GcnActivations {
  Eigen::MatrixXd ax;      // Ahat X
  Eigen::MatrixXd z1;      // Ahat X W0
  Eigen::MatrixXd mask1;   // scaled dropout mask after layer 1
  Eigen::MatrixXd h1;      // drop(ReLU(z1))
  Eigen::MatrixXd ah1;     // Ahat h1      (layer-2 tap only)
  Eigen::MatrixXd mask2;   // scaled dropout mask after layer 2
  Eigen::MatrixXd out;     // global features
};

GcnActivations gcn_forward_cached(const Eigen::MatrixXd& x, const NormAdj& adj,
                                  const GcnParams& p,
                                  const DropoutState& dropout);

// Global features (pre-softmax output of the selected tap).
Eigen::MatrixXd gcn_hidden(const Eigen::MatrixXd& x, const NormAdj& adj,
                           const GcnParams& p, const DropoutState& dropout);

// Row-wise softmax of gcn_hidden().
Eigen::MatrixXd gcn_forward_full(const Eigen::MatrixXd& x, const NormAdj& adj,
                                 const GcnParams& p,
                                 const DropoutState& dropout);

struct GcnGradients {
  Eigen::MatrixXd w0;
  Eigen::MatrixXd w1;
  double loss = 0.0;
};

// Backpropagates d(loss)/d(out) through both convolutions.
GcnGradients gcn_backward_from_output(const GcnActivations& act,
                                      const NormAdj& adj, const GcnParams& p,
                                      const Eigen::MatrixXd& d_out);

// Masked mean cross-entropy of softmax(gcn_hidden) against node labels, with
// analytic gradients. Nodes with loss_mask == 0 contribute nothing.
GcnGradients gcn_backward(const Eigen::MatrixXd& x, const NormAdj& adj,
                          const GcnParams& p, std::span<const int> gold,
                          std::span<const std::uint8_t> loss_mask,
                          const DropoutState& dropout);

// Per-sentence graph inputs, precomputed once.
struct GraphExample {
  Eigen::MatrixXd x;  // words x C
  NormAdj adj;
  std::vector<int> gold;
};

std::vector<GraphExample> make_graph_examples(const Corpus& corpus,
                                              const WordVectors& wv,
                                              const TagSet& tagset);

struct GcnTrainResult {
  GcnParams params;
  std::vector<double> losses;  // one per epoch, before that epoch's update
};

// Standalone tagger: full-batch gradient descent over the block-diagonal
// system of every sentence, output width = tagset size.
GcnTrainResult train_gcn(const Corpus& corpus, const WordVectors& wv,
                         const GcnConfig& cfg, const TagSet& tagset);
GcnTrainResult train_gcn(std::span<const GraphExample> examples,
                         int num_tags, const GcnConfig& cfg);

// Argmax of the standalone tagger in eval mode; ties go to the lower index.
std::vector<int> gcn_predict(const GcnParams& p, const GraphExample& ex);

double gcn_accuracy(const GcnParams& p, std::span<const GraphExample> examples);

// GCNP container: "GCNP" u32 version u32 C u32 H u32 F, then W0 and W1
// row-major binary32 little-endian.
inline constexpr std::uint32_t kGcnpVersion = 1;
void write_gcnp(const GcnParams& p, std::ostream& out);
GcnParams read_gcnp(std::istream& in);

// Row-wise softmax with max subtraction.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

// Index of the row maximum; lowest index on ties.
int argmax_row(const Eigen::MatrixXd& m, Eigen::Index row);

// Throws NumericError if any entry is NaN or infinite.
void check_finite(const Eigen::MatrixXd& m, const char* what);

}  // namespace gcner

#endif  // GCNER_GCN_H_
