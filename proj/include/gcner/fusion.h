#ifndef GCNER_FUSION_H_
#define GCNER_FUSION_H_

// Joint tagger: GCN word features are placed at first-subword positions,
// concatenated with contextual subword vectors and classified by a single
// linear + softmax layer. Only first-subword rows are supervised or decoded.

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "gcner/corpus.h"
#include "gcner/embedio.h"
#include "gcner/gcn.h"
#include "gcner/metrics.h"

namespace gcner {

enum class Mode { kGlobalOnly, kContextualOnly, kJoint };

std::string_view to_string(Mode mode);
std::optional<Mode> parse_mode(std::string_view name);
inline bool uses_global(Mode m) { return m != Mode::kContextualOnly; }
inline bool uses_contextual(Mode m) { return m != Mode::kGlobalOnly; }

enum class Optimizer { kSgd, kAdam };

std::string_view to_string(Optimizer opt);
std::optional<Optimizer> parse_optimizer(std::string_view name);

struct TrainConfig {
  int batch_size = 16;
  double learning_rate = 5e-5;
  int epochs = 4;
  double dropout = 0.5;  // on the fused vector
  std::uint64_t seed = 7;
  Mode mode = Mode::kJoint;
  Optimizer optimizer = Optimizer::kSgd;

  void check() const;
};

struct JointParams {
  Eigen::MatrixXd w_out;  // (global_dim + ctx_dim) x T
  Eigen::MatrixXd b;      // 1 x T
  int global_dim = 0;
  int ctx_dim = 0;
  std::optional<GcnParams> gcn;  // present iff global_dim > 0

  Mode mode() const;
  int num_tags() const { return static_cast<int>(w_out.cols()); }

  friend bool operator==(const JointParams&, const JointParams&);
};

struct Prediction {
  int sent_id = 0;
  std::vector<std::string> tags;  // one per word
  Eigen::MatrixXd probs;          // words x T
};

// Row k is the next unused word row when mask[k] == 1, zeros otherwise.
Eigen::MatrixXd align_global(const Eigen::MatrixXd& word_features,
                             const AlignmentMask& mask);

// Row-wise concatenation, global block first.
Eigen::MatrixXd fuse(const Eigen::MatrixXd& global_aligned,
                     const Eigen::MatrixXd& contextual);

// softmax(drop(fused) W_out + b).
Eigen::MatrixXd classifier_forward(const Eigen::MatrixXd& fused,
                                   const JointParams& p,
                                   const DropoutState& dropout);

// Mean -log p(gold) over rows with mask == 1; gold has one entry per word.
double masked_cross_entropy(const Eigen::MatrixXd& probs,
                            std::span<const int> gold,
                            const AlignmentMask& mask);

// One sentence, with whatever inputs its mode needs.
struct JointExample {
  int sent_id = 0;
  AlignmentMask mask;
  Eigen::MatrixXd ctx;  // subwords x ctx_dim; empty for global-only
  Eigen::MatrixXd x;    // words x C; empty for contextual-only
  NormAdj adj;
  std::vector<int> gold;
};

struct JointDataset {
  Mode mode = Mode::kJoint;
  int input_dim = 0;  // C
  int ctx_dim = 0;
  std::vector<JointExample> examples;
};

// Builds model inputs. Global modes need dependency arcs and word vectors;
// contextual modes need a CTXE file that validates against the corpus.
// Global-only examples use one row per word.
JointDataset make_joint_dataset(const Corpus& corpus, const WordVectors* wv,
                                const ContextualFile* ctx, const TagSet& tagset,
                                Mode mode);

struct JointDropout {
  DropoutState gcn;
  DropoutState head;
};

struct JointGradients {
  Eigen::MatrixXd w_out;
  Eigen::MatrixXd b;
  std::optional<GcnGradients> gcn;
  double loss = 0.0;
  long supervised = 0;
};

// Loss over a minibatch (mean over every supervised position) and analytic
// gradients of all parameters. The GCN runs once over the block-diagonal
// batch graph.
JointGradients joint_backward(const JointParams& p,
                              std::span<const JointExample* const> batch,
                              const JointDropout& dropout);

JointParams init_joint(const JointDataset& data, const GcnConfig& gcn_cfg,
                       int num_tags, std::uint64_t seed);

struct JointTrainResult {
  JointParams params;
  std::vector<double> losses;  // supervised-position mean per epoch
};

JointTrainResult train_joint(const JointDataset& data, const GcnConfig& gcn_cfg,
                             const TrainConfig& cfg, int num_tags);

// Eval-mode tagging; argmax ties go to the lower tag index.
Prediction predict(const JointParams& p, const JointExample& ex,
                   const TagSet& tagset);

double token_accuracy(const JointParams& p, const JointDataset& data);

struct Evaluation {
  EvalReport relaxed;
  EvalReport strict;
  std::vector<Prediction> predictions;
  int repairs = 0;  // IOB2 repairs while decoding predictions
};

Evaluation evaluate(const JointParams& p, const JointDataset& data,
                    const TagSet& tagset);

// Standalone-GCN counterpart of evaluate().
Evaluation evaluate_gcn(const GcnParams& p, std::span<const GraphExample> data,
                        const TagSet& tagset);

struct ModelInputs {
  const Corpus* corpus = nullptr;
  const WordVectors* wv = nullptr;
  const ContextualFile* ctx = nullptr;
};

struct AblationRow {
  Mode mode;
  std::string label;
  Evaluation eval;
};

// Trains and evaluates global-only, contextual-only and joint models with
// identical seeds and hyperparameters.
std::vector<AblationRow> ablation_run(const ModelInputs& train,
                                      const ModelInputs& test,
                                      const GcnConfig& gcn_cfg,
                                      const TrainConfig& cfg,
                                      const TagSet& tagset);

std::string ablation_label(Mode mode);
std::string format_ablation(const std::vector<AblationRow>& rows);

// FUSE container: "FUSE" u32 version u32 F_g u32 ctx_dim u32 T, W_out and b
// binary32 little-endian, then a GCNP block when F_g > 0.
inline constexpr std::uint32_t kFuseVersion = 1;
void write_fuse(const JointParams& p, std::ostream& out);
JointParams read_fuse(std::istream& in);

}  // namespace gcner

#endif  // GCNER_FUSION_H_
