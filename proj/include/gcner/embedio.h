#ifndef GCNER_EMBEDIO_H_
#define GCNER_EMBEDIO_H_

// Static word vectors (GloVe text format) and the CTXE contextual-embedding
// container.
//
// CTXE layout, all integers little-endian:
//   "CTXE" u32 version(=1) u32 ctx_dim u32 sentence_count
//   per sentence: u32 sent_id u32 subword_count u32 word_count
//                 u8 mask[subword_count]            (each 0 or 1)
//                 f32 vectors[subword_count * ctx_dim]   (row-major)

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "gcner/corpus.h"

namespace gcner {

class WordVectors {
 public:
  explicit WordVectors(int dim = 0);

  int dim() const { return dim_; }
  std::size_t size() const { return index_.size(); }

  // Returns false (and stores nothing) when the surface is already present.
  bool add(std::string surface, std::span<const float> vec);

  // Exact match only; nullptr when absent.
  const float* find(std::string_view surface) const;
  const float* zero_vector() const { return data_.data(); }

 private:
  int dim_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> data_;
};

struct GloveReport {
  std::vector<std::size_t> duplicate_lines;
};

// Reads "surface f1 ... f_dim" lines. expected_dim == 0 takes the width of
// the first line. Duplicate surfaces keep the first vector.
WordVectors load_glove(std::istream& in, int expected_dim,
                       GloveReport* report = nullptr);

// Exact match, then lower-cased, then the zero vector.
std::span<const float> lookup(const WordVectors& wv, std::string_view surface);

// Rows are lookup() of each token surface.
Eigen::MatrixXd embed_tokens(const WordVectors& wv, const Sentence& sentence);

struct AlignmentMask {
  std::vector<std::uint8_t> bits;

  int subword_count() const { return static_cast<int>(bits.size()); }
  int word_count() const;
  // One 1-bit per word; used when no subword segmentation exists.
  static AlignmentMask identity(int words);

  friend bool operator==(const AlignmentMask&, const AlignmentMask&) = default;
};

using FloatRowMatrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ContextualSentence {
  std::uint32_t sent_id = 0;
  std::uint32_t word_count = 0;
  AlignmentMask mask;
  FloatRowMatrix vectors;  // subword_count x ctx_dim

  friend bool operator==(const ContextualSentence& a,
                         const ContextualSentence& b) {
    return a.sent_id == b.sent_id && a.word_count == b.word_count &&
           a.mask == b.mask && a.vectors.rows() == b.vectors.rows() &&
           a.vectors.cols() == b.vectors.cols() && a.vectors == b.vectors;
  }
};

struct ContextualFile {
  std::uint32_t ctx_dim = 0;
  std::vector<ContextualSentence> sentences;

  friend bool operator==(const ContextualFile&, const ContextualFile&) = default;
};

inline constexpr std::uint32_t kCtxeVersion = 1;

// Throws on any invariant violation before writing a byte.
void write_ctxe(const ContextualFile& file, std::ostream& out);
ContextualFile read_ctxe(std::istream& in);

// Throws the same errors read_ctxe would for an in-memory file.
void check_ctxe(const ContextualFile& file);

struct ValidationReport {
  static constexpr std::size_t kMaxListed = 10;

  std::size_t total_violations = 0;
  std::vector<std::string> violations;  // first kMaxListed only

  bool ok() const { return total_violations == 0; }
  void add(std::string message);
};

ValidationReport validate_ctxe_against_corpus(const ContextualFile& file,
                                              const Corpus& corpus);

}  // namespace gcner

#endif  // GCNER_EMBEDIO_H_
