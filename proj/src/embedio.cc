#include "gcner/embedio.h"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "gcner/binio.h"
#include "gcner/errors.h"
#include "text_util.h"

namespace gcner {

WordVectors::WordVectors(int dim) : dim_(dim) {
  // Slot 0 holds the zero vector returned for unknown words.
  data_.assign(static_cast<std::size_t>(dim), 0.0f);
}

bool WordVectors::add(std::string surface, std::span<const float> vec) {
  if (static_cast<int>(vec.size()) != dim_) {
    throw ShapeMismatch("word vector width " + std::to_string(vec.size()) +
                        " != " + std::to_string(dim_));
  }
  const std::size_t offset = data_.size();
  if (!index_.emplace(std::move(surface), offset).second) return false;
  data_.insert(data_.end(), vec.begin(), vec.end());
  return true;
}

const float* WordVectors::find(std::string_view surface) const {
  auto it = index_.find(std::string(surface));
  if (it == index_.end()) return nullptr;
  return data_.data() + it->second;
}

WordVectors load_glove(std::istream& in, int expected_dim,
                       GloveReport* report) {
  WordVectors wv(expected_dim);
  std::vector<float> vec;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::string_view> fields = text::split_ws(text::strip_cr(line));
    if (fields.empty()) continue;
    const int width = static_cast<int>(fields.size()) - 1;
    if (wv.dim() == 0 && wv.size() == 0 && width > 0) wv = WordVectors(width);
    if (width != wv.dim()) {
      throw DimMismatch("expected " + std::to_string(wv.dim()) +
                            " components, got " + std::to_string(width),
                        line_no);
    }
    vec.clear();
    for (int k = 1; k <= width; ++k) {
      std::optional<float> v = text::parse_float(fields[k]);
      if (!v) {
        throw ParseError("bad float '" + std::string(fields[k]) + "'", line_no);
      }
      vec.push_back(*v);
    }
    if (!wv.add(std::string(fields[0]), vec) && report) {
      report->duplicate_lines.push_back(line_no);
    }
  }
  return wv;
}

std::span<const float> lookup(const WordVectors& wv, std::string_view surface) {
  const auto dim = static_cast<std::size_t>(wv.dim());
  if (const float* v = wv.find(surface)) return {v, dim};
  std::string lower(surface);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (const float* v = wv.find(lower)) return {v, dim};
  return {wv.zero_vector(), dim};
}

Eigen::MatrixXd embed_tokens(const WordVectors& wv, const Sentence& sentence) {
  Eigen::MatrixXd x(sentence.size(), wv.dim());
  for (int i = 0; i < sentence.size(); ++i) {
    std::span<const float> v = lookup(wv, sentence.tokens[i].surface);
    for (int k = 0; k < wv.dim(); ++k) x(i, k) = v[k];
  }
  return x;
}

int AlignmentMask::word_count() const {
  return std::accumulate(bits.begin(), bits.end(), 0);
}

AlignmentMask AlignmentMask::identity(int words) {
  AlignmentMask m;
  m.bits.assign(static_cast<std::size_t>(words), 1);
  return m;
}

void check_ctxe(const ContextualFile& file) {
  for (std::size_t i = 0; i < file.sentences.size(); ++i) {
    const ContextualSentence& s = file.sentences[i];
    if (s.sent_id != i) {
      throw InvalidContainer("sent_id " + std::to_string(s.sent_id) +
                             " at position " + std::to_string(i) +
                             "; ids must run 0, 1, 2, ...");
    }
    for (std::uint8_t b : s.mask.bits) {
      if (b > 1) {
        throw InvalidContainer("mask byte not in {0,1} in sentence " +
                               std::to_string(s.sent_id));
      }
    }
    if (s.vectors.rows() != s.mask.subword_count() ||
        (s.vectors.rows() > 0 && s.vectors.cols() != file.ctx_dim)) {
      throw ShapeMismatch("sentence " + std::to_string(s.sent_id) +
                          " vectors do not match mask length / ctx_dim");
    }
    if (static_cast<std::uint32_t>(s.mask.word_count()) != s.word_count) {
      throw MaskSumMismatch("sentence " + std::to_string(s.sent_id) +
                                ": mask sum " +
                                std::to_string(s.mask.word_count()) +
                                " != word_count " +
                                std::to_string(s.word_count),
                            s.sent_id);
    }
  }
}

void write_ctxe(const ContextualFile& file, std::ostream& out) {
  check_ctxe(file);
  binio::write_magic(out, "CTXE");
  binio::write_u32(out, kCtxeVersion);
  binio::write_u32(out, file.ctx_dim);
  binio::write_u32(out, static_cast<std::uint32_t>(file.sentences.size()));
  for (const ContextualSentence& s : file.sentences) {
    binio::write_u32(out, s.sent_id);
    binio::write_u32(out, static_cast<std::uint32_t>(s.mask.bits.size()));
    binio::write_u32(out, s.word_count);
    out.write(reinterpret_cast<const char*>(s.mask.bits.data()),
              static_cast<std::streamsize>(s.mask.bits.size()));
    for (Eigen::Index r = 0; r < s.vectors.rows(); ++r) {
      for (Eigen::Index c = 0; c < s.vectors.cols(); ++c) {
        binio::write_f32(out, s.vectors(r, c));
      }
    }
  }
}

ContextualFile read_ctxe(std::istream& in) {
  binio::expect_magic(in, "CTXE");
  const std::uint32_t version = binio::read_u32(in, "version");
  if (version != kCtxeVersion) {
    throw BadVersion("unsupported CTXE version " + std::to_string(version));
  }
  ContextualFile file;
  file.ctx_dim = binio::read_u32(in, "ctx_dim");
  const std::uint32_t count = binio::read_u32(in, "sentence_count");
  for (std::uint32_t i = 0; i < count; ++i) {
    ContextualSentence s;
    s.sent_id = binio::read_u32(in, "sent_id");
    const std::uint32_t subwords = binio::read_u32(in, "subword_count");
    s.word_count = binio::read_u32(in, "word_count");
    s.mask.bits.resize(subwords);
    binio::read_exact(in, reinterpret_cast<char*>(s.mask.bits.data()), subwords,
                      "mask");
    s.vectors.resize(subwords, file.ctx_dim);
    std::vector<char> raw(static_cast<std::size_t>(subwords) * file.ctx_dim * 4);
    binio::read_exact(in, raw.data(), raw.size(), "vectors");
    const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
    for (std::size_t k = 0; k < raw.size() / 4; ++k) {
      const std::uint32_t u = static_cast<std::uint32_t>(bytes[4 * k]) |
                              (static_cast<std::uint32_t>(bytes[4 * k + 1]) << 8) |
                              (static_cast<std::uint32_t>(bytes[4 * k + 2]) << 16) |
                              (static_cast<std::uint32_t>(bytes[4 * k + 3]) << 24);
      s.vectors.data()[k] = std::bit_cast<float>(u);
    }
    file.sentences.push_back(std::move(s));
  }
  check_ctxe(file);
  return file;
}

void ValidationReport::add(std::string message) {
  ++total_violations;
  if (violations.size() < kMaxListed) violations.push_back(std::move(message));
}

ValidationReport validate_ctxe_against_corpus(const ContextualFile& file,
                                              const Corpus& corpus) {
  ValidationReport report;
  if (file.sentences.size() != corpus.sentences.size()) {
    report.add("sentence count: CTXE has " +
               std::to_string(file.sentences.size()) + ", corpus has " +
               std::to_string(corpus.sentences.size()));
  }
  const std::size_t n = std::min(file.sentences.size(), corpus.sentences.size());
  for (std::size_t i = 0; i < n; ++i) {
    const ContextualSentence& c = file.sentences[i];
    const Sentence& s = corpus.sentences[i];
    if (static_cast<int>(c.word_count) != s.size()) {
      report.add("sentence " + std::to_string(i) + ": CTXE word_count " +
                 std::to_string(c.word_count) + " != corpus tokens " +
                 std::to_string(s.size()));
    } else if (c.mask.word_count() != s.size()) {
      report.add("sentence " + std::to_string(i) + ": mask sum " +
                 std::to_string(c.mask.word_count()) + " != corpus tokens " +
                 std::to_string(s.size()));
    }
  }
  return report;
}

}  // namespace gcner
