#ifndef GCNER_CORPUS_H_
#define GCNER_CORPUS_H_

// CoNLL-2003 NER data, CoNLL-U dependency arcs and IOB span coding.

#include <array>
#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gcner {

// Declaration order is also the report row order.
enum class EntityType : std::uint8_t { kLoc, kMisc, kOrg, kPer };

inline constexpr std::array<EntityType, 4> kEntityTypes = {
    EntityType::kLoc, EntityType::kMisc, EntityType::kOrg, EntityType::kPer};

std::string_view to_string(EntityType type);
std::optional<EntityType> parse_entity_type(std::string_view name);

enum class Scheme { kIob1, kIob2 };

std::string_view to_string(Scheme scheme);
std::optional<Scheme> parse_scheme(std::string_view name);

// Inclusive token range [start, end] of one typed entity.
struct EntitySpan {
  int start = 0;
  int end = 0;
  EntityType type = EntityType::kLoc;

  friend auto operator<=>(const EntitySpan&, const EntitySpan&) = default;
};

struct Token {
  std::string surface;
  std::string gold_tag;  // always IOB2 once inside a Corpus
  std::string pos;       // second column when present, else empty
  std::string raw_tag;   // tag column exactly as read
};

inline constexpr int kRootHead = -1;

// One head-dependent relation; indices are 0-based, kRootHead for ROOT.
struct DepArc {
  int dependent = 0;
  int head = kRootHead;
  std::string relation;

  friend bool operator==(const DepArc&, const DepArc&) = default;
};

struct Sentence {
  std::vector<Token> tokens;
  int doc_id = 0;
  int sent_id = 0;
  std::optional<std::vector<DepArc>> arcs;

  int size() const { return static_cast<int>(tokens.size()); }
  std::vector<std::string> gold_tags() const;
};

struct Corpus {
  std::vector<Sentence> sentences;
  int num_documents = 0;

  bool has_deps() const;
};

// Ordered IOB label inventory. The nine CoNLL-2003 labels are fixed; the
// scheme only says how tags in an input file are to be read.
class TagSet {
 public:
  static TagSet conll2003(Scheme scheme = Scheme::kIob2);

  TagSet(std::vector<std::string> labels, Scheme scheme);

  const std::vector<std::string>& labels() const { return labels_; }
  Scheme scheme() const { return scheme_; }
  int size() const { return static_cast<int>(labels_.size()); }
  std::optional<int> index(std::string_view label) const;
  const std::string& label(int index) const { return labels_.at(index); }
  bool contains(std::string_view label) const { return index(label).has_value(); }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
  Scheme scheme_;
};

// Counters for IOB repairs made while decoding.
struct DecodeStats {
  int repairs = 0;
};

// Reads CoNLL-2003 column data. Tags are validated against `tagset`, read
// under tagset.scheme() and normalized to IOB2.
Corpus parse_conll(std::istream& in, const TagSet& tagset);

// One arc list per CoNLL-U sentence, 0-based, in file order.
std::vector<std::vector<DepArc>> parse_conllu_deps(std::istream& in);

// Joins dependency arcs onto a corpus; throws CountMismatch unless sentence
// and token counts agree one to one.
Corpus attach_deps(Corpus corpus, std::vector<std::vector<DepArc>> arcs);

std::vector<EntitySpan> iob_to_spans(std::span<const std::string> tags,
                                     Scheme scheme,
                                     DecodeStats* stats = nullptr);

std::vector<std::string> spans_to_iob(std::span<const EntitySpan> spans,
                                      int length, Scheme scheme);

struct Stats {
  long sentences = 0;
  long documents = 0;
  long tokens = 0;
  long entity_tokens = 0;
  std::map<EntityType, long> entities;
  std::map<std::string, long> entity_surface_mentions;
  std::map<std::string, long> pos_counts;
  std::map<std::string, long> deprel_counts;
};

Stats corpus_stats(const Corpus& corpus);

}  // namespace gcner

#endif  // GCNER_CORPUS_H_
