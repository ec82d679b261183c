#include "gcner/corpus.h"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "gcner/errors.h"
#include "text_util.h"

namespace gcner {

std::string_view to_string(EntityType type) {
  switch (type) {
    case EntityType::kLoc: return "LOC";
    case EntityType::kMisc: return "MISC";
    case EntityType::kOrg: return "ORG";
    case EntityType::kPer: return "PER";
  }
  return "?";
}

std::optional<EntityType> parse_entity_type(std::string_view name) {
  for (EntityType t : kEntityTypes) {
    if (to_string(t) == name) return t;
  }
  return std::nullopt;
}

std::string_view to_string(Scheme scheme) {
  return scheme == Scheme::kIob1 ? "iob1" : "iob2";
}

std::optional<Scheme> parse_scheme(std::string_view name) {
  if (name == "iob1" || name == "IOB1") return Scheme::kIob1;
  if (name == "iob2" || name == "IOB2") return Scheme::kIob2;
  return std::nullopt;
}

std::vector<std::string> Sentence::gold_tags() const {
  std::vector<std::string> tags;
  tags.reserve(tokens.size());
  for (const Token& t : tokens) tags.push_back(t.gold_tag);
  return tags;
}

bool Corpus::has_deps() const {
  return std::all_of(sentences.begin(), sentences.end(),
                     [](const Sentence& s) { return s.arcs.has_value(); });
}

TagSet TagSet::conll2003(Scheme scheme) {
  std::vector<std::string> labels = {"O"};
  for (EntityType t : kEntityTypes) {
    labels.push_back("B-" + std::string(to_string(t)));
    labels.push_back("I-" + std::string(to_string(t)));
  }
  return TagSet(std::move(labels), scheme);
}

TagSet::TagSet(std::vector<std::string> labels, Scheme scheme)
    : labels_(std::move(labels)), scheme_(scheme) {
  for (int i = 0; i < static_cast<int>(labels_.size()); ++i) {
    const std::string& l = labels_[i];
    if (l != "O") {
      if (l.size() < 3 || (l[0] != 'B' && l[0] != 'I') || l[1] != '-' ||
          !parse_entity_type(std::string_view(l).substr(2))) {
        throw ConfigError("invalid tag set label '" + l + "'");
      }
    }
    if (!index_.emplace(l, i).second) {
      throw ConfigError("duplicate tag set label '" + l + "'");
    }
  }
  if (!index_.count("O")) throw ConfigError("tag set must contain 'O'");
}

std::optional<int> TagSet::index(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

bool is_docstart(const std::vector<std::string_view>& fields) {
  return !fields.empty() && fields[0] == "-DOCSTART-";
}

// Splits "B-PER" into ('B', PER). Returns false for "O".
bool split_tag(const std::string& tag, char* prefix, EntityType* type) {
  if (tag == "O") return false;
  std::optional<EntityType> t;
  if (tag.size() >= 3 && tag[1] == '-') {
    t = parse_entity_type(std::string_view(tag).substr(2));
  }
  if (!t || (tag[0] != 'B' && tag[0] != 'I')) throw UnknownTag(tag);
  *prefix = tag[0];
  *type = *t;
  return true;
}

}  // namespace

Corpus parse_conll(std::istream& in, const TagSet& tagset) {
  Corpus corpus;
  Sentence current;
  int doc_id = 0;
  bool seen_content = false;
  std::size_t expected_columns = 0;

  auto flush = [&]() {
    if (current.tokens.empty()) return;
    std::vector<std::string> raw = current.gold_tags();
    std::vector<EntitySpan> spans = iob_to_spans(raw, tagset.scheme());
    std::vector<std::string> iob2 =
        spans_to_iob(spans, current.size(), Scheme::kIob2);
    for (int i = 0; i < current.size(); ++i) {
      current.tokens[i].gold_tag = std::move(iob2[i]);
    }
    current.doc_id = doc_id;
    current.sent_id = static_cast<int>(corpus.sentences.size());
    corpus.sentences.push_back(std::move(current));
    current = Sentence();
    seen_content = true;
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = text::strip_cr(line);
    std::vector<std::string_view> fields = text::split_ws(view);
    if (fields.empty()) {
      flush();
      continue;
    }
    if (is_docstart(fields)) {
      flush();
      if (seen_content) ++doc_id;
      seen_content = true;
      continue;
    }
    if (fields.size() < 2) {
      throw MalformedLine("token line needs at least two columns", line_no);
    }
    if (expected_columns == 0) expected_columns = fields.size();
    if (fields.size() != expected_columns) {
      throw MalformedLine("expected " + std::to_string(expected_columns) +
                              " columns, got " + std::to_string(fields.size()),
                          line_no);
    }
    std::string tag(fields.back());
    if (!tagset.contains(tag)) throw UnknownTag(tag);
    Token token;
    token.surface = std::string(fields[0]);
    token.raw_tag = tag;
    token.gold_tag = std::move(tag);
    if (fields.size() >= 3) token.pos = std::string(fields[1]);
    current.tokens.push_back(std::move(token));
  }
  flush();
  corpus.num_documents = seen_content ? doc_id + 1 : 0;
  return corpus;
}

std::vector<std::vector<DepArc>> parse_conllu_deps(std::istream& in) {
  std::vector<std::vector<DepArc>> out;
  std::vector<DepArc> current;
  std::vector<std::size_t> lines;  // line number per arc, for error reports

  auto flush = [&]() {
    if (current.empty()) return;
    const int n = static_cast<int>(current.size());
    for (int i = 0; i < n; ++i) {
      const DepArc& a = current[i];
      if (a.head != kRootHead && (a.head < 0 || a.head >= n)) {
        throw BadHeadIndex("HEAD " + std::to_string(a.head + 1) +
                               " exceeds sentence length " + std::to_string(n),
                           lines[i]);
      }
    }
    out.push_back(std::move(current));
    current.clear();
    lines.clear();
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = text::strip_cr(line);
    if (text::trim(view).empty()) {
      flush();
      continue;
    }
    if (view.front() == '#') continue;
    std::vector<std::string_view> cols = text::split(view, '\t');
    if (cols.size() != 10) {
      throw MalformedLine("CoNLL-U line needs 10 tab-separated columns, got " +
                              std::to_string(cols.size()),
                          line_no);
    }
    const std::string_view id_col = cols[0];
    // Multiword ranges ("1-2") and empty nodes ("3.1") carry no arcs.
    if (id_col.find('-') != std::string_view::npos ||
        id_col.find('.') != std::string_view::npos) {
      continue;
    }
    std::optional<long> id = text::parse_int(id_col);
    std::optional<long> head = text::parse_int(cols[6]);
    if (!id || !head) throw MalformedLine("non-integer ID or HEAD", line_no);
    if (*id != static_cast<long>(current.size()) + 1) {
      throw MalformedLine("token IDs must run 1, 2, ... within a sentence",
                          line_no);
    }
    if (*head < 0 || *head == *id) {
      throw BadHeadIndex("invalid HEAD " + std::string(cols[6]), line_no);
    }
    DepArc arc;
    arc.dependent = static_cast<int>(*id - 1);
    arc.head = *head == 0 ? kRootHead : static_cast<int>(*head - 1);
    arc.relation = std::string(cols[7]);
    current.push_back(std::move(arc));
    lines.push_back(line_no);
  }
  flush();
  return out;
}

Corpus attach_deps(Corpus corpus, std::vector<std::vector<DepArc>> arcs) {
  if (arcs.size() != corpus.sentences.size()) {
    throw CountMismatch("dependency file has " + std::to_string(arcs.size()) +
                        " sentences, corpus has " +
                        std::to_string(corpus.sentences.size()));
  }
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    Sentence& s = corpus.sentences[i];
    if (static_cast<int>(arcs[i].size()) != s.size()) {
      throw CountMismatch("sentence " + std::to_string(s.sent_id) + " has " +
                          std::to_string(s.size()) + " tokens but " +
                          std::to_string(arcs[i].size()) + " arcs");
    }
    s.arcs = std::move(arcs[i]);
  }
  return corpus;
}

std::vector<EntitySpan> iob_to_spans(std::span<const std::string> tags,
                                     Scheme scheme, DecodeStats* stats) {
  std::vector<EntitySpan> spans;
  bool open = false;
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    char prefix = 0;
    EntityType type{};
    if (!split_tag(tags[i], &prefix, &type)) {
      open = false;
      continue;
    }
    const bool continues = prefix == 'I' && open && spans.back().type == type;
    if (continues) {
      spans.back().end = i;
      continue;
    }
    // IOB2 requires B- at every span start; an orphan I- is repaired.
    if (prefix == 'I' && scheme == Scheme::kIob2 && stats) ++stats->repairs;
    spans.push_back({i, i, type});
    open = true;
  }
  return spans;
}

std::vector<std::string> spans_to_iob(std::span<const EntitySpan> spans,
                                      int length, Scheme scheme) {
  std::vector<std::string> tags(static_cast<std::size_t>(length), "O");
  int last_end = -1;
  const EntitySpan* prev = nullptr;
  for (const EntitySpan& s : spans) {
    if (s.start < 0 || s.end < s.start || s.end >= length) {
      throw IndexOutOfRange("span [" + std::to_string(s.start) + "," +
                            std::to_string(s.end) + "] outside length " +
                            std::to_string(length));
    }
    if (s.start <= last_end) throw OverlapError("spans overlap or are unsorted");
    const std::string type(to_string(s.type));
    bool begin = scheme == Scheme::kIob2;
    if (scheme == Scheme::kIob1) {
      begin = prev && prev->end + 1 == s.start && prev->type == s.type;
    }
    for (int i = s.start; i <= s.end; ++i) {
      tags[i] = (i == s.start && begin ? "B-" : "I-") + type;
    }
    last_end = s.end;
    prev = &s;
  }
  return tags;
}

Stats corpus_stats(const Corpus& corpus) {
  Stats stats;
  stats.sentences = static_cast<long>(corpus.sentences.size());
  stats.documents = corpus.num_documents;
  for (EntityType t : kEntityTypes) stats.entities[t] = 0;
  for (const Sentence& s : corpus.sentences) {
    stats.tokens += s.size();
    for (const Token& t : s.tokens) {
      if (!t.pos.empty()) ++stats.pos_counts[t.pos];
    }
    std::vector<std::string> tags = s.gold_tags();
    for (const EntitySpan& span : iob_to_spans(tags, Scheme::kIob2)) {
      ++stats.entities[span.type];
      for (int i = span.start; i <= span.end; ++i) {
        ++stats.entity_surface_mentions[s.tokens[i].surface];
        ++stats.entity_tokens;
      }
    }
    if (s.arcs) {
      for (const DepArc& a : *s.arcs) ++stats.deprel_counts[a.relation];
    }
  }
  return stats;
}

}  // namespace gcner
