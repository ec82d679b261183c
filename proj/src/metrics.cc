#include "gcner/metrics.h"

#include <cmath>
#include <cstdio>

#include "gcner/errors.h"

namespace gcner {

namespace {

bool overlaps(const EntitySpan& a, const EntitySpan& b) {
  return a.type == b.type && a.start <= b.end && b.start <= a.end;
}

// Spans are sorted and non-overlapping, so a two-pointer sweep finds every
// same-type overlap in linear time.
void count_relaxed(const std::vector<EntitySpan>& gold,
                   const std::vector<EntitySpan>& pred,
                   std::map<EntityType, TypeCounts>& counts) {
  std::vector<bool> gold_hit(gold.size(), false), pred_hit(pred.size(), false);
  for (EntityType t : kEntityTypes) {
    std::vector<std::size_t> g, p;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (gold[i].type == t) g.push_back(i);
    }
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i].type == t) p.push_back(i);
    }
    std::size_t a = 0, b = 0;
    while (a < g.size() && b < p.size()) {
      const EntitySpan& gs = gold[g[a]];
      const EntitySpan& ps = pred[p[b]];
      if (overlaps(gs, ps)) {
        gold_hit[g[a]] = true;
        pred_hit[p[b]] = true;
      }
      if (gs.end < ps.end) {
        ++a;
      } else {
        ++b;
      }
    }
  }
  for (std::size_t i = 0; i < gold.size(); ++i) {
    TypeCounts& c = counts[gold[i].type];
    ++c.n_gold;
    if (gold_hit[i]) ++c.tp_gold;
  }
  for (std::size_t i = 0; i < pred.size(); ++i) {
    TypeCounts& c = counts[pred[i].type];
    ++c.n_pred;
    if (pred_hit[i]) ++c.tp_pred;
  }
}

void count_strict(const std::vector<EntitySpan>& gold,
                  const std::vector<EntitySpan>& pred,
                  std::map<EntityType, TypeCounts>& counts) {
  for (const EntitySpan& g : gold) ++counts[g.type].n_gold;
  for (const EntitySpan& p : pred) ++counts[p.type].n_pred;
  std::size_t a = 0, b = 0;
  while (a < gold.size() && b < pred.size()) {
    if (gold[a] == pred[b]) {
      ++counts[gold[a].type].tp_gold;
      ++counts[gold[a].type].tp_pred;
      ++a;
      ++b;
    } else if (std::pair(gold[a].start, gold[a].end) <
               std::pair(pred[b].start, pred[b].end)) {
      ++a;
    } else {
      ++b;
    }
  }
}

template <typename CountFn>
EvalReport score(const SpanLists& gold, const SpanLists& pred, CountFn fn) {
  if (gold.size() != pred.size()) {
    throw LengthMismatch("gold has " + std::to_string(gold.size()) +
                         " sentences, predictions have " +
                         std::to_string(pred.size()));
  }
  EvalReport r;
  for (EntityType t : kEntityTypes) r.counts[t] = {};
  for (std::size_t i = 0; i < gold.size(); ++i) fn(gold[i], pred[i], r.counts);
  TypeCounts pooled;
  for (const auto& [type, c] : r.counts) {
    r.per_type[type] = prf_from_counts(c);
    pooled.tp_pred += c.tp_pred;
    pooled.tp_gold += c.tp_gold;
    pooled.n_pred += c.n_pred;
    pooled.n_gold += c.n_gold;
  }
  r.overall = prf_from_counts(pooled);
  return r;
}

std::string cell(double v) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

Prf prf_from_counts(const TypeCounts& c) {
  Prf out;
  if (c.n_pred > 0) out.p = 100.0 * static_cast<double>(c.tp_pred) / static_cast<double>(c.n_pred);
  if (c.n_gold > 0) out.r = 100.0 * static_cast<double>(c.tp_gold) / static_cast<double>(c.n_gold);
  if (out.p + out.r > 0.0) out.f1 = 2.0 * out.p * out.r / (out.p + out.r);
  return out;
}

EvalReport relaxed_prf(const SpanLists& gold, const SpanLists& pred) {
  return score(gold, pred, count_relaxed);
}

EvalReport strict_prf(const SpanLists& gold, const SpanLists& pred) {
  return score(gold, pred, count_strict);
}

std::string format_report(const EvalReport& r) {
  std::string out;
  char line[128];
  auto row = [&](const std::string& name, const Prf& v) {
    std::snprintf(line, sizeof(line), "%-12s %10s %10s %10s\n", name.c_str(),
                  cell(v.p).c_str(), cell(v.r).c_str(), cell(v.f1).c_str());
    out += line;
  };
  std::snprintf(line, sizeof(line), "%-12s %10s %10s %10s\n", "Entity type",
                "Precision", "Recall", "F1-score");
  out += line;
  out += std::string(45, '-') + "\n";
  for (EntityType t : kEntityTypes) {
    auto it = r.per_type.find(t);
    row(std::string(to_string(t)), it == r.per_type.end() ? Prf{} : it->second);
  }
  out += std::string(45, '-') + "\n";
  row("Overall", r.overall);
  return out;
}

nlohmann::ordered_json report_record(const EvalReport& r) {
  auto prf = [](const Prf& v) {
    nlohmann::ordered_json j;
    j["p"] = v.p;
    j["r"] = v.r;
    j["f1"] = v.f1;
    return j;
  };
  nlohmann::ordered_json j;
  j["overall"] = prf(r.overall);
  j["per_type"] = nlohmann::ordered_json::object();
  j["counts"] = nlohmann::ordered_json::object();
  for (EntityType t : kEntityTypes) {
    const std::string name(to_string(t));
    auto pt = r.per_type.find(t);
    j["per_type"][name] = prf(pt == r.per_type.end() ? Prf{} : pt->second);
    auto ct = r.counts.find(t);
    const TypeCounts c = ct == r.counts.end() ? TypeCounts{} : ct->second;
    j["counts"][name] = {{"tp_pred", c.tp_pred},
                         {"tp_gold", c.tp_gold},
                         {"n_pred", c.n_pred},
                         {"n_gold", c.n_gold}};
  }
  return j;
}

}  // namespace gcner
