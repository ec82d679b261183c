#ifndef GCNER_METRICS_H_
#define GCNER_METRICS_H_

// Span-level precision / recall / F1, micro-averaged over entity types.
//
// Relaxed matching: a predicted span is correct if it shares at least one
// token with a gold span of the same type in the same sentence; a gold span
// is found if at least one same-type predicted span overlaps it. Each span
// is counted once however many partners it overlaps, so the precision and
// recall numerators can differ.

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcner/corpus.h"

namespace gcner {

struct Prf {
  double p = 0.0;
  double r = 0.0;
  double f1 = 0.0;
};

struct TypeCounts {
  long tp_pred = 0;  // predicted spans that matched
  long tp_gold = 0;  // gold spans that were matched
  long n_pred = 0;
  long n_gold = 0;
};

// All values in percent.
struct EvalReport {
  Prf overall;
  std::map<EntityType, Prf> per_type;
  std::map<EntityType, TypeCounts> counts;
};

using SpanLists = std::vector<std::vector<EntitySpan>>;

EvalReport relaxed_prf(const SpanLists& gold, const SpanLists& pred);
EvalReport strict_prf(const SpanLists& gold, const SpanLists& pred);

// Precision/recall/F1 in percent from raw counts; 0 for empty denominators.
Prf prf_from_counts(const TypeCounts& c);

// Fixed-width table, rows LOC MISC ORG PER then overall, two decimals.
// NaN values render as "-".
std::string format_report(const EvalReport& r);

// {"overall": {p, r, f1}, "per_type": {TYPE: {p, r, f1}},
//  "counts": {TYPE: {tp_pred, tp_gold, n_pred, n_gold}}}
nlohmann::ordered_json report_record(const EvalReport& r);

}  // namespace gcner

#endif  // GCNER_METRICS_H_
