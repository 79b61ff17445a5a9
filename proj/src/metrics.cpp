#include "vaer/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "vaer/error.hpp"

namespace vaer::metrics {

Scores scores(const ConfusionCounts& c) {
  Scores s;
  s.counts = c;
  if (c.tp + c.fp > 0) {
    s.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    s.precision_defined = true;
  }
  if (c.tp + c.fn > 0) {
    s.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    s.recall_defined = true;
  }
  if (s.precision + s.recall > 0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    s.f1_defined = s.precision_defined && s.recall_defined;
  }
  return s;
}

ConfusionCounts confusion(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw FormatError("confusion: prediction/truth length mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] != 0, t = truth[i] != 0;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Scores prf1(const std::map<PairKey, int>& predictions, const PairSet& truth) {
  std::vector<int> predicted, expected;
  std::vector<std::string> missing;
  for (const LabeledKey& p : truth.pairs()) {
    auto it = predictions.find(p.pair);
    if (it == predictions.end()) {
      missing.push_back("(" + p.pair.left + ", " + p.pair.right + ")");
      continue;
    }
    predicted.push_back(it->second);
    expected.push_back(p.label);
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " truth pair(s) have no prediction:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    throw FormatError(msg);
  }
  return scores(confusion(predicted, expected));
}

namespace {

bool in_top_k(const NeighborLists& lists, const std::string& query, const std::string& target, std::size_t k) {
  auto it = lists.find(query);
  if (it == lists.end()) return false;
  const auto& ranked = it->second;
  const auto end = ranked.begin() + static_cast<std::ptrdiff_t>(std::min(k, ranked.size()));
  return std::find(ranked.begin(), end, target) != end;
}

}  // namespace

double recall_at_k(const NeighborLists& left_to_right, const NeighborLists& right_to_left,
                   std::span<const PairKey> duplicates, std::size_t k) {
  if (duplicates.empty() || k == 0) return 0.0;
  std::size_t hits = 0;
  for (const PairKey& d : duplicates) {
    if (in_top_k(left_to_right, d.left, d.right, k) || in_top_k(right_to_left, d.right, d.left, k)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(duplicates.size());
}

void write_report_csv(std::ostream& out, std::span<const ReportRow> rows) {
  out << "name,tp,fp,fn,tn,precision,recall,f1\n";
  char buf[128];
  for (const ReportRow& r : rows) {
    const auto& c = r.scores.counts;
    std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%zu,%.6f,%.6f,%.6f", c.tp, c.fp, c.fn, c.tn, r.scores.precision,
                  r.scores.recall, r.scores.f1);
    out << r.name << ',' << buf << '\n';
  }
}

void print_report(std::ostream& out, std::span<const ReportRow> rows) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s %6s %6s %6s %6s %9s %9s %9s\n", "", "tp", "fp", "fn", "tn", "precision",
                "recall", "f1");
  out << buf;
  for (const ReportRow& r : rows) {
    const auto& c = r.scores.counts;
    auto cell = [](double v, bool defined) {
      char b[16];
      std::snprintf(b, sizeof b, defined ? "%.4f" : "%.4f*", v);
      return std::string(b);
    };
    std::snprintf(buf, sizeof buf, "%-16s %6zu %6zu %6zu %6zu %9s %9s %9s\n", r.name.c_str(), c.tp, c.fp, c.fn, c.tn,
                  cell(r.scores.precision, r.scores.precision_defined).c_str(),
                  cell(r.scores.recall, r.scores.recall_defined).c_str(),
                  cell(r.scores.f1, r.scores.f1_defined).c_str());
    out << buf;
  }
  bool any_undefined = false;
  for (const ReportRow& r : rows) {
    any_undefined |= !r.scores.precision_defined || !r.scores.recall_defined || !r.scores.f1_defined;
  }
  if (any_undefined) out << "* undefined (zero denominator), reported as computed value\n";
}

}  // namespace vaer::metrics
