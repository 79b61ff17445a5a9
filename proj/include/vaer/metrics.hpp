#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vaer/corpus.hpp"

namespace vaer::metrics {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
};

/// Undefined ratios (zero denominators) are reported as 0 with the flag cleared.
struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = false;
  bool recall_defined = false;
  bool f1_defined = false;
  ConfusionCounts counts;
};

Scores scores(const ConfusionCounts& counts);
ConfusionCounts confusion(std::span<const int> predicted, std::span<const int> truth);

/// Scores predictions against every pair of `truth`. Throws FormatError
/// listing the pairs without a prediction.
Scores prf1(const std::map<PairKey, int>& predictions, const PairSet& truth);

/// Ranked neighbour ids per query id.
using NeighborLists = std::unordered_map<std::string, std::vector<std::string>>;

/// Fraction of duplicate pairs where the right record is in the left's top-k
/// or the left record is in the right's top-k.
double recall_at_k(const NeighborLists& left_to_right, const NeighborLists& right_to_left,
                   std::span<const PairKey> duplicates, std::size_t k);

struct ReportRow {
  std::string name;
  Scores scores;
};

/// name,tp,fp,fn,tn,precision,recall,f1
void write_report_csv(std::ostream& out, std::span<const ReportRow> rows);
void print_report(std::ostream& out, std::span<const ReportRow> rows);

}  // namespace vaer::metrics
