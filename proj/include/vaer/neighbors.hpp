#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "vaer/corpus.hpp"
#include "vaer/repr.hpp"

namespace vaer::neighbors {

using repr::GaussianRepr;

struct LshConfig {
  std::size_t tables = 16;
  std::size_t projections = 8;
  /// Bucket width = median pairwise mean distance over a sample / width_divisor.
  double width_divisor = 4.0;
  std::size_t width_sample = 200;
  /// Below this many indexed records every lookup is an exact scan.
  std::size_t exhaustive_below = 500;
  std::uint64_t seed = 0x15b;
};

struct Neighbor {
  std::size_t index = 0;  // position in the indexed collection
  double w2 = 0.0;        // total squared 2-Wasserstein distance to the query
};

/// p-stable (Gaussian projection) LSH over the concatenated per-attribute
/// means, with candidates re-ranked by the full W2^2 distance.
class LshIndex {
 public:
  LshIndex() = default;

  /// `reprs` must outlive the index.
  static LshIndex build(std::span<const GaussianRepr> reprs, const LshConfig& config = {});

  /// Top-k by W2^2 (ties broken by index). Probes every table; scans the
  /// whole collection when the buckets hold fewer than k candidates or the
  /// index is small.
  std::vector<Neighbor> lookup(const GaussianRepr& query, std::size_t k) const;

  /// Bucket key of `repr` in table `t`.
  std::uint64_t bucket_key(std::size_t t, const GaussianRepr& repr) const;
  /// Number of ids stored in table `t` (equals size()).
  std::size_t table_population(std::size_t t) const;

  std::size_t size() const { return reprs_.size(); }
  double bucket_width() const { return width_; }
  std::size_t tables() const { return tables_.size(); }
  bool exhaustive() const { return reprs_.size() < config_.exhaustive_below; }

 private:
  struct HashTable {
    Eigen::MatrixXd projections;  // projections x dim
    Eigen::VectorXd offsets;      // uniform in [0, width)
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets;
  };

  std::uint64_t key_of(const HashTable& table, const Eigen::VectorXd& point) const;
  std::vector<Neighbor> rank(const GaussianRepr& query, std::vector<std::uint32_t> candidates, std::size_t k) const;

  LshConfig config_;
  std::span<const GaussianRepr> reprs_;
  double width_ = 1.0;
  std::vector<HashTable> tables_;
};

/// Concatenated per-attribute means (row-major over attributes).
Eigen::VectorXd flatten_means(const GaussianRepr& repr);

/// A blocking candidate with cached distance features. Indices refer to
/// the left/right tables the pool was built from.
struct CandidatePair {
  PairKey key;
  std::size_t left = 0;
  std::size_t right = 0;
  Eigen::VectorXd attribute_w2;
  double total_w2 = 0.0;
};

/// For every left record, its k nearest right records; each (left, right)
/// pair appears once. When `same_table` is set, self pairs are skipped and
/// (a, b) / (b, a) collapse to one pair.
std::vector<CandidatePair> candidate_pairs(const Table& left, std::span<const GaussianRepr> left_reprs,
                                           const Table& right, std::span<const GaussianRepr> right_reprs,
                                           std::size_t k, const LshConfig& config = {}, bool same_table = false);

/// Pool export: CSV left_id,right_id,w2_total.
void save_candidates(std::span<const CandidatePair> pool, const std::string& path);

}  // namespace vaer::neighbors
