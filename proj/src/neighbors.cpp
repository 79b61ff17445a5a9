#include "vaer/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "vaer/csv.hpp"
#include "vaer/error.hpp"
#include "vaer/match.hpp"

namespace vaer::neighbors {

Eigen::VectorXd flatten_means(const GaussianRepr& repr) {
  Eigen::VectorXd out(repr.mu.size());
  Eigen::Index pos = 0;
  for (Eigen::Index i = 0; i < repr.mu.rows(); ++i) {
    out.segment(pos, repr.mu.cols()) = repr.mu.row(i).transpose();
    pos += repr.mu.cols();
  }
  return out;
}

LshIndex LshIndex::build(std::span<const GaussianRepr> reprs, const LshConfig& config) {
  if (reprs.empty()) throw FormatError("cannot index an empty collection");
  if (config.tables == 0 || config.projections == 0) throw FormatError("LSH needs at least one table and projection");
  LshIndex index;
  index.config_ = config;
  index.reprs_ = reprs;
  const Eigen::Index dim = reprs.front().mu.size();
  for (const GaussianRepr& r : reprs) {
    if (r.mu.size() != dim) throw DimensionError("all indexed representations must share one shape");
  }

  std::mt19937_64 rng(config.seed);
  std::vector<Eigen::VectorXd> points;
  points.reserve(reprs.size());
  for (const GaussianRepr& r : reprs) points.push_back(flatten_means(r));

  // bucket width from the median pairwise distance of a sample
  std::vector<std::size_t> sample(points.size());
  for (std::size_t i = 0; i < sample.size(); ++i) sample[i] = i;
  std::shuffle(sample.begin(), sample.end(), rng);
  sample.resize(std::min(sample.size(), config.width_sample));
  std::vector<double> distances;
  for (std::size_t a = 0; a < sample.size(); ++a)
    for (std::size_t b = a + 1; b < sample.size(); ++b) distances.push_back((points[sample[a]] - points[sample[b]]).norm());
  double median = 0.0;
  if (!distances.empty()) {
    auto mid = distances.begin() + static_cast<std::ptrdiff_t>(distances.size() / 2);
    std::nth_element(distances.begin(), mid, distances.end());
    median = *mid;
  }
  index.width_ = median > 0 ? median / config.width_divisor : 1.0;

  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.0, index.width_);
  index.tables_.resize(config.tables);
  for (HashTable& table : index.tables_) {
    table.projections.resize(static_cast<Eigen::Index>(config.projections), dim);
    for (Eigen::Index r = 0; r < table.projections.rows(); ++r)
      for (Eigen::Index c = 0; c < dim; ++c) table.projections(r, c) = normal(rng);
    table.offsets.resize(static_cast<Eigen::Index>(config.projections));
    for (Eigen::Index r = 0; r < table.offsets.size(); ++r) table.offsets[r] = uniform(rng);
    for (std::size_t i = 0; i < points.size(); ++i) {
      table.buckets[index.key_of(table, points[i])].push_back(static_cast<std::uint32_t>(i));
    }
  }
  return index;
}

std::uint64_t LshIndex::key_of(const HashTable& table, const Eigen::VectorXd& point) const {
  const Eigen::VectorXd proj = (table.projections * point + table.offsets) / width_;
  std::uint64_t h = 1469598103934665603ULL;
  for (Eigen::Index i = 0; i < proj.size(); ++i) {
    const auto slot = static_cast<std::int64_t>(std::floor(proj[i]));
    h ^= static_cast<std::uint64_t>(slot) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

std::uint64_t LshIndex::bucket_key(std::size_t t, const GaussianRepr& repr) const {
  return key_of(tables_.at(t), flatten_means(repr));
}

std::size_t LshIndex::table_population(std::size_t t) const {
  std::size_t n = 0;
  for (const auto& [key, ids] : tables_.at(t).buckets) n += ids.size();
  return n;
}

std::vector<Neighbor> LshIndex::rank(const GaussianRepr& query, std::vector<std::uint32_t> candidates,
                                     std::size_t k) const {
  std::vector<Neighbor> ranked;
  ranked.reserve(candidates.size());
  for (std::uint32_t i : candidates) ranked.push_back({i, match::total_w2(query, reprs_[i])});
  const std::size_t keep = std::min(k, ranked.size());
  auto by_distance = [](const Neighbor& a, const Neighbor& b) { return a.w2 < b.w2 || (a.w2 == b.w2 && a.index < b.index); };
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(), by_distance);
  ranked.resize(keep);
  return ranked;
}

std::vector<Neighbor> LshIndex::lookup(const GaussianRepr& query, std::size_t k) const {
  if (k == 0 || reprs_.empty()) return {};
  std::vector<std::uint32_t> candidates;
  if (!exhaustive()) {
    const Eigen::VectorXd point = flatten_means(query);
    for (const HashTable& table : tables_) {
      auto it = table.buckets.find(key_of(table, point));
      if (it != table.buckets.end()) candidates.insert(candidates.end(), it->second.begin(), it->second.end());
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  }
  if (candidates.size() < k) {
    candidates.resize(reprs_.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = static_cast<std::uint32_t>(i);
  }
  return rank(query, std::move(candidates), k);
}

std::vector<CandidatePair> candidate_pairs(const Table& left, std::span<const GaussianRepr> left_reprs,
                                           const Table& right, std::span<const GaussianRepr> right_reprs,
                                           std::size_t k, const LshConfig& config, bool same_table) {
  if (left_reprs.size() != left.size() || right_reprs.size() != right.size()) {
    throw DimensionError("candidate_pairs: one representation per record required");
  }
  std::vector<CandidatePair> pool;
  if (right.size() == 0 || left.size() == 0 || k == 0) return pool;
  const LshIndex index = LshIndex::build(right_reprs, config);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  // asking for one extra neighbour keeps k real candidates when the record itself is returned
  const std::size_t probe = same_table ? k + 1 : k;
  for (std::size_t i = 0; i < left.size(); ++i) {
    std::size_t taken = 0;
    for (const Neighbor& n : index.lookup(left_reprs[i], probe)) {
      if (taken == k) break;
      std::size_t a = i, b = n.index;
      if (same_table) {
        if (a == b) continue;
        if (a > b) std::swap(a, b);
      }
      ++taken;
      if (!seen.emplace(a, b).second) continue;
      CandidatePair c;
      c.left = a;
      c.right = b;
      c.key = {left.at(a).id, right.at(b).id};
      c.attribute_w2 = match::attribute_w2(left_reprs[a], right_reprs[b]);
      c.total_w2 = c.attribute_w2.sum();
      pool.push_back(std::move(c));
    }
  }
  return pool;
}

void save_candidates(std::span<const CandidatePair> pool, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  csv::write_row(out, {"left_id", "right_id", "w2_total"});
  char buf[32];
  for (const CandidatePair& c : pool) {
    std::snprintf(buf, sizeof buf, "%.17g", c.total_w2);
    csv::write_row(out, {c.key.left, c.key.right, buf});
  }
}

}  // namespace vaer::neighbors
