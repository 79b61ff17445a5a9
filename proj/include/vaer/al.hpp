#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vaer/corpus.hpp"
#include "vaer/match.hpp"
#include "vaer/metrics.hpp"
#include "vaer/neighbors.hpp"
#include "vaer/repr.hpp"

namespace vaer::al {

using neighbors::CandidatePair;
using repr::GaussianRepr;

/// Both tables with their IRs and representation-model encodings, aligned
/// with table order. Immutable once built.
struct Workspace {
  const Table* left = nullptr;
  const Table* right = nullptr;
  std::vector<repr::Matrix> left_irs;
  std::vector<repr::Matrix> right_irs;
  std::vector<GaussianRepr> left_reprs;
  std::vector<GaussianRepr> right_reprs;

  static Workspace build(const Table& left, const Table& right, const ir::Provider& provider,
                         const repr::VaeModel& vae);

  /// Resolves ids to table positions; throws FormatError on unknown ids.
  std::pair<std::size_t, std::size_t> locate(const PairKey& key) const;
  CandidatePair make_pair(std::size_t left_index, std::size_t right_index) const;
};

enum class Provenance { bootstrap, human, given };
enum class Category { certain_positive, certain_negative, uncertain_positive, uncertain_negative };

const char* to_string(Category category);
std::optional<Category> parse_category(std::string_view text);
const char* to_string(Provenance provenance);

struct LabeledPair {
  CandidatePair pair;
  int label = 0;
  Provenance provenance = Provenance::human;
};

/// L+ / L- / U. Pools are pairwise disjoint.
struct LabelPools {
  std::vector<LabeledPair> positives;
  std::vector<LabeledPair> negatives;
  std::vector<CandidatePair> unlabeled;

  bool disjoint() const;
  std::size_t labeled() const { return positives.size() + negatives.size(); }
};

struct BootstrapConfig {
  std::size_t neighbors = 10;   // K
  std::size_t per_class = 15;   // bootstrap positives and negatives each
  neighbors::LshConfig lsh;
};

/// Candidate pool from LSH blocking; the per_class smallest-W2^2 pairs seed
/// L+, the per_class largest seed L-. Throws FormatError when the pool has
/// fewer than 2 * per_class pairs.
LabelPools bootstrap(const Workspace& workspace, const BootstrapConfig& config);

/// -p ln p - (1-p) ln(1-p), with 0 ln 0 = 0. Throws FormatError outside [0, 1].
double binary_entropy(double p);

/// Root of the expected squared distance between samples of the two
/// encodings: sqrt(|mu_s - mu_t|^2 + sum sigma_s^2 + sum sigma_t^2).
double latent_distance(const GaussianRepr& s, const GaussianRepr& t);

/// Euclidean distances between reparameterized samples of s and t over all
/// attributes, `samples` draws.
std::vector<double> sample_pair_distances(const GaussianRepr& s, const GaussianRepr& t, std::size_t samples,
                                          nn::Rng& rng);

/// D+ for every pair of L+; |D+| = |L+| * samples.
std::vector<double> positive_distance_distribution(std::span<const LabeledPair> positives, const Workspace& workspace,
                                                   std::size_t samples, nn::Rng& rng);

/// Gaussian-kernel density with Silverman's bandwidth 1.06 * std * n^(-1/5).
class KdeDensity {
 public:
  static constexpr double kMinBandwidth = 1e-3;

  KdeDensity() = default;
  /// Throws FormatError on an empty sample.
  explicit KdeDensity(std::vector<double> samples);

  double operator()(double x) const { return evaluate(x); }
  double evaluate(double x) const;

  double bandwidth() const { return bandwidth_; }
  std::size_t size() const { return samples_.size(); }
  const std::vector<double>& samples() const { return samples_; }  // sorted

 private:
  std::vector<double> samples_;
  double bandwidth_ = kMinBandwidth;
};

KdeDensity fit_kde(std::vector<double> samples);

/// Slots per category for one batch; unfilled slots move to categories that
/// still have candidates.
struct BatchPlan {
  std::size_t certain_positive = 3;
  std::size_t certain_negative = 3;
  std::size_t uncertain_positive = 2;
  std::size_t uncertain_negative = 2;

  std::size_t total() const { return certain_positive + certain_negative + uncertain_positive + uncertain_negative; }
  static BatchPlan split(std::size_t batch_size);
};

struct Proposal {
  std::size_t index = 0;  // position in the unlabeled pool
  Category category = Category::certain_positive;
  double probability = 0.0;
  double entropy = 0.0;
  double density = 0.0;
  double score = 0.0;
};

/// Floor applied to entropy and density before taking reciprocals.
inline constexpr double kScoreFloor = 1e-12;

/// Splits the pool by p > 0.5 and ranks each side with the four scores
/// (ascending):
///   certain positive    H / f       uncertain positive  f / H
///   certain negative    H * f       uncertain negative  1 / (H f)
/// A pair is proposed at most once (priority in the order above). Pairs with
/// H below kScoreFloor never count as uncertain, and an uncertain proposal
/// never has lower entropy than a certain proposal of the same class.
std::vector<Proposal> select_samples(std::span<const CandidatePair> unlabeled, std::span<const double> probabilities,
                                     std::span<const double> distances, const KdeDensity& density,
                                     const BatchPlan& plan);

struct LearnerConfig {
  BootstrapConfig bootstrap;
  std::size_t batch_size = 10;
  std::size_t kde_samples = 1000;
  match::MatcherConfig matcher;
  std::uint64_t seed = 23;
};

struct IterationMetrics {
  std::size_t iteration = 0;
  std::size_t labels_used = 0;  // oracle labels so far
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::optional<metrics::Scores> test;
};

/// Stateful engine behind the loop and the labeling service. Not
/// thread-safe; callers serialize access.
class ActiveLearner {
 public:
  ActiveLearner(const Workspace& workspace, const repr::VaeModel& vae, LearnerConfig config);

  /// Runs the bootstrap, trains the first matcher and fits the first density.
  void start();
  /// Proposals for the next batch (cached until labels arrive).
  const std::vector<Proposal>& propose();
  const std::vector<Proposal>& pending() const { return pending_; }
  /// Applies human labels to the pending batch (index-aligned with pending()).
  /// Moves pairs by their human label, removes them from U. Does not retrain.
  void apply_labels(std::span<const int> labels);
  /// Retrains the matcher from the representation encoder and refits the density.
  void retrain();

  /// Replays recorded labels (pairs by id) without intermediate retraining.
  void replay(std::span<const std::pair<PairKey, int>> labels);

  /// Scores the current matcher on given pairs.
  metrics::Scores evaluate(const PairSet& truth) const;
  std::vector<match::Prediction> predict(std::span<const PairKey> pairs) const;

  const LabelPools& pools() const { return pools_; }
  const match::MatcherModel& matcher() const { return matcher_; }
  const KdeDensity& density() const { return density_; }
  const Workspace& workspace() const { return workspace_; }
  std::size_t iteration() const { return iteration_; }
  std::size_t labels_used() const { return labels_used_; }
  /// Pool position of `key`, or nullopt when it is not unlabeled.
  std::optional<std::size_t> unlabeled_index(const PairKey& key) const;

 private:
  void move_to_labeled(std::size_t pool_index, int label, Provenance provenance);
  void rebuild_unlabeled_index();
  std::vector<double> score_unlabeled() const;

  const Workspace& workspace_;
  const repr::VaeModel& vae_;
  LearnerConfig config_;
  LabelPools pools_;
  match::MatcherModel matcher_;
  KdeDensity density_;
  std::vector<double> positive_distances_;
  std::size_t sampled_positives_ = 0;
  nn::Rng rng_;
  std::vector<Proposal> pending_;
  std::vector<double> unlabeled_distance_;
  std::map<PairKey, std::size_t> unlabeled_index_;
  std::size_t iteration_ = 0;
  std::size_t labels_used_ = 0;
  bool started_ = false;
};

/// Returns the human label for a proposed pair, or nullopt to abort.
using Labeler = std::function<std::optional<int>(const CandidatePair& pair, Category category)>;

struct LoopResult {
  match::MatcherModel matcher;
  std::vector<IterationMetrics> history;  // entry 0 is the bootstrap model
  LabelPools pools;
  bool partial = false;  // labeler aborted
  std::size_t labels_used = 0;
};

/// Bootstrap, then `iterations` rounds of select / label / retrain.
LoopResult al_loop(const Workspace& workspace, const repr::VaeModel& vae, std::size_t iterations,
                   const LearnerConfig& config, const Labeler& labeler, const PairSet* test = nullptr);

/// One journal line per labeled pair.
struct JournalEntry {
  std::size_t iteration = 0;
  PairKey pair;
  Category category = Category::certain_positive;
  int label = 0;
  std::string timestamp;
};

/// Appends JSON lines and flushes after every batch.
class Journal {
 public:
  explicit Journal(std::string path) : path_(std::move(path)) {}
  void append(std::span<const JournalEntry> entries) const;
  std::vector<JournalEntry> read() const;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

std::string utc_timestamp();

}  // namespace vaer::al
