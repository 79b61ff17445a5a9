#include "vaer/al.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>

#include <json.hpp>

#include "vaer/error.hpp"

namespace vaer::al {

using nlohmann::json;

Workspace Workspace::build(const Table& left, const Table& right, const ir::Provider& provider,
                           const repr::VaeModel& vae) {
  Workspace w;
  w.left = &left;
  w.right = &right;
  w.left_irs = repr::table_irs(left, provider);
  w.right_irs = repr::table_irs(right, provider);
  w.left_reprs = repr::represent_table(vae, w.left_irs);
  w.right_reprs = repr::represent_table(vae, w.right_irs);
  return w;
}

namespace {

std::size_t position_of(const Table& table, const std::string& id) {
  const Record* r = table.find(id);
  if (r == nullptr) throw FormatError("unknown record id '" + id + "' in table " + table.name());
  return static_cast<std::size_t>(r - table.records().data());
}

}  // namespace

std::pair<std::size_t, std::size_t> Workspace::locate(const PairKey& key) const {
  return {position_of(*left, key.left), position_of(*right, key.right)};
}

CandidatePair Workspace::make_pair(std::size_t left_index, std::size_t right_index) const {
  CandidatePair c;
  c.left = left_index;
  c.right = right_index;
  c.key = {left->at(left_index).id, right->at(right_index).id};
  c.attribute_w2 = match::attribute_w2(left_reprs.at(left_index), right_reprs.at(right_index));
  c.total_w2 = c.attribute_w2.sum();
  return c;
}

const char* to_string(Category category) {
  switch (category) {
    case Category::certain_positive: return "certain_positive";
    case Category::certain_negative: return "certain_negative";
    case Category::uncertain_positive: return "uncertain_positive";
    case Category::uncertain_negative: return "uncertain_negative";
  }
  return "?";
}

std::optional<Category> parse_category(std::string_view text) {
  for (Category c : {Category::certain_positive, Category::certain_negative, Category::uncertain_positive,
                     Category::uncertain_negative}) {
    if (text == to_string(c)) return c;
  }
  return std::nullopt;
}

const char* to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::bootstrap: return "bootstrap";
    case Provenance::human: return "human";
    case Provenance::given: return "given";
  }
  return "?";
}

bool LabelPools::disjoint() const {
  std::set<PairKey> seen;
  for (const auto& p : positives)
    if (!seen.insert(p.pair.key).second) return false;
  for (const auto& p : negatives)
    if (!seen.insert(p.pair.key).second) return false;
  for (const auto& p : unlabeled)
    if (!seen.insert(p.key).second) return false;
  return true;
}

LabelPools bootstrap(const Workspace& workspace, const BootstrapConfig& config) {
  std::vector<CandidatePair> pool =
      neighbors::candidate_pairs(*workspace.left, workspace.left_reprs, *workspace.right, workspace.right_reprs,
                                 config.neighbors, config.lsh, workspace.left == workspace.right);
  if (pool.size() < 2 * config.per_class) {
    throw FormatError("bootstrap needs at least " + std::to_string(2 * config.per_class) + " candidate pairs, got " +
                      std::to_string(pool.size()) + "; increase the neighbour count K");
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pool[a].total_w2 < pool[b].total_w2; });

  LabelPools pools;
  std::vector<bool> taken(pool.size(), false);
  for (std::size_t i = 0; i < config.per_class; ++i) {
    taken[order[i]] = true;
    pools.positives.push_back({pool[order[i]], 1, Provenance::bootstrap});
  }
  for (std::size_t i = 0; i < config.per_class; ++i) {
    const std::size_t j = order[order.size() - 1 - i];
    taken[j] = true;
    pools.negatives.push_back({pool[j], 0, Provenance::bootstrap});
  }
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (!taken[i]) pools.unlabeled.push_back(std::move(pool[i]));
  return pools;
}

double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw FormatError("binary_entropy: probability outside [0, 1]");
  double h = 0.0;
  if (p > 0.0) h -= p * std::log(p);
  if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
  return h;
}

double latent_distance(const GaussianRepr& s, const GaussianRepr& t) {
  return std::sqrt((s.mu - t.mu).squaredNorm() + s.sigma.squaredNorm() + t.sigma.squaredNorm());
}

std::vector<double> sample_pair_distances(const GaussianRepr& s, const GaussianRepr& t, std::size_t samples,
                                          nn::Rng& rng) {
  if (s.mu.rows() != t.mu.rows() || s.mu.cols() != t.mu.cols()) {
    throw DimensionError("sample_pair_distances: representation shapes differ");
  }
  // z_s - z_t for independent draws has the law of delta_mu + sqrt(sigma_s^2 + sigma_t^2) * eps
  const nn::Matrix delta = s.mu - t.mu;
  const nn::Matrix spread = (s.sigma.array().square() + t.sigma.array().square()).sqrt().matrix();
  std::normal_distribution<double> normal;
  std::vector<double> out(samples);
  for (std::size_t n = 0; n < samples; ++n) {
    double sq = 0.0;
    for (Eigen::Index c = 0; c < delta.cols(); ++c)
      for (Eigen::Index r = 0; r < delta.rows(); ++r) {
        const double v = delta(r, c) + spread(r, c) * normal(rng);
        sq += v * v;
      }
    out[n] = std::sqrt(sq);
  }
  return out;
}

namespace {

std::uint64_t fnv1a(std::string_view text, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

/// Each positive pair draws from its own stream so D+ does not depend on
/// the order in which pairs entered L+.
nn::Rng pair_stream(std::uint64_t seed, const PairKey& key) {
  std::uint64_t h = fnv1a(key.left, seed * 0x9e3779b97f4a7c15ULL + 1);
  h = fnv1a(std::string_view("\x1f", 1), h);
  return nn::Rng(fnv1a(key.right, h));
}

}  // namespace

std::vector<double> positive_distance_distribution(std::span<const LabeledPair> positives, const Workspace& workspace,
                                                   std::size_t samples, nn::Rng& rng) {
  std::vector<double> out;
  out.reserve(positives.size() * samples);
  for (const LabeledPair& p : positives) {
    auto d = sample_pair_distances(workspace.left_reprs.at(p.pair.left), workspace.right_reprs.at(p.pair.right),
                                   samples, rng);
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

KdeDensity::KdeDensity(std::vector<double> samples) : samples_(std::move(samples)) {
  if (samples_.empty()) throw FormatError("KDE needs at least one sample");
  std::sort(samples_.begin(), samples_.end());
  const double n = static_cast<double>(samples_.size());
  double std_dev = 0.0;
  if (samples_.size() > 1) {
    const double mean = std::accumulate(samples_.begin(), samples_.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : samples_) ss += (x - mean) * (x - mean);
    std_dev = std::sqrt(ss / (n - 1.0));
  }
  bandwidth_ = std::max(kMinBandwidth, 1.06 * std_dev * std::pow(n, -0.2));
}

double KdeDensity::evaluate(double x) const {
  if (samples_.empty()) return 0.0;
  // terms beyond 8.5 bandwidths are below 1e-15 of the peak
  const double reach = 8.5 * bandwidth_;
  auto lo = std::lower_bound(samples_.begin(), samples_.end(), x - reach);
  auto hi = std::upper_bound(lo, samples_.end(), x + reach);
  double sum = 0.0;
  for (auto it = lo; it != hi; ++it) {
    const double u = (x - *it) / bandwidth_;
    sum += std::exp(-0.5 * u * u);
  }
  return sum / (static_cast<double>(samples_.size()) * bandwidth_ * std::sqrt(2.0 * std::numbers::pi));
}

KdeDensity fit_kde(std::vector<double> samples) { return KdeDensity(std::move(samples)); }

BatchPlan BatchPlan::split(std::size_t batch_size) {
  BatchPlan plan;
  plan.certain_positive = batch_size * 3 / 10;
  plan.certain_negative = batch_size * 3 / 10;
  plan.uncertain_positive = batch_size * 2 / 10;
  plan.uncertain_negative = batch_size * 2 / 10;
  std::size_t* slots[] = {&plan.certain_positive, &plan.certain_negative, &plan.uncertain_positive,
                          &plan.uncertain_negative};
  for (std::size_t i = 0; plan.total() < batch_size; ++i) ++*slots[i % 4];
  return plan;
}

std::vector<Proposal> select_samples(std::span<const CandidatePair> unlabeled, std::span<const double> probabilities,
                                     std::span<const double> distances, const KdeDensity& density,
                                     const BatchPlan& plan) {
  const std::size_t n = unlabeled.size();
  if (probabilities.size() != n || distances.size() != n) {
    throw DimensionError("select_samples: one probability and distance per unlabeled pair required");
  }
  std::vector<Proposal> scored(n);
  for (std::size_t i = 0; i < n; ++i) {
    Proposal& p = scored[i];
    p.index = i;
    p.probability = probabilities[i];
    p.entropy = binary_entropy(probabilities[i]);
    p.density = density(distances[i]);
  }

  constexpr std::array<Category, 4> kOrder = {Category::certain_positive, Category::certain_negative,
                                              Category::uncertain_positive, Category::uncertain_negative};
  auto score = [](Category c, const Proposal& p) {
    const double h = std::max(p.entropy, kScoreFloor);
    const double f = std::max(p.density, kScoreFloor);
    switch (c) {
      case Category::certain_positive: return h / f;
      case Category::certain_negative: return h * f;
      case Category::uncertain_positive: return f / h;
      case Category::uncertain_negative: return 1.0 / (h * f);
    }
    return 0.0;
  };
  auto positive_side = [](Category c) {
    return c == Category::certain_positive || c == Category::uncertain_positive;
  };
  auto certain = [](Category c) { return c == Category::certain_positive || c == Category::certain_negative; };

  std::array<std::vector<std::size_t>, 4> ranked;
  for (std::size_t k = 0; k < 4; ++k) {
    const Category c = kOrder[k];
    for (std::size_t i = 0; i < n; ++i) {
      const bool pos = scored[i].probability > 0.5;
      if (pos != positive_side(c)) continue;
      if (!certain(c) && scored[i].entropy < kScoreFloor) continue;
      ranked[k].push_back(i);
    }
    std::stable_sort(ranked[k].begin(), ranked[k].end(),
                     [&](std::size_t a, std::size_t b) { return score(c, scored[a]) < score(c, scored[b]); });
  }

  // entropy bounds per class (0 = positive side) that keep uncertain picks
  // at or above every certain pick of the same class
  std::array<double, 2> max_certain_h = {-1.0, -1.0};
  std::array<double, 2> min_uncertain_h = {INFINITY, INFINITY};
  std::vector<bool> chosen(n, false);
  std::array<std::size_t, 4> cursor = {0, 0, 0, 0};
  std::vector<Proposal> out;

  auto take_one = [&](std::size_t k) {
    const Category c = kOrder[k];
    const std::size_t side = positive_side(c) ? 0 : 1;
    while (cursor[k] < ranked[k].size()) {
      const std::size_t i = ranked[k][cursor[k]++];
      if (chosen[i]) continue;
      const double h = scored[i].entropy;
      if (certain(c) ? h > min_uncertain_h[side] : h < max_certain_h[side]) continue;
      chosen[i] = true;
      if (certain(c)) max_certain_h[side] = std::max(max_certain_h[side], h);
      else min_uncertain_h[side] = std::min(min_uncertain_h[side], h);
      Proposal p = scored[i];
      p.category = c;
      p.score = score(c, p);
      out.push_back(p);
      return true;
    }
    return false;
  };

  const std::array<std::size_t, 4> quota = {plan.certain_positive, plan.certain_negative, plan.uncertain_positive,
                                            plan.uncertain_negative};
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t q = 0; q < quota[k] && take_one(k); ++q) {
    }
  // hand unfilled slots to the categories that still have candidates
  bool progress = true;
  while (out.size() < plan.total() && progress) {
    progress = false;
    for (std::size_t k = 0; k < 4 && out.size() < plan.total(); ++k) progress |= take_one(k);
  }
  return out;
}

ActiveLearner::ActiveLearner(const Workspace& workspace, const repr::VaeModel& vae, LearnerConfig config)
    : workspace_(workspace), vae_(vae), config_(std::move(config)), rng_(config_.seed) {
  config_.matcher.holdout_fraction = 0.0;
}

void ActiveLearner::start() {
  pools_ = bootstrap(workspace_, config_.bootstrap);
  unlabeled_distance_.clear();
  for (const CandidatePair& c : pools_.unlabeled) {
    unlabeled_distance_.push_back(latent_distance(workspace_.left_reprs[c.left], workspace_.right_reprs[c.right]));
  }
  rebuild_unlabeled_index();
  positive_distances_.clear();
  sampled_positives_ = 0;
  iteration_ = 0;
  labels_used_ = 0;
  started_ = true;
  retrain();
}

void ActiveLearner::rebuild_unlabeled_index() {
  unlabeled_index_.clear();
  for (std::size_t i = 0; i < pools_.unlabeled.size(); ++i) unlabeled_index_.emplace(pools_.unlabeled[i].key, i);
}

std::optional<std::size_t> ActiveLearner::unlabeled_index(const PairKey& key) const {
  auto it = unlabeled_index_.find(key);
  if (it == unlabeled_index_.end()) return std::nullopt;
  return it->second;
}

void ActiveLearner::retrain() {
  if (!started_) throw TrainingError("active learner not started");
  std::vector<match::TrainingPair> training;
  training.reserve(pools_.labeled());
  auto add = [&](const LabeledPair& p) {
    training.push_back({{&workspace_.left_irs[p.pair.left], &workspace_.right_irs[p.pair.right]}, p.label});
  };
  for (const LabeledPair& p : pools_.positives) add(p);
  for (const LabeledPair& p : pools_.negatives) add(p);
  matcher_ = match::train_matcher(training, vae_, config_.matcher).model;

  // L+ only grows, so only newly added positives need sampling
  for (; sampled_positives_ < pools_.positives.size(); ++sampled_positives_) {
    const LabeledPair& p = pools_.positives[sampled_positives_];
    nn::Rng stream = pair_stream(config_.seed, p.pair.key);
    auto d = sample_pair_distances(workspace_.left_reprs[p.pair.left], workspace_.right_reprs[p.pair.right],
                                   config_.kde_samples, stream);
    positive_distances_.insert(positive_distances_.end(), d.begin(), d.end());
  }
  density_ = fit_kde(positive_distances_);
  pending_.clear();
}

std::vector<double> ActiveLearner::score_unlabeled() const {
  // encode each involved record once with the matcher's encoder
  std::map<std::size_t, repr::GaussianRepr> lefts, rights;
  for (const CandidatePair& c : pools_.unlabeled) {
    if (!lefts.contains(c.left))
      lefts.emplace(c.left, repr::represent_record(matcher_.encoder, matcher_.arity, workspace_.left_irs[c.left]));
    if (!rights.contains(c.right))
      rights.emplace(c.right,
                     repr::represent_record(matcher_.encoder, matcher_.arity, workspace_.right_irs[c.right]));
  }
  std::vector<const repr::GaussianRepr*> ls, rs;
  ls.reserve(pools_.unlabeled.size());
  rs.reserve(pools_.unlabeled.size());
  for (const CandidatePair& c : pools_.unlabeled) {
    ls.push_back(&lefts.at(c.left));
    rs.push_back(&rights.at(c.right));
  }
  return match::classify(matcher_, ls, rs);
}

const std::vector<Proposal>& ActiveLearner::propose() {
  if (!started_) throw TrainingError("active learner not started");
  if (pending_.empty() && !pools_.unlabeled.empty()) {
    const std::vector<double> probabilities = score_unlabeled();
    pending_ = select_samples(pools_.unlabeled, probabilities, unlabeled_distance_, density_,
                              BatchPlan::split(config_.batch_size));
  }
  return pending_;
}

void ActiveLearner::move_to_labeled(std::size_t pool_index, int label, Provenance provenance) {
  CandidatePair pair = std::move(pools_.unlabeled.at(pool_index));
  pools_.unlabeled.erase(pools_.unlabeled.begin() + static_cast<std::ptrdiff_t>(pool_index));
  unlabeled_distance_.erase(unlabeled_distance_.begin() + static_cast<std::ptrdiff_t>(pool_index));
  (label == 1 ? pools_.positives : pools_.negatives).push_back({std::move(pair), label, provenance});
}

void ActiveLearner::apply_labels(std::span<const int> labels) {
  if (labels.size() != pending_.size()) {
    throw FormatError("expected " + std::to_string(pending_.size()) + " labels, got " + std::to_string(labels.size()));
  }
  for (int l : labels)
    if (l != 0 && l != 1) throw FormatError("labels must be 0 or 1");
  std::vector<std::size_t> order(pending_.size());
  std::iota(order.begin(), order.end(), 0);
  // erase from the back so earlier pool positions stay valid
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pending_[a].index > pending_[b].index; });
  // keep L+/L- insertion in batch order for reproducible replays
  std::vector<LabeledPair> staged(pending_.size());
  for (std::size_t j = 0; j < order.size(); ++j) {
    const std::size_t i = order[j];
    const std::size_t idx = pending_[i].index;
    staged[i] = {std::move(pools_.unlabeled[idx]), labels[i], Provenance::human};
    pools_.unlabeled.erase(pools_.unlabeled.begin() + static_cast<std::ptrdiff_t>(idx));
    unlabeled_distance_.erase(unlabeled_distance_.begin() + static_cast<std::ptrdiff_t>(idx));
  }
  for (LabeledPair& p : staged) (p.label == 1 ? pools_.positives : pools_.negatives).push_back(std::move(p));
  rebuild_unlabeled_index();
  labels_used_ += labels.size();
  ++iteration_;
  pending_.clear();
}

void ActiveLearner::replay(std::span<const std::pair<PairKey, int>> labels) {
  if (!started_) throw TrainingError("active learner not started");
  for (const auto& [key, label] : labels) {
    if (label != 0 && label != 1) throw FormatError("labels must be 0 or 1");
    auto idx = unlabeled_index(key);
    if (!idx) throw FormatError("replayed pair (" + key.left + ", " + key.right + ") is not in the unlabeled pool");
    move_to_labeled(*idx, label, Provenance::human);
    rebuild_unlabeled_index();
  }
  labels_used_ += labels.size();
  ++iteration_;
  pending_.clear();
}

std::vector<match::Prediction> ActiveLearner::predict(std::span<const PairKey> pairs) const {
  std::vector<match::PairIrs> irs;
  irs.reserve(pairs.size());
  for (const PairKey& key : pairs) {
    const auto [l, r] = workspace_.locate(key);
    irs.push_back({&workspace_.left_irs[l], &workspace_.right_irs[r]});
  }
  return match::predict(matcher_, irs);
}

metrics::Scores ActiveLearner::evaluate(const PairSet& truth) const {
  std::vector<PairKey> keys;
  for (const LabeledKey& p : truth.pairs()) keys.push_back(p.pair);
  const auto predictions = predict(keys);
  std::map<PairKey, int> by_key;
  for (std::size_t i = 0; i < keys.size(); ++i) by_key[keys[i]] = predictions[i].label;
  return metrics::prf1(by_key, truth);
}

LoopResult al_loop(const Workspace& workspace, const repr::VaeModel& vae, std::size_t iterations,
                   const LearnerConfig& config, const Labeler& labeler, const PairSet* test) {
  ActiveLearner learner(workspace, vae, config);
  learner.start();
  LoopResult result;
  auto record = [&] {
    IterationMetrics m;
    m.iteration = learner.iteration();
    m.labels_used = learner.labels_used();
    m.positives = learner.pools().positives.size();
    m.negatives = learner.pools().negatives.size();
    if (test != nullptr) m.test = learner.evaluate(*test);
    result.history.push_back(m);
  };
  record();
  for (std::size_t it = 0; it < iterations; ++it) {
    const std::vector<Proposal> batch = learner.propose();
    if (batch.empty()) break;
    std::vector<int> labels;
    for (const Proposal& p : batch) {
      auto label = labeler(learner.pools().unlabeled[p.index], p.category);
      if (!label) break;
      labels.push_back(*label);
    }
    if (labels.size() < batch.size()) {
      result.partial = true;
      break;
    }
    learner.apply_labels(labels);
    learner.retrain();
    record();
  }
  result.matcher = learner.matcher();
  result.pools = learner.pools();
  result.labels_used = learner.labels_used();
  return result;
}

void Journal::append(std::span<const JournalEntry> entries) const {
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to journal " + path_);
  for (const JournalEntry& e : entries) {
    json line = {{"iteration", e.iteration},       {"left_id", e.pair.left}, {"right_id", e.pair.right},
                 {"category", to_string(e.category)}, {"label", e.label},        {"timestamp", e.timestamp}};
    out << line.dump() << '\n';
  }
  out.flush();
  if (!out) throw IoError("failed writing journal " + path_);
}

std::vector<JournalEntry> Journal::read() const {
  std::vector<JournalEntry> entries;
  std::ifstream in(path_, std::ios::binary);
  if (!in) return entries;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      JournalEntry e;
      e.iteration = j.at("iteration").get<std::size_t>();
      e.pair = {j.at("left_id").get<std::string>(), j.at("right_id").get<std::string>()};
      auto c = parse_category(j.at("category").get<std::string>());
      if (!c) throw FormatError("unknown category");
      e.category = *c;
      e.label = j.at("label").get<int>();
      e.timestamp = j.value("timestamp", "");
      entries.push_back(std::move(e));
    } catch (const std::exception& err) {
      throw FormatError("journal " + path_ + " line " + std::to_string(number) + ": " + err.what());
    }
  }
  return entries;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace vaer::al
