// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "support/fd.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "vaer/al.hpp"
#include "vaer/match.hpp"
#include "vaer/metrics.hpp"
#include "vaer/neighbors.hpp"
#include "vaer/repr.hpp"
#include "vaer/synth.hpp"

using namespace vaer;
using namespace vaer::testing;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

// ---------------------------------------------------------------- gradients

Outcome gradients() {
  const auto start = Clock::now();
  nn::Rng rng(101);
  std::uniform_int_distribution<int> small(2, 5);
  double worst_vae = 0.0, worst_match = 0.0, worst_abs = 0.0;
  const int instances = 20;
  for (int i = 0; i < instances; ++i) {
    const repr::VaeDims dims{small(rng) + 2, small(rng) + 1, small(rng)};
    auto vae = repr::VaeModel::init(dims, 2, rng);
    const nn::Matrix irs = random_matrix(small(rng), dims.input, rng);
    const nn::Matrix noise = random_matrix(irs.rows(), dims.latent, rng);
    auto grads = vae.zeros_like();
    repr::vae_loss(vae, irs, noise, &grads);
    const auto check = check_gradients(vae.params(), grads.params(), [&] { return repr::vae_loss(vae, irs, noise).total; });
    worst_vae = std::max(worst_vae, check.relative);
    worst_abs = std::max(worst_abs, check.worst_absolute);
  }
  for (int i = 0; i < instances; ++i) {
    const repr::VaeDims dims{small(rng) + 2, small(rng) + 1, small(rng)};
    const std::uint64_t arity = static_cast<std::uint64_t>(small(rng) - 1);
    auto vae = repr::VaeModel::init(dims, arity, rng);
    match::MatcherConfig config;
    config.hidden = small(rng);
    config.margin = 0.5 + std::uniform_real_distribution<double>(0.0, 2.0)(rng);
    auto model = match::MatcherModel::init(vae.encoder, arity, config, rng);
    std::vector<nn::Matrix> irs;
    const int n_pairs = small(rng);
    for (int j = 0; j < 2 * n_pairs; ++j) irs.push_back(random_matrix(static_cast<Eigen::Index>(arity), dims.input, rng));
    std::vector<match::PairIrs> pairs;
    std::vector<int> labels;
    for (int j = 0; j < n_pairs; ++j) {
      pairs.push_back({&irs[2 * j], &irs[2 * j + 1]});
      labels.push_back(j % 2);
    }
    auto grads = model.zeros_like();
    match::matcher_loss(model, pairs, labels, &grads);
    const auto check =
        check_gradients(model.params(), grads.params(), [&] { return match::matcher_loss(model, pairs, labels); });
    worst_match = std::max(worst_match, check.relative);
    worst_abs = std::max(worst_abs, check.worst_absolute);
  }
  const double elapsed = seconds_since(start);
  return {worst_vae < 1e-4 && worst_match < 1e-4 && elapsed < 10.0,
          format("%d instances each; worst relative error VAE %.2e, contrastive %.2e (< 1e-4); "
                 "max entry-wise |difference| %.1e; %.2fs (< 10s)",
                 instances, worst_vae, worst_match, worst_abs, elapsed)};
}

// ------------------------------------------------------------------ oracles

Outcome closed_forms() {
  nn::Rng rng(202);
  std::uniform_real_distribution<double> mu(-2.0, 2.0), sigma(0.2, 2.5), unit(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 6);
  double w2_err = 0.0, kl_err = 0.0, h_err = 0.0, kde_err = 0.0;
  for (int t = 0; t < 30; ++t) {
    const int k = dim(rng);
    repr::Gaussian p{Eigen::VectorXd(k), Eigen::VectorXd(k)}, q{Eigen::VectorXd(k), Eigen::VectorXd(k)};
    for (int j = 0; j < k; ++j) {
      p.mu(j) = mu(rng), p.sigma(j) = sigma(rng), q.mu(j) = mu(rng), q.sigma(j) = sigma(rng);
    }
    w2_err = std::max(w2_err, std::abs(match::w2_squared(p, q) - w2_quadrature(p.mu, p.sigma, q.mu, q.sigma)));
    kl_err = std::max(kl_err, std::abs(repr::kl_to_standard_normal(p.mu, p.sigma) - kl_quadrature(p.mu, p.sigma)));
    const double prob = t == 0 ? 1e-6 : t == 1 ? 1.0 - 1e-6 : unit(rng);
    h_err = std::max(h_err, std::abs(al::binary_entropy(prob) - entropy_integral(prob)));

    std::vector<double> samples(static_cast<std::size_t>(1 + 7 * t));
    for (double& s : samples) s = 3.0 * unit(rng) * unit(rng);
    const al::KdeDensity kde(samples);
    for (int x = 0; x < 10; ++x) {
      const double at = -1.0 + 5.0 * unit(rng);
      kde_err = std::max(kde_err, std::abs(kde.evaluate(at) - kde_brute(samples, at)));
    }
  }
  const bool pass = w2_err < 1e-3 && kl_err < 1e-3 && h_err < 1e-3 && kde_err < 1e-3;
  return {pass, format("30 random fixtures; max |error| w2 %.1e, KL %.1e, entropy %.1e, KDE %.1e (< 1e-3)", w2_err,
                       kl_err, h_err, kde_err)};
}

// ---------------------------------------------------------------- retrieval

struct Shared {
  Experiment experiment;
  PairSet train;
  PairSet test;
  double full_f1 = 0.0;
};

metrics::NeighborLists lsh_lists(const std::vector<repr::GaussianRepr>& queries, const Table& query_table,
                                 const std::vector<repr::GaussianRepr>& base, const Table& base_table, std::size_t k) {
  const auto index = neighbors::LshIndex::build(base);
  metrics::NeighborLists out;
  for (std::size_t i = 0; i < queries.size(); ++i)
    for (const auto& n : index.lookup(queries[i], k)) out[query_table.at(i).id].push_back(base_table.at(n.index).id);
  return out;
}

metrics::NeighborLists euclidean_lists(const std::vector<nn::Matrix>& queries, const Table& query_table,
                                       const std::vector<nn::Matrix>& base, const Table& base_table, std::size_t k) {
  metrics::NeighborLists out;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < base.size(); ++j) d.emplace_back((queries[i] - base[j]).squaredNorm(), j);
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    for (std::size_t r = 0; r < k; ++r) out[query_table.at(i).id].push_back(base_table.at(d[r].second).id);
  }
  return out;
}

Outcome retrieval(Shared& shared) {
  const auto start = Clock::now();
  synth::SynthConfig config;  // 250 + 250 records, 100 noisy duplicates
  config.seed = 1;
  shared.experiment = fit_representation(synth::generate(config));
  const Experiment& e = shared.experiment;
  const auto lr = repr::represent_table(e.vae, e.left_irs);
  const auto rr = repr::represent_table(e.vae, e.right_irs);
  const std::size_t kmax = 20;
  const auto vae_l = lsh_lists(lr, e.data.left, rr, e.data.right, kmax);
  const auto vae_r = lsh_lists(rr, e.data.right, lr, e.data.left, kmax);
  const auto lsa_l = euclidean_lists(e.left_irs, e.data.left, e.right_irs, e.data.right, kmax);
  const auto lsa_r = euclidean_lists(e.right_irs, e.data.right, e.left_irs, e.data.left, kmax);
  std::string sweep;
  bool monotone = true;
  double previous = 0.0, vae10 = 0.0, lsa10 = 0.0;
  for (std::size_t k : {1, 2, 5, 10, 15, 20}) {
    const double v = metrics::recall_at_k(vae_l, vae_r, e.data.duplicates, k);
    const double l = metrics::recall_at_k(lsa_l, lsa_r, e.data.duplicates, k);
    monotone = monotone && v >= previous;
    previous = v;
    if (k == 10) vae10 = v, lsa10 = l;
    sweep += format(" K=%zu %.2f/%.2f", k, v, l);
  }
  const double elapsed = seconds_since(start);
  const bool pass = vae10 >= lsa10 && vae10 >= 0.85 && monotone && elapsed < 120.0;
  return {pass, format("%zu records, %zu duplicates; recall@10 VAE %.3f vs LSA %.3f (VAE >= LSA, >= 0.85); "
                       "VAE/LSA sweep%s; non-decreasing %s; %.1fs (< 120s)",
                       e.data.left.size() + e.data.right.size(), e.data.duplicates.size(), vae10, lsa10,
                       sweep.c_str(), monotone ? "yes" : "no", elapsed)};
}

// ----------------------------------------------------------------- matching

match::MatcherConfig matcher_config() {
  match::MatcherConfig config;
  config.holdout_fraction = 0.0;
  return config;
}

Outcome matching(Shared& shared) {
  const auto start = Clock::now();
  const Experiment& e = shared.experiment;
  const PairSet labeled = synth::labeled_pairs(e.data, 200, 6);
  std::tie(shared.train, shared.test) = synth::split_pairs(labeled, 200, 7);
  const auto pairs = e.training_pairs(shared.train);
  const auto result = match::train_matcher(pairs, e.vae, matcher_config());
  const auto s = e.score(result.model, shared.test);
  shared.full_f1 = s.f1;
  const double elapsed = seconds_since(start);
  return {s.f1 >= 0.90 && elapsed < 60.0,
          format("%zu labeled train pairs, %zu held out; P %.3f R %.3f F1 %.3f (>= 0.90); %.1fs (< 60s)",
                 shared.train.size(), shared.test.size(), s.precision, s.recall, s.f1, elapsed)};
}

// ------------------------------------------------------------ training time

Outcome training_time() {
  const auto data = synth::generate(synth::restaurants_scale(3));
  const auto labeled = synth::labeled_pairs(data, 200, 4);
  const auto [train, test] = synth::split_pairs(labeled, 200, 5);
  const auto start = Clock::now();
  const Experiment e = fit_representation(data);
  const double repr_time = seconds_since(start);
  const auto mid = Clock::now();
  const auto result = match::train_matcher(e.training_pairs(train), e.vae, matcher_config());
  const double match_time = seconds_since(mid);
  const double total = repr_time + match_time;
  const auto s = e.score(result.model, test);
  return {total < 60.0, format("%zu + %zu records, arity %zu; representation %.2fs + matcher %.2fs = %.2fs (< 60s); "
                               "held-out F1 %.3f",
                               data.left.size(), data.right.size(), data.left.arity(), repr_time, match_time, total,
                               s.f1)};
}

// ----------------------------------------------------------------- transfer

Outcome transfer(const Shared& shared) {
  // Domain A is the restaurants experiment; domain B is a products catalogue.
  synth::SynthConfig config;
  config.domain = synth::Domain::products;
  config.seed = 2;
  Experiment b = fit_representation(synth::generate(config));
  const std::size_t arity = shared.experiment.vae.arity;
  if (b.data.left.arity() != arity) {
    b.data.left = align_arity(b.data.left, arity);
    b.data.right = align_arity(b.data.right, arity);
    b.left_irs = repr::table_irs(b.data.left, *b.lsa);
    b.right_irs = repr::table_irs(b.data.right, *b.lsa);
  }
  const PairSet labeled = synth::labeled_pairs(b.data, 200, 8);
  const auto [train, test] = synth::split_pairs(labeled, 200, 9);
  const auto pairs = b.training_pairs(train);
  const auto local = match::train_matcher(pairs, b.vae, matcher_config());
  const auto moved = match::train_matcher(pairs, shared.experiment.vae, matcher_config());
  const double f1_local = b.score(local.model, test).f1;
  const double f1_moved = b.score(moved.model, test).f1;
  const double drop = f1_local - f1_moved;
  return {drop <= 0.05, format("products domain, IR dim %lld; F1 local %.3f, transferred from restaurants %.3f, "
                               "drop %.3f (<= 0.05)",
                               static_cast<long long>(b.lsa->dim()), f1_local, f1_moved, drop)};
}

// ---------------------------------------------------------- active learning

Outcome active_learning(const Shared& shared) {
  const Experiment& e = shared.experiment;
  const auto workspace = al::Workspace::build(e.data.left, e.data.right, *e.lsa, e.vae);
  const std::set<PairKey> truth(e.data.duplicates.begin(), e.data.duplicates.end());

  al::LearnerConfig config;
  config.matcher = matcher_config();
  const std::size_t budget = 250;
  const std::size_t iterations = budget / config.batch_size;
  const al::Labeler oracle = [&](const al::CandidatePair& pair, al::Category) -> std::optional<int> {
    return truth.contains(pair.key) ? 1 : 0;
  };

  // Bootstrap quality, from a fresh bootstrap with the same configuration.
  const auto pools = al::bootstrap(workspace, config.bootstrap);
  std::size_t correct = 0;
  for (const auto& p : pools.positives) correct += truth.contains(p.pair.key);
  for (const auto& p : pools.negatives) correct += !truth.contains(p.pair.key);
  const double boot_accuracy = static_cast<double>(correct) / static_cast<double>(pools.labeled());

  const auto result = al::al_loop(workspace, e.vae, iterations, config, oracle, &shared.test);
  const double f1 = result.history.back().test->f1;
  const double f1_boot = result.history.front().test->f1;
  double best = 0.0;
  for (const auto& h : result.history) best = std::max(best, h.test->f1);
  const double ratio = shared.full_f1 > 0 ? f1 / shared.full_f1 : 0.0;
  const bool pass = ratio >= 0.85 && result.labels_used <= budget && boot_accuracy >= 0.80;
  return {pass, format("bootstrap %zu auto labels, %.0f%% correct (>= 80%%); F1 bootstrap %.3f -> %.3f after %zu "
                       "oracle labels (best %.3f); full-data F1 %.3f, ratio %.2f (>= 0.85, labels <= %zu)",
                       pools.labeled(), 100.0 * boot_accuracy, f1_boot, f1, result.labels_used, best,
                       shared.full_f1, ratio, budget)};
}

// -------------------------------------------------------------- determinism

int run(const std::string& command) { return std::system((command + " > /dev/null 2>&1").c_str()); }

Outcome determinism() {
  TempDir dir;
  const std::string cli = VAER_CLI_PATH;
  const std::string data = dir.file("data");
  if (run(cli + " synth --seed 4 --out-dir " + data) != 0) return {false, "synth command failed"};
  const std::string tables =
      " --left " + data + "/left.csv --right " + data + "/right.csv --id-column id";
  std::vector<std::string> files;
  for (int i = 0; i < 2; ++i) {
    const std::string model = dir.file("repr" + std::to_string(i) + ".bin");
    const std::string matcher = dir.file("match" + std::to_string(i) + ".bin");
    if (run(cli + " train-repr" + tables + " --epochs 5 --seed 9 --out " + model) != 0)
      return {false, "train-repr failed"};
    if (run(cli + " match" + tables + " --train " + data + "/train.csv --epochs 5 --seed 9 --model " + model +
            " --out " + matcher) != 0)
      return {false, "match failed"};
    files.push_back(model);
    files.push_back(model + ".lsa");
    files.push_back(matcher);
  }
  std::size_t bytes = 0;
  bool same = true;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto a = read_bytes(files[i]), b = read_bytes(files[i + 3]);
    same = same && !a.empty() && a == b;
    bytes += a.size();
  }
  return {same, format("train-repr and match run twice with seed 9: representation model, LSA model and matcher "
                       "files %s (%zu bytes compared)",
                       same ? "bitwise identical" : "DIFFER", bytes)};
}

}  // namespace

int main() {
  Shared shared;
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"gradient correctness", gradients},
      {"closed-form oracles", closed_forms},
      {"unsupervised retrieval", [&] { return retrieval(shared); }},
      {"matching effectiveness", [&] { return matching(shared); }},
      {"training time", training_time},
      {"transfer", [&] { return transfer(shared); }},
      {"active learning", [&] { return active_learning(shared); }},
      {"determinism", determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& ex) {
      o = {false, std::string("threw: ") + ex.what()};
    }
    failures += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, std::size(criteria));
  return failures == 0 ? 0 : 1;
}
