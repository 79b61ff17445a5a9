#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "vaer/al.hpp"
#include "vaer/corpus.hpp"
#include "vaer/ir.hpp"
#include "vaer/match.hpp"
#include "vaer/metrics.hpp"
#include "vaer/repr.hpp"
#include "vaer/synth.hpp"

namespace vaer::testing {

/// Directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("vaer-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline nn::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, nn::Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  nn::Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal(rng);
  return m;
}

/// Synthetic tables with LSA IRs and a trained representation model.
struct Experiment {
  synth::SynthDataset data;
  std::shared_ptr<ir::LsaModel> lsa;
  std::vector<nn::Matrix> left_irs;
  std::vector<nn::Matrix> right_irs;
  repr::VaeModel vae;

  match::PairIrs irs_of(const PairKey& key) const {
    const auto l = static_cast<std::size_t>(data.left.find(key.left) - data.left.records().data());
    const auto r = static_cast<std::size_t>(data.right.find(key.right) - data.right.records().data());
    return {&left_irs[l], &right_irs[r]};
  }

  std::vector<match::TrainingPair> training_pairs(const PairSet& pairs) const {
    std::vector<match::TrainingPair> out;
    for (const LabeledKey& p : pairs.pairs()) out.push_back({irs_of(p.pair), p.label});
    return out;
  }

  metrics::Scores score(const match::MatcherModel& model, const PairSet& truth) const {
    std::vector<match::PairIrs> irs;
    for (const LabeledKey& p : truth.pairs()) irs.push_back(irs_of(p.pair));
    const auto predictions = match::predict(model, irs);
    std::map<PairKey, int> by_key;
    for (std::size_t i = 0; i < predictions.size(); ++i) by_key[truth.pairs()[i].pair] = predictions[i].label;
    return metrics::prf1(by_key, truth);
  }
};

struct ExperimentOptions {
  Eigen::Index ir_dim = 300;
  Eigen::Index latent = 100;
  std::size_t vae_epochs = 20;
  std::uint64_t seed = 7;
};

inline Experiment fit_representation(synth::SynthDataset data, const ExperimentOptions& options = {}) {
  Experiment e;
  e.data = std::move(data);
  const auto corpus = ir::corpus_sentences(e.data.left, e.data.right);
  e.lsa = std::make_shared<ir::LsaModel>(ir::fit_lsa(corpus, options.ir_dim));
  e.left_irs = repr::table_irs(e.data.left, *e.lsa);
  e.right_irs = repr::table_irs(e.data.right, *e.lsa);
  std::vector<nn::Matrix> all = e.left_irs;
  all.insert(all.end(), e.right_irs.begin(), e.right_irs.end());
  repr::VaeTrainConfig config;
  config.dims = {e.lsa->dim(), 200, options.latent};
  config.epochs = options.vae_epochs;
  config.seed = options.seed;
  e.vae = repr::train_vae(all, config).model;
  return e;
}

}  // namespace vaer::testing
