#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vaer/metrics.hpp"
#include "vaer/nn.hpp"
#include "vaer/repr.hpp"

namespace vaer::match {

using nn::Matrix;
using nn::Vector;
using repr::Gaussian;
using repr::GaussianRepr;

/// Closed-form squared 2-Wasserstein distance between diagonal Gaussians:
/// sum_j (mu_p - mu_q)^2 + (sigma_p - sigma_q)^2.
double w2_squared(const Gaussian& p, const Gaussian& q);

/// Attribute-wise elementwise distance vectors, concatenated (length m * k).
Vector wasserstein_vec(const GaussianRepr& s, const GaussianRepr& t);
/// W2^2 per attribute (length m).
Vector attribute_w2(const GaussianRepr& s, const GaussianRepr& t);
/// Sum of attribute_w2.
double total_w2(const GaussianRepr& s, const GaussianRepr& t);

struct MatcherConfig {
  Eigen::Index hidden = 64;
  double margin = 0.5;
  double threshold = 0.5;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::uint64_t seed = 11;
  nn::AdamConfig adam;
  /// Fraction of labeled pairs held out to report F1; 0 trains on everything.
  double holdout_fraction = 0.1;
};

/// Siamese matcher: one shared encoder applied to both tuples, a
/// Wasserstein distance layer and a two-layer MLP.
struct MatcherModel {
  static constexpr std::uint32_t kFormatVersion = 1;

  repr::Encoder encoder;
  std::uint64_t arity = 0;
  nn::DenseLayer hidden;  // m*k -> c, relu
  nn::DenseLayer output;  // c -> 1, sigmoid
  double margin = 0.5;
  double threshold = 0.5;

  /// Copies `encoder` and draws a fresh classifier.
  static MatcherModel init(const repr::Encoder& encoder, std::uint64_t arity, const MatcherConfig& config,
                           nn::Rng& rng);

  MatcherModel zeros_like() const;
  nn::ParamViews params();
};

/// IRs of one candidate pair (each m x d). Non-owning.
struct PairIrs {
  const Matrix* left = nullptr;
  const Matrix* right = nullptr;
};

/// p(1 | s, t) in (0, 1); symmetric in its arguments.
double match_forward(const MatcherModel& model, const Matrix& left_irs, const Matrix& right_irs);
std::vector<double> match_forward(const MatcherModel& model, std::span<const PairIrs> pairs);

/// Probability from representations already produced by `model.encoder`.
double classify(const MatcherModel& model, const GaussianRepr& s, const GaussianRepr& t);
std::vector<double> classify(const MatcherModel& model, std::span<const GaussianRepr* const> lefts,
                             std::span<const GaussianRepr* const> rights);

/// Cross-entropy of p against x plus the margin term averaged over attributes:
/// (1/m) sum_i [x W_i + (1 - x) max(0, M - W_i)].
double contrastive_loss(double p, int x, const GaussianRepr& s, const GaussianRepr& t, double margin);

/// Summed contrastive loss over a batch; accumulates exact gradients for the
/// shared encoder and the classifier when `grads` is given.
double matcher_loss(const MatcherModel& model, std::span<const PairIrs> pairs, std::span<const int> labels,
                    MatcherModel* grads = nullptr);

struct TrainingPair {
  PairIrs irs;
  int label = 0;
};

struct MatcherTrainResult {
  MatcherModel model;
  std::vector<double> epoch_losses;  // mean loss per pair
  std::size_t holdout_size = 0;
  metrics::Scores holdout;           // meaningful when holdout_size > 0
};

/// Initializes the encoder from `encoder` (normally the trained VAE's),
/// then fine-tunes encoder and classifier together. Throws TrainingError
/// when the training split lacks either class.
MatcherTrainResult train_matcher(std::span<const TrainingPair> pairs, const repr::Encoder& encoder,
                                 std::uint64_t arity, const MatcherConfig& config);
MatcherTrainResult train_matcher(std::span<const TrainingPair> pairs, const repr::VaeModel& vae,
                                 const MatcherConfig& config);

struct Prediction {
  double probability = 0.0;
  int label = 0;
};

/// label = probability > threshold (strict).
inline int decide(double probability, double threshold) { return probability > threshold ? 1 : 0; }

std::vector<Prediction> predict(const MatcherModel& model, std::span<const PairIrs> pairs,
                                std::optional<double> threshold = std::nullopt);

void save_matcher(const MatcherModel& model, const std::string& path);
MatcherModel load_matcher(const std::string& path);

}  // namespace vaer::match
