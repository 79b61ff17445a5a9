#include <doctest.h>

#include <cmath>

#include "support/fd.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "vaer/error.hpp"
#include "vaer/match.hpp"

using namespace vaer;
using doctest::Approx;

namespace {

repr::GaussianRepr make_repr(std::initializer_list<double> mu, std::initializer_list<double> sigma, Eigen::Index m) {
  repr::GaussianRepr r;
  const auto k = static_cast<Eigen::Index>(mu.size()) / m;
  r.mu = Eigen::Map<const Eigen::MatrixXd>(std::data(mu), k, m).transpose();
  r.sigma = Eigen::Map<const Eigen::MatrixXd>(std::data(sigma), k, m).transpose();
  return r;
}

}  // namespace

TEST_CASE("squared 2-Wasserstein distance") {
  const repr::Gaussian p{Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 1.0)};
  const repr::Gaussian q{Eigen::VectorXd::Constant(1, 3.0), Eigen::VectorXd::Constant(1, 2.0)};
  CHECK(match::w2_squared(p, q) == Approx(10.0));
  CHECK(match::w2_squared(p, p) == 0.0);
  CHECK(match::w2_squared(p, q) == Approx(testing::w2_quadrature(p.mu, p.sigma, q.mu, q.sigma)).epsilon(1e-8));

  // Two attributes, k = 2; rows are attributes.
  const auto s = make_repr({0, 1, 2, 3}, {1, 1, 1, 1}, 2);
  const auto t = make_repr({1, 1, 2, 5}, {1, 2, 1, 1}, 2);
  const auto vec = match::wasserstein_vec(s, t);
  CHECK(vec.size() == 4);
  CHECK(vec(0) == Approx(1.0));
  CHECK(vec(1) == Approx(1.0));  // sigma gap
  CHECK(vec(3) == Approx(4.0));
  const auto per_attribute = match::attribute_w2(s, t);
  CHECK(per_attribute(0) == Approx(2.0));
  CHECK(per_attribute(1) == Approx(4.0));
  CHECK(match::total_w2(s, t) == Approx(6.0));
}

TEST_CASE("contrastive loss by hand") {
  const auto s = make_repr({0, 0}, {1, 1}, 2);
  const auto t = make_repr({0.2, 0.6}, {1, 1}, 2);  // W = 0.04, 0.36
  CHECK(match::contrastive_loss(0.8, 1, s, t, 0.5) == Approx(-std::log(0.8) + 0.5 * (0.04 + 0.36)));
  CHECK(match::contrastive_loss(0.3, 0, s, t, 0.5) == Approx(-std::log(0.7) + 0.5 * (0.46 + 0.14)));
  CHECK(match::contrastive_loss(0.3, 0, s, t, 0.1) == Approx(-std::log(0.7) + 0.5 * 0.06));
}

TEST_CASE("decision threshold is strict") {
  CHECK(match::decide(0.5, 0.5) == 0);
  CHECK(match::decide(0.5000001, 0.5) == 1);
}

namespace {

struct Toy {
  repr::VaeModel vae;
  std::vector<nn::Matrix> irs;
  std::vector<match::TrainingPair> pairs;
};

// Duplicates are small perturbations of one another; non-duplicates are independent.
Toy toy_pairs(std::size_t n, std::uint64_t seed) {
  Toy toy;
  nn::Rng rng(seed);
  toy.vae = repr::VaeModel::init({8, 12, 4}, 2, rng);
  toy.irs.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const nn::Matrix a = testing::random_matrix(2, 8, rng);
    toy.irs.push_back(a);
    toy.irs.push_back(i % 2 == 0 ? nn::Matrix(a + testing::random_matrix(2, 8, rng, 0.05)) : testing::random_matrix(2, 8, rng));
  }
  for (std::size_t i = 0; i < n; ++i) toy.pairs.push_back({{&toy.irs[2 * i], &toy.irs[2 * i + 1]}, i % 2 == 0 ? 1 : 0});
  return toy;
}

}  // namespace

TEST_CASE("matcher forward is symmetric and agrees with classify") {
  nn::Rng rng(4);
  const auto vae = repr::VaeModel::init({6, 5, 3}, 2, rng);
  const auto model = match::MatcherModel::init(vae.encoder, 2, {}, rng);
  const nn::Matrix a = testing::random_matrix(2, 6, rng), b = testing::random_matrix(2, 6, rng);
  const double p = match::match_forward(model, a, b);
  CHECK(p > 0.0);
  CHECK(p < 1.0);
  CHECK(match::match_forward(model, b, a) == Approx(p).epsilon(1e-12));
  const auto ra = repr::represent_record(model.encoder, 2, a), rb = repr::represent_record(model.encoder, 2, b);
  CHECK(match::classify(model, ra, rb) == Approx(p).epsilon(1e-12));
  CHECK_THROWS_AS(match::match_forward(model, a, testing::random_matrix(3, 6, rng)), DimensionError);
}

TEST_CASE("matcher gradients match finite differences") {
  const auto toy = toy_pairs(6, 12);
  nn::Rng rng(13);
  for (double margin : {0.5, 5.0}) {
    match::MatcherConfig config;
    config.hidden = 5;
    config.margin = margin;
    auto model = match::MatcherModel::init(toy.vae.encoder, 2, config, rng);
    std::vector<match::PairIrs> pairs;
    std::vector<int> labels;
    for (const auto& p : toy.pairs) pairs.push_back(p.irs), labels.push_back(p.label);
    auto grads = model.zeros_like();
    const double loss = match::matcher_loss(model, pairs, labels, &grads);
    CHECK(std::isfinite(loss));
    const auto check = testing::check_gradients(model.params(), grads.params(),
                                                [&] { return match::matcher_loss(model, pairs, labels); });
    CHECK(check.relative < 1e-6);
  }
}

TEST_CASE("training separates perturbed copies from strangers") {
  const auto train = toy_pairs(120, 21);
  const auto test = toy_pairs(40, 22);
  match::MatcherConfig config;
  config.epochs = 40;
  const auto result = match::train_matcher(train.pairs, train.vae, config);
  CHECK(result.holdout_size == 12);
  CHECK(result.epoch_losses.back() < result.epoch_losses.front());
  std::vector<match::PairIrs> irs;
  for (const auto& p : test.pairs) irs.push_back(p.irs);
  const auto predictions = match::predict(result.model, irs);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) correct += predictions[i].label == test.pairs[i].label;
  CHECK(correct >= 38);

  // Same seed, same model.
  const auto again = match::train_matcher(train.pairs, train.vae, config);
  CHECK(again.model.hidden.weights == result.model.hidden.weights);
  CHECK(again.model.encoder.trunk.weights == result.model.encoder.trunk.weights);
}

TEST_CASE("training needs both classes") {
  auto toy = toy_pairs(10, 3);
  for (auto& p : toy.pairs) p.label = 1;
  match::MatcherConfig config;
  config.holdout_fraction = 0;
  CHECK_THROWS_AS(match::train_matcher(toy.pairs, toy.vae, config), TrainingError);
}

TEST_CASE("matcher files round trip") {
  testing::TempDir dir;
  nn::Rng rng(5);
  const auto vae = repr::VaeModel::init({6, 5, 3}, 2, rng);
  match::MatcherConfig config;
  config.margin = 1.5;
  config.threshold = 0.7;
  const auto model = match::MatcherModel::init(vae.encoder, 2, config, rng);
  match::save_matcher(model, dir.file("m.bin"));
  const auto back = match::load_matcher(dir.file("m.bin"));
  CHECK(back.margin == 1.5);
  CHECK(back.threshold == 0.7);
  CHECK(back.hidden.weights == model.hidden.weights);
  const nn::Matrix a = testing::random_matrix(2, 6, rng), b = testing::random_matrix(2, 6, rng);
  CHECK(match::match_forward(back, a, b) == match::match_forward(model, a, b));
  const match::PairIrs pair{&a, &b};
  const auto p = match::predict(back, std::span(&pair, 1), 0.0);
  CHECK(p[0].label == 1);
  CHECK_THROWS_AS(match::load_matcher(dir.file("missing.bin")), IoError);
}
