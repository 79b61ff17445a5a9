#include "vaer/match.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "model_io.hpp"
#include "vaer/error.hpp"

namespace vaer::match {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_same_shape(const GaussianRepr& s, const GaussianRepr& t) {
  if (s.arity() != t.arity() || s.latent_dim() != t.latent_dim()) {
    throw DimensionError("representations differ in shape: " + std::to_string(s.arity()) + "x" +
                         std::to_string(s.latent_dim()) + " vs " + std::to_string(t.arity()) + "x" +
                         std::to_string(t.latent_dim()));
  }
}

// Per-row distance vectors: (mu_s - mu_t)^2 + (sigma_s - sigma_t)^2.
Matrix distance_rows(const Matrix& mu_s, const Matrix& sigma_s, const Matrix& mu_t, const Matrix& sigma_t) {
  return (mu_s - mu_t).array().square().matrix() + (sigma_s - sigma_t).array().square().matrix();
}

// n*m x k rows grouped by pair -> n x (m*k), attribute blocks in order.
Matrix concat_attributes(const Matrix& rows, Eigen::Index arity) {
  RowMajor rm = rows;
  const Eigen::Index n = rows.rows() / arity;
  return Eigen::Map<RowMajor>(rm.data(), n, arity * rows.cols());
}

Matrix split_attributes(const Matrix& concat, Eigen::Index arity, Eigen::Index k) {
  RowMajor rm = concat;
  return Eigen::Map<RowMajor>(rm.data(), concat.rows() * arity, k);
}

// Logits of the classifier for rows of concatenated distance vectors.
Vector classifier_logits(const MatcherModel& model, const Matrix& features, nn::DenseCache* hidden_cache,
                         Matrix* hidden_out) {
  Matrix hidden = nn::dense_forward(model.hidden, features, hidden_cache);
  Vector logits = hidden * model.output.weights.row(0).transpose();
  logits.array() += model.output.bias[0];
  if (hidden_out) *hidden_out = std::move(hidden);
  return logits;
}

void check_pair(const MatcherModel& model, const Matrix& left, const Matrix& right) {
  for (const Matrix* m : {&left, &right}) {
    if (static_cast<std::uint64_t>(m->rows()) != model.arity) {
      throw DimensionError("pair has " + std::to_string(m->rows()) + " attributes, matcher expects " +
                           std::to_string(model.arity));
    }
  }
}

Matrix stack(std::span<const PairIrs> pairs, bool left, Eigen::Index arity, Eigen::Index dim) {
  Matrix out(static_cast<Eigen::Index>(pairs.size()) * arity, dim);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const Matrix& m = left ? *pairs[p].left : *pairs[p].right;
    if (m.rows() != arity || m.cols() != dim) {
      throw DimensionError("pair IR matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                           ", matcher expects " + std::to_string(arity) + "x" + std::to_string(dim));
    }
    out.middleRows(static_cast<Eigen::Index>(p) * arity, arity) = m;
  }
  return out;
}

}  // namespace

double w2_squared(const Gaussian& p, const Gaussian& q) {
  if (p.mu.size() != q.mu.size() || p.sigma.size() != q.sigma.size() || p.mu.size() != p.sigma.size()) {
    throw DimensionError("w2_squared: dimension mismatch");
  }
  return (p.mu - q.mu).squaredNorm() + (p.sigma - q.sigma).squaredNorm();
}

Vector wasserstein_vec(const GaussianRepr& s, const GaussianRepr& t) {
  check_same_shape(s, t);
  return concat_attributes(distance_rows(s.mu, s.sigma, t.mu, t.sigma), s.arity()).row(0).transpose();
}

Vector attribute_w2(const GaussianRepr& s, const GaussianRepr& t) {
  check_same_shape(s, t);
  return distance_rows(s.mu, s.sigma, t.mu, t.sigma).rowwise().sum();
}

double total_w2(const GaussianRepr& s, const GaussianRepr& t) {
  check_same_shape(s, t);
  return (s.mu - t.mu).squaredNorm() + (s.sigma - t.sigma).squaredNorm();
}

MatcherModel MatcherModel::init(const repr::Encoder& encoder, std::uint64_t arity, const MatcherConfig& config,
                                nn::Rng& rng) {
  if (arity == 0) throw DimensionError("matcher arity must be positive");
  if (config.margin <= 0) throw TrainingError("margin must be positive");
  MatcherModel m;
  m.encoder = encoder;
  m.arity = arity;
  const Eigen::Index features = static_cast<Eigen::Index>(arity) * encoder.latent_dim();
  m.hidden = nn::DenseLayer::glorot(features, config.hidden, nn::Activation::relu, rng);
  m.output = nn::DenseLayer::glorot(config.hidden, 1, nn::Activation::sigmoid, rng);
  m.margin = config.margin;
  m.threshold = config.threshold;
  return m;
}

MatcherModel MatcherModel::zeros_like() const {
  MatcherModel g = *this;
  g.encoder = encoder.zeros_like();
  g.hidden.set_zero();
  g.output.set_zero();
  return g;
}

nn::ParamViews MatcherModel::params() {
  nn::ParamViews views;
  encoder.append_params(views);
  nn::append_params(hidden, views);
  nn::append_params(output, views);
  return views;
}

std::vector<double> classify(const MatcherModel& model, std::span<const GaussianRepr* const> lefts,
                             std::span<const GaussianRepr* const> rights) {
  if (lefts.size() != rights.size()) throw DimensionError("classify: left/right count mismatch");
  if (lefts.empty()) return {};
  const Eigen::Index k = model.encoder.latent_dim();
  const auto arity = static_cast<Eigen::Index>(model.arity);
  Matrix features(static_cast<Eigen::Index>(lefts.size()), arity * k);
  for (std::size_t p = 0; p < lefts.size(); ++p) {
    if (lefts[p]->arity() != arity || rights[p]->arity() != arity) {
      throw DimensionError("classify: representation arity differs from the matcher's " + std::to_string(arity));
    }
    features.row(static_cast<Eigen::Index>(p)) = wasserstein_vec(*lefts[p], *rights[p]).transpose();
  }
  const Vector logits = classifier_logits(model, features, nullptr, nullptr);
  std::vector<double> out(lefts.size());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = nn::sigmoid(logits[static_cast<Eigen::Index>(p)]);
  return out;
}

double classify(const MatcherModel& model, const GaussianRepr& s, const GaussianRepr& t) {
  const GaussianRepr* l[] = {&s};
  const GaussianRepr* r[] = {&t};
  return classify(model, l, r).front();
}

std::vector<double> match_forward(const MatcherModel& model, std::span<const PairIrs> pairs) {
  if (pairs.empty()) return {};
  const auto arity = static_cast<Eigen::Index>(model.arity);
  const Eigen::Index d = model.encoder.input_dim();
  const repr::EncoderOutput s = repr::encoder_forward(model.encoder, stack(pairs, true, arity, d));
  const repr::EncoderOutput t = repr::encoder_forward(model.encoder, stack(pairs, false, arity, d));
  const Matrix features = concat_attributes(distance_rows(s.mu, s.sigma, t.mu, t.sigma), arity);
  const Vector logits = classifier_logits(model, features, nullptr, nullptr);
  std::vector<double> out(pairs.size());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = nn::sigmoid(logits[static_cast<Eigen::Index>(p)]);
  return out;
}

double match_forward(const MatcherModel& model, const Matrix& left_irs, const Matrix& right_irs) {
  check_pair(model, left_irs, right_irs);
  const PairIrs pair{&left_irs, &right_irs};
  return match_forward(model, std::span<const PairIrs>(&pair, 1)).front();
}

double contrastive_loss(double p, int x, const GaussianRepr& s, const GaussianRepr& t, double margin) {
  if (x != 0 && x != 1) throw FormatError("contrastive_loss: label must be 0 or 1");
  if (margin <= 0) throw FormatError("contrastive_loss: margin must be positive");
  const double bce = x == 1 ? -std::log(p) : -std::log1p(-p);
  const Vector w = attribute_w2(s, t);
  double distance_term = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) distance_term += x == 1 ? w[i] : std::max(0.0, margin - w[i]);
  return bce + distance_term / static_cast<double>(w.size());
}

double matcher_loss(const MatcherModel& model, std::span<const PairIrs> pairs, std::span<const int> labels,
                    MatcherModel* grads) {
  if (pairs.size() != labels.size()) throw DimensionError("matcher_loss: pair/label count mismatch");
  if (pairs.empty()) return 0.0;
  const auto arity = static_cast<Eigen::Index>(model.arity);
  const Eigen::Index d = model.encoder.input_dim();
  const Eigen::Index k = model.encoder.latent_dim();
  const auto n = static_cast<Eigen::Index>(pairs.size());

  repr::EncoderCache cache_s, cache_t;
  const repr::EncoderOutput s = repr::encoder_forward(model.encoder, stack(pairs, true, arity, d), grads ? &cache_s : nullptr);
  const repr::EncoderOutput t = repr::encoder_forward(model.encoder, stack(pairs, false, arity, d), grads ? &cache_t : nullptr);
  const Matrix mu_diff = s.mu - t.mu;
  const Matrix sigma_diff = s.sigma - t.sigma;
  const Matrix dist = mu_diff.array().square().matrix() + sigma_diff.array().square().matrix();
  const Vector w = dist.rowwise().sum();  // per (pair, attribute)
  const Matrix features = concat_attributes(dist, arity);

  nn::DenseCache hidden_cache;
  Matrix hidden;
  const Vector logits = classifier_logits(model, features, grads ? &hidden_cache : nullptr, &hidden);

  const double inv_m = 1.0 / static_cast<double>(arity);
  double total = 0.0;
  Vector g_logit(n);
  Vector row_coeff(n * arity);
  for (Eigen::Index p = 0; p < n; ++p) {
    const int x = labels[static_cast<std::size_t>(p)];
    if (x != 0 && x != 1) throw FormatError("matcher_loss: label must be 0 or 1");
    const double z = logits[p];
    total += nn::softplus(z) - x * z;  // binary cross-entropy from the logit
    g_logit[p] = nn::sigmoid(z) - x;
    for (Eigen::Index i = 0; i < arity; ++i) {
      const double wi = w[p * arity + i];
      if (x == 1) {
        total += inv_m * wi;
        row_coeff[p * arity + i] = inv_m;
      } else {
        const double gap = model.margin - wi;
        total += inv_m * std::max(0.0, gap);
        row_coeff[p * arity + i] = gap > 0 ? -inv_m : 0.0;
      }
    }
  }
  if (!grads) return total;

  // output layer (sigmoid folded into the cross-entropy gradient)
  grads->output.weights.row(0) += (hidden.transpose() * g_logit).transpose();
  grads->output.bias[0] += g_logit.sum();
  const Matrix g_hidden = g_logit * model.output.weights.row(0);
  const Matrix g_features = nn::dense_backward(model.hidden, hidden_cache, g_hidden, grads->hidden);

  Matrix g_dist = split_attributes(g_features, arity, k);
  g_dist.array().colwise() += row_coeff.array();

  const Matrix g_mu_s = 2.0 * mu_diff.cwiseProduct(g_dist);
  const Matrix g_sigma_s = 2.0 * sigma_diff.cwiseProduct(g_dist);
  repr::encoder_backward(model.encoder, cache_s, g_mu_s, g_sigma_s, grads->encoder);
  repr::encoder_backward(model.encoder, cache_t, -g_mu_s, -g_sigma_s, grads->encoder);
  return total;
}

MatcherTrainResult train_matcher(std::span<const TrainingPair> pairs, const repr::Encoder& encoder,
                                 std::uint64_t arity, const MatcherConfig& config) {
  if (config.epochs == 0 || config.batch_size == 0) throw TrainingError("matcher epochs and batch size must be positive");
  nn::Rng rng(config.seed);

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto holdout_n = config.holdout_fraction > 0
                             ? static_cast<std::size_t>(std::ceil(config.holdout_fraction * static_cast<double>(pairs.size())))
                             : std::size_t{0};
  std::vector<std::size_t> holdout(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(holdout_n, order.size())));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(holdout.size()), order.end());

  std::size_t positives = 0;
  for (std::size_t i : train) positives += pairs[i].label == 1 ? 1 : 0;
  if (positives == 0 || positives == train.size()) {
    throw TrainingError("matcher training set must contain both duplicates and non-duplicates (" +
                        std::to_string(positives) + " of " + std::to_string(train.size()) + " positive)");
  }

  MatcherTrainResult result;
  result.model = MatcherModel::init(encoder, arity, config, rng);
  MatcherModel& model = result.model;
  MatcherModel grads = model.zeros_like();
  nn::ParamViews param_views = model.params();
  nn::ParamViews grad_views = grads.params();
  nn::AdamState adam(config.adam);

  std::vector<PairIrs> batch_pairs;
  std::vector<int> batch_labels;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(train.begin(), train.end(), rng);
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < train.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, train.size() - start);
      batch_pairs.clear();
      batch_labels.clear();
      for (std::size_t b = 0; b < count; ++b) {
        batch_pairs.push_back(pairs[train[start + b]].irs);
        batch_labels.push_back(pairs[train[start + b]].label);
      }
      for (auto& v : grad_views) std::fill(v.begin(), v.end(), 0.0);
      const double loss = matcher_loss(model, batch_pairs, batch_labels, &grads);
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite matcher loss at epoch " + std::to_string(epoch + 1));
      }
      for (auto& v : grad_views)
        for (double& g : v) g /= static_cast<double>(count);
      adam.step(param_views, grad_views);
      epoch_total += loss;
    }
    result.epoch_losses.push_back(epoch_total / static_cast<double>(train.size()));
  }

  result.holdout_size = holdout.size();
  if (!holdout.empty()) {
    std::vector<PairIrs> held;
    std::vector<int> truth;
    for (std::size_t i : holdout) {
      held.push_back(pairs[i].irs);
      truth.push_back(pairs[i].label);
    }
    std::vector<int> predicted;
    for (double p : match_forward(model, held)) predicted.push_back(decide(p, model.threshold));
    result.holdout = metrics::scores(metrics::confusion(predicted, truth));
  }
  return result;
}

MatcherTrainResult train_matcher(std::span<const TrainingPair> pairs, const repr::VaeModel& vae,
                                 const MatcherConfig& config) {
  return train_matcher(pairs, vae.encoder, vae.arity, config);
}

std::vector<Prediction> predict(const MatcherModel& model, std::span<const PairIrs> pairs,
                                std::optional<double> threshold) {
  const double cut = threshold.value_or(model.threshold);
  std::vector<Prediction> out;
  out.reserve(pairs.size());
  // bounded batches keep the stacked encoder inputs small
  constexpr std::size_t kChunk = 256;
  for (std::size_t start = 0; start < pairs.size(); start += kChunk) {
    const auto chunk = pairs.subspan(start, std::min(kChunk, pairs.size() - start));
    for (double p : match_forward(model, chunk)) out.push_back({p, decide(p, cut)});
  }
  return out;
}

void save_matcher(const MatcherModel& model, const std::string& path) {
  io::BinaryWriter w(path);
  w.magic("VAERMTCH");
  w.u32(MatcherModel::kFormatVersion);
  w.u64(model.arity);
  io::write_encoder(w, model.encoder);
  io::write_layer(w, model.hidden);
  io::write_layer(w, model.output);
  w.f64(model.margin);
  w.f64(model.threshold);
  w.close();
}

MatcherModel load_matcher(const std::string& path) {
  io::BinaryReader r(path);
  r.expect_magic("VAERMTCH");
  const auto version = r.u32();
  if (version != MatcherModel::kFormatVersion) {
    throw FormatError(path + ": unsupported matcher version " + std::to_string(version));
  }
  MatcherModel m;
  m.arity = r.u64();
  m.encoder = io::read_encoder(r);
  m.hidden = io::read_layer(r);
  m.output = io::read_layer(r);
  m.margin = r.f64();
  m.threshold = r.f64();
  if (m.hidden.in_dim() != static_cast<Eigen::Index>(m.arity) * m.encoder.latent_dim() ||
      m.output.in_dim() != m.hidden.out_dim() || m.output.out_dim() != 1) {
    throw FormatError(path + ": classifier shapes do not match the encoder");
  }
  return m;
}

}  // namespace vaer::match
