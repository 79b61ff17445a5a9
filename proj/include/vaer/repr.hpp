#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vaer/corpus.hpp"
#include "vaer/ir.hpp"
#include "vaer/nn.hpp"

namespace vaer::repr {

using nn::Matrix;
using nn::Vector;

/// Diagonal Gaussian for one attribute value.
struct Gaussian {
  Vector mu;
  Vector sigma;
};

/// One (mu, sigma) pair per attribute, stored as m x k matrices.
struct GaussianRepr {
  Matrix mu;
  Matrix sigma;

  Eigen::Index arity() const { return mu.rows(); }
  Eigen::Index latent_dim() const { return mu.cols(); }
  Gaussian attribute(Eigen::Index i) const { return {mu.row(i).transpose(), sigma.row(i).transpose()}; }
  bool operator==(const GaussianRepr& o) const { return mu == o.mu && sigma == o.sigma; }
};

/// Inference network: IR -> (mu, log-variance), one shared trunk.
struct Encoder {
  nn::DenseLayer trunk;        // d -> h, relu
  nn::DenseLayer mu_head;      // h -> k
  nn::DenseLayer logvar_head;  // h -> k

  Eigen::Index input_dim() const { return trunk.in_dim(); }
  Eigen::Index latent_dim() const { return mu_head.out_dim(); }

  Encoder zeros_like() const;
  void append_params(nn::ParamViews& out);
};

struct EncoderOutput {
  Matrix mu;      // rows x k
  Matrix logvar;  // rows x k
  Matrix sigma;   // exp(0.5 * logvar)
};

struct EncoderCache {
  nn::DenseCache trunk;
  nn::DenseCache mu;
  nn::DenseCache logvar;
  Matrix sigma;
};

/// Encodes a batch of IRs, one per row.
EncoderOutput encoder_forward(const Encoder& encoder, const Matrix& irs, EncoderCache* cache = nullptr);
/// Accumulates parameter gradients given dL/dmu and dL/dsigma for every row.
void encoder_backward(const Encoder& encoder, const EncoderCache& cache, const Matrix& grad_mu,
                      const Matrix& grad_sigma, Encoder& grads, const Matrix* grad_logvar = nullptr);

struct VaeDims {
  Eigen::Index input = 300;
  Eigen::Index hidden = 200;
  Eigen::Index latent = 100;
};

/// Encoder plus mirrored decoder (k -> h relu -> d).
struct VaeModel {
  static constexpr std::uint32_t kFormatVersion = 1;

  Encoder encoder;
  nn::DenseLayer decoder_hidden;  // k -> h, relu
  nn::DenseLayer decoder_out;     // h -> d
  /// Number of attributes of the tables the model was trained on.
  std::uint64_t arity = 0;

  static VaeModel init(const VaeDims& dims, std::uint64_t arity, nn::Rng& rng);

  VaeDims dims() const { return {encoder.trunk.in_dim(), encoder.trunk.out_dim(), encoder.latent_dim()}; }
  VaeModel zeros_like() const;
  nn::ParamViews params();
  bool finite() const;
};

/// sigma = exp(0.5 * logvar), strictly positive. Throws DimensionError on a d mismatch.
Gaussian encode(const VaeModel& vae, const Vector& ir);
Gaussian encode(const Encoder& encoder, const Vector& ir);

/// z = mu + sigma * noise.
Vector reparameterize(const Vector& mu, const Vector& sigma, const Vector& noise);

/// KL(N(mu, diag sigma^2) || N(0, I)) = 0.5 * sum(sigma^2 + mu^2 - 1 - ln sigma^2).
double kl_to_standard_normal(const Vector& mu, const Vector& sigma);

struct VaeLoss {
  double total = 0.0;
  double reconstruction = 0.0;
  double kl = 0.0;
};

/// Negative ELBO summed over the rows of `irs` (every attribute of every
/// record in the batch): squared reconstruction error plus KL to N(0, I).
/// `noise` holds one standard-normal draw per row (rows x k). When `grads`
/// is given the exact parameter gradients are accumulated into it.
VaeLoss vae_loss(const VaeModel& vae, const Matrix& irs, const Matrix& noise, VaeModel* grads = nullptr);

struct VaeTrainConfig {
  VaeDims dims;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;  // records per step
  std::uint64_t seed = 7;
  nn::AdamConfig adam;
  /// Stop once the epoch loss improves by less than this fraction ...
  double early_stop_tolerance = 1e-3;
  /// ... for this many consecutive epochs.
  std::size_t early_stop_patience = 3;
};

struct VaeTrainResult {
  VaeModel model;
  std::vector<double> epoch_losses;  // mean loss per record
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// Trains on every record (each an m x d IR matrix). Deterministic given the
/// seed. Throws TrainingError on non-finite loss.
VaeTrainResult train_vae(const std::vector<Matrix>& records, const VaeTrainConfig& config,
                         const EpochCallback& on_epoch = {});

/// Encodes every attribute of one record. Throws DimensionError when the
/// record arity differs from the model's (align the table first).
GaussianRepr represent_record(const VaeModel& vae, const Matrix& record_irs);
GaussianRepr represent_record(const Encoder& encoder, std::uint64_t arity, const Matrix& record_irs);

/// IR matrices for every record of a table, in table order.
std::vector<Matrix> table_irs(const Table& table, const ir::Provider& provider);
std::vector<GaussianRepr> represent_table(const VaeModel& vae, const std::vector<Matrix>& irs);

void save_model(const VaeModel& vae, const std::string& path);
VaeModel load_model(const std::string& path);
/// Also checks the IR dimension, naming expected and actual on mismatch.
VaeModel load_model(const std::string& path, Eigen::Index expected_input_dim);

}  // namespace vaer::repr
