#include "vaer/repr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "model_io.hpp"
#include "vaer/error.hpp"

namespace vaer::repr {

Encoder Encoder::zeros_like() const {
  return {nn::DenseLayer::zeros_like(trunk), nn::DenseLayer::zeros_like(mu_head),
          nn::DenseLayer::zeros_like(logvar_head)};
}

void Encoder::append_params(nn::ParamViews& out) {
  nn::append_params(trunk, out);
  nn::append_params(mu_head, out);
  nn::append_params(logvar_head, out);
}

EncoderOutput encoder_forward(const Encoder& encoder, const Matrix& irs, EncoderCache* cache) {
  if (irs.cols() != encoder.input_dim()) {
    throw DimensionError("encoder expects IR dimension " + std::to_string(encoder.input_dim()) + ", got " +
                         std::to_string(irs.cols()));
  }
  EncoderOutput out;
  Matrix hidden = nn::dense_forward(encoder.trunk, irs, cache ? &cache->trunk : nullptr);
  out.mu = nn::dense_forward(encoder.mu_head, hidden, cache ? &cache->mu : nullptr);
  out.logvar = nn::dense_forward(encoder.logvar_head, hidden, cache ? &cache->logvar : nullptr);
  out.sigma = (0.5 * out.logvar.array()).exp().matrix();
  if (cache) cache->sigma = out.sigma;
  return out;
}

void encoder_backward(const Encoder& encoder, const EncoderCache& cache, const Matrix& grad_mu,
                      const Matrix& grad_sigma, Encoder& grads, const Matrix* grad_logvar) {
  // dsigma/dlogvar = 0.5 * sigma
  Matrix g_logvar = 0.5 * grad_sigma.cwiseProduct(cache.sigma);
  if (grad_logvar) g_logvar += *grad_logvar;
  Matrix g_hidden = nn::dense_backward(encoder.mu_head, cache.mu, grad_mu, grads.mu_head);
  g_hidden += nn::dense_backward(encoder.logvar_head, cache.logvar, g_logvar, grads.logvar_head);
  nn::dense_backward(encoder.trunk, cache.trunk, g_hidden, grads.trunk, /*input_grad=*/false);
}

VaeModel VaeModel::init(const VaeDims& dims, std::uint64_t arity, nn::Rng& rng) {
  if (dims.input < 1 || dims.hidden < 1 || dims.latent < 1) throw DimensionError("VAE dimensions must be positive");
  VaeModel m;
  m.encoder.trunk = nn::DenseLayer::glorot(dims.input, dims.hidden, nn::Activation::relu, rng);
  m.encoder.mu_head = nn::DenseLayer::glorot(dims.hidden, dims.latent, nn::Activation::identity, rng);
  m.encoder.logvar_head = nn::DenseLayer::glorot(dims.hidden, dims.latent, nn::Activation::identity, rng);
  m.decoder_hidden = nn::DenseLayer::glorot(dims.latent, dims.hidden, nn::Activation::relu, rng);
  m.decoder_out = nn::DenseLayer::glorot(dims.hidden, dims.input, nn::Activation::identity, rng);
  m.arity = arity;
  return m;
}

VaeModel VaeModel::zeros_like() const {
  VaeModel g;
  g.encoder = encoder.zeros_like();
  g.decoder_hidden = nn::DenseLayer::zeros_like(decoder_hidden);
  g.decoder_out = nn::DenseLayer::zeros_like(decoder_out);
  g.arity = arity;
  return g;
}

nn::ParamViews VaeModel::params() {
  nn::ParamViews views;
  encoder.append_params(views);
  nn::append_params(decoder_hidden, views);
  nn::append_params(decoder_out, views);
  return views;
}

bool VaeModel::finite() const {
  return nn::all_finite(encoder.trunk) && nn::all_finite(encoder.mu_head) && nn::all_finite(encoder.logvar_head) &&
         nn::all_finite(decoder_hidden) && nn::all_finite(decoder_out);
}

Gaussian encode(const Encoder& encoder, const Vector& ir) {
  if (ir.size() != encoder.input_dim()) {
    throw DimensionError("IR has dimension " + std::to_string(ir.size()) + ", encoder expects " +
                         std::to_string(encoder.input_dim()));
  }
  Matrix row = ir.transpose();
  EncoderOutput out = encoder_forward(encoder, row);
  return {out.mu.row(0).transpose(), out.sigma.row(0).transpose()};
}

Gaussian encode(const VaeModel& vae, const Vector& ir) { return encode(vae.encoder, ir); }

Vector reparameterize(const Vector& mu, const Vector& sigma, const Vector& noise) {
  if (mu.size() != sigma.size() || mu.size() != noise.size()) throw DimensionError("reparameterize: shape mismatch");
  return mu + sigma.cwiseProduct(noise);
}

double kl_to_standard_normal(const Vector& mu, const Vector& sigma) {
  if (mu.size() != sigma.size()) throw DimensionError("kl: shape mismatch");
  const auto var = sigma.array().square();
  return 0.5 * (var + mu.array().square() - 1.0 - var.log()).sum();
}

VaeLoss vae_loss(const VaeModel& vae, const Matrix& irs, const Matrix& noise, VaeModel* grads) {
  if (noise.rows() != irs.rows() || noise.cols() != vae.encoder.latent_dim()) {
    throw DimensionError("vae_loss: noise must be rows x latent_dim");
  }
  EncoderCache enc_cache;
  const EncoderOutput enc = encoder_forward(vae.encoder, irs, grads ? &enc_cache : nullptr);
  const Matrix z = enc.mu + enc.sigma.cwiseProduct(noise);

  nn::DenseCache hidden_cache, out_cache;
  const Matrix hidden = nn::dense_forward(vae.decoder_hidden, z, grads ? &hidden_cache : nullptr);
  const Matrix recon = nn::dense_forward(vae.decoder_out, hidden, grads ? &out_cache : nullptr);
  const Matrix diff = recon - irs;

  VaeLoss loss;
  loss.reconstruction = diff.squaredNorm();
  loss.kl = 0.5 * (enc.logvar.array().exp() + enc.mu.array().square() - 1.0 - enc.logvar.array()).sum();
  loss.total = loss.reconstruction + loss.kl;

  if (grads) {
    const Matrix g_recon = 2.0 * diff;
    const Matrix g_hidden = nn::dense_backward(vae.decoder_out, out_cache, g_recon, grads->decoder_out);
    const Matrix g_z = nn::dense_backward(vae.decoder_hidden, hidden_cache, g_hidden, grads->decoder_hidden);
    const Matrix g_mu = g_z + enc.mu;
    const Matrix g_sigma = g_z.cwiseProduct(noise);
    const Matrix g_logvar_kl = 0.5 * (enc.logvar.array().exp() - 1.0).matrix();
    encoder_backward(vae.encoder, enc_cache, g_mu, g_sigma, grads->encoder, &g_logvar_kl);
  }
  return loss;
}

namespace {

void scale_grads(nn::ParamViews& views, double factor) {
  for (auto& v : views)
    for (double& x : v) x *= factor;
}

}  // namespace

VaeTrainResult train_vae(const std::vector<Matrix>& records, const VaeTrainConfig& config,
                         const EpochCallback& on_epoch) {
  if (records.empty()) throw TrainingError("train_vae: no records");
  if (config.batch_size == 0 || config.epochs == 0) throw TrainingError("train_vae: epochs and batch size must be positive");
  const Eigen::Index arity = records.front().rows();
  for (const Matrix& r : records) {
    if (r.rows() != arity || r.cols() != config.dims.input) {
      throw DimensionError("train_vae: every record must be " + std::to_string(arity) + " x " +
                           std::to_string(config.dims.input));
    }
  }

  nn::Rng rng(config.seed);
  VaeTrainResult result;
  result.model = VaeModel::init(config.dims, static_cast<std::uint64_t>(arity), rng);
  VaeModel& model = result.model;
  VaeModel grads = model.zeros_like();
  nn::ParamViews param_views = model.params();
  nn::ParamViews grad_views = grads.params();
  nn::AdamState adam(config.adam);
  std::normal_distribution<double> normal;

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t stalled = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      Matrix batch(static_cast<Eigen::Index>(count) * arity, config.dims.input);
      for (std::size_t b = 0; b < count; ++b) {
        batch.middleRows(static_cast<Eigen::Index>(b) * arity, arity) = records[order[start + b]];
      }
      Matrix noise(batch.rows(), config.dims.latent);
      for (Eigen::Index r = 0; r < noise.rows(); ++r)
        for (Eigen::Index c = 0; c < noise.cols(); ++c) noise(r, c) = normal(rng);

      for (auto& v : grad_views) std::fill(v.begin(), v.end(), 0.0);
      const VaeLoss loss = vae_loss(model, batch, noise, &grads);
      if (!std::isfinite(loss.total)) {
        std::ostringstream msg;
        msg << "non-finite VAE loss at epoch " << epoch + 1 << ", batch starting at " << start
            << " (reconstruction " << loss.reconstruction << ", kl " << loss.kl << ")";
        throw TrainingError(msg.str());
      }
      scale_grads(grad_views, 1.0 / static_cast<double>(count));
      adam.step(param_views, grad_views);
      epoch_total += loss.total;
    }
    const double mean = epoch_total / static_cast<double>(records.size());
    if (!result.epoch_losses.empty()) {
      const double previous = result.epoch_losses.back();
      const double improvement = (previous - mean) / std::max(std::abs(previous), 1e-12);
      stalled = improvement < config.early_stop_tolerance ? stalled + 1 : 0;
    }
    result.epoch_losses.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
    if (config.early_stop_patience > 0 && stalled >= config.early_stop_patience) break;
  }
  if (!model.finite()) throw TrainingError("train_vae: parameters became non-finite");
  return result;
}

GaussianRepr represent_record(const Encoder& encoder, std::uint64_t arity, const Matrix& record_irs) {
  if (arity != 0 && static_cast<std::uint64_t>(record_irs.rows()) != arity) {
    throw DimensionError("record has " + std::to_string(record_irs.rows()) + " attributes but the model expects " +
                         std::to_string(arity) + "; align the table with align_arity first");
  }
  EncoderOutput out = encoder_forward(encoder, record_irs);
  return {std::move(out.mu), std::move(out.sigma)};
}

GaussianRepr represent_record(const VaeModel& vae, const Matrix& record_irs) {
  return represent_record(vae.encoder, vae.arity, record_irs);
}

std::vector<Matrix> table_irs(const Table& table, const ir::Provider& provider) {
  std::vector<Matrix> out;
  out.reserve(table.size());
  for (const Record& r : table.records()) out.push_back(ir::encode_record_irs(table, r, provider));
  return out;
}

std::vector<GaussianRepr> represent_table(const VaeModel& vae, const std::vector<Matrix>& irs) {
  std::vector<GaussianRepr> out;
  out.reserve(irs.size());
  for (const Matrix& m : irs) out.push_back(represent_record(vae, m));
  return out;
}

void save_model(const VaeModel& vae, const std::string& path) {
  io::BinaryWriter w(path);
  w.magic("VAERREPR");
  w.u32(VaeModel::kFormatVersion);
  w.u64(vae.arity);
  io::write_encoder(w, vae.encoder);
  io::write_layer(w, vae.decoder_hidden);
  io::write_layer(w, vae.decoder_out);
  w.close();
}

VaeModel load_model(const std::string& path) {
  io::BinaryReader r(path);
  r.expect_magic("VAERREPR");
  const auto version = r.u32();
  if (version != VaeModel::kFormatVersion) {
    throw FormatError(path + ": unsupported representation model version " + std::to_string(version) +
                      " (expected " + std::to_string(VaeModel::kFormatVersion) + ")");
  }
  VaeModel vae;
  vae.arity = r.u64();
  vae.encoder = io::read_encoder(r);
  vae.decoder_hidden = io::read_layer(r);
  vae.decoder_out = io::read_layer(r);
  if (vae.decoder_hidden.in_dim() != vae.encoder.latent_dim() || vae.decoder_out.out_dim() != vae.encoder.input_dim()) {
    throw FormatError(path + ": decoder shapes do not mirror the encoder");
  }
  return vae;
}

VaeModel load_model(const std::string& path, Eigen::Index expected_input_dim) {
  VaeModel vae = load_model(path);
  if (vae.encoder.input_dim() != expected_input_dim) {
    throw DimensionError(path + ": model expects IR dimension d=" + std::to_string(vae.encoder.input_dim()) +
                         ", inputs have d=" + std::to_string(expected_input_dim));
  }
  return vae;
}

}  // namespace vaer::repr
