#pragma once

#include "binary_io.hpp"
#include "vaer/error.hpp"
#include "vaer/nn.hpp"
#include "vaer/repr.hpp"

namespace vaer::io {

inline void write_layer(BinaryWriter& w, const nn::DenseLayer& layer) {
  w.u32(static_cast<std::uint32_t>(layer.activation));
  w.matrix(layer.weights);
  w.vector(layer.bias);
}

inline nn::DenseLayer read_layer(BinaryReader& r) {
  nn::DenseLayer layer;
  const auto act = r.u32();
  if (act > 3) throw FormatError("unknown activation code " + std::to_string(act));
  layer.activation = static_cast<nn::Activation>(act);
  layer.weights = r.matrix();
  layer.bias = r.vector();
  if (layer.bias.size() != layer.weights.rows()) throw FormatError("layer bias does not match weights");
  return layer;
}

inline void write_encoder(BinaryWriter& w, const repr::Encoder& e) {
  write_layer(w, e.trunk);
  write_layer(w, e.mu_head);
  write_layer(w, e.logvar_head);
}

inline repr::Encoder read_encoder(BinaryReader& r) {
  repr::Encoder e;
  e.trunk = read_layer(r);
  e.mu_head = read_layer(r);
  e.logvar_head = read_layer(r);
  if (e.mu_head.in_dim() != e.trunk.out_dim() || e.logvar_head.in_dim() != e.trunk.out_dim() ||
      e.logvar_head.out_dim() != e.mu_head.out_dim()) {
    throw FormatError("encoder layer shapes are inconsistent");
  }
  return e;
}

}  // namespace vaer::io
