// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "grassnet/init.hpp"
#include "grassnet/tensor.hpp"

namespace grassnet {

/// Shared embedding table for all categorical fields plus the projection
/// from the concatenated field embeddings to the fused feature width.
struct EmbeddingTable {
  std::size_t vocab_size = 0;
  std::size_t dim = 16;
  std::size_t fields = 0;
  Tensor table;   // [vocab x dim]
  Tensor w_proj;  // [fields*dim x d]
  Tensor b_proj;  // [d]

  static EmbeddingTable init(std::size_t vocab, std::size_t dim, std::size_t fields, std::size_t d, Rng& rng) {
    EmbeddingTable t;
    t.vocab_size = vocab;
    t.dim = dim;
    t.fields = fields;
    t.table = normal_init({vocab, dim}, 0.01, rng);
    t.w_proj = glorot(std::max<std::size_t>(fields * dim, 1), d, rng);
    t.b_proj = zeros_param({d});
    return t;
  }

  std::size_t output_dim() const { return b_proj.numel(); }

  void collect(const std::string& prefix, ParamList& out) const {
    out.insert(out.end(), {{prefix + "table", table}, {prefix + "w_proj", w_proj}, {prefix + "b_proj", b_proj}});
  }
};

/// Looks up every field's token, concatenates in field order and projects.
/// tokens is row-major [B x fields]; returns [B x d].
inline Tensor embed_text_batch(std::span<const std::size_t> tokens, std::size_t batch, const EmbeddingTable& t) {
  if (tokens.size() != batch * t.fields) {
    throw ShapeError("embed_text: expected " + std::to_string(batch * t.fields) + " tokens, got " + std::to_string(tokens.size()));
  }
  const std::size_t d = t.output_dim();
  if (t.fields == 0) return add_broadcast(Tensor::zeros({batch, d}), t.b_proj);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= t.vocab_size) {
      throw DomainError("embed_text: token id " + std::to_string(tokens[i]) + " in field " + std::to_string(i % t.fields) +
                        " is outside the vocabulary of " + std::to_string(t.vocab_size));
    }
  }
  const Tensor looked = gather_rows(t.table, std::vector<std::size_t>(tokens.begin(), tokens.end()));
  const Tensor flat = reshape(looked, {batch, t.fields * t.dim});
  return add_broadcast(matmul(flat, t.w_proj), t.b_proj);
}

/// Single-sample form; returns [d].
inline Tensor embed_text(std::span<const std::size_t> tokens, const EmbeddingTable& t) {
  return reshape(embed_text_batch(tokens, 1, t), {t.output_dim()});
}

struct FusedFeature {
  Tensor z_att;    // [d] or [B x d]
  Tensor weights;  // [M] or [B x M]
};

/// Attention of the text query over the M sensor feature tokens:
/// w = softmax(z_embd . tokens^T / sqrt(d)), z_att = w . tokens.
/// z_embd [d] with tokens [M x d], or z_embd [B x d] with tokens [B x M x d].
inline FusedFeature attention_fuse(const Tensor& z_embd, const Tensor& tokens) {
  const bool batched = tokens.rank() == 3;
  if (!((batched && z_embd.rank() == 2) || (!batched && tokens.rank() == 2 && z_embd.rank() == 1))) {
    throw ShapeError("attention_fuse: query " + shape_str(z_embd.shape()) + " vs tokens " + shape_str(tokens.shape()));
  }
  const std::size_t d = tokens.shape().back();
  const std::size_t m = tokens.dim(tokens.rank() - 2);
  const std::size_t batch = batched ? tokens.dim(0) : 1;
  if (z_embd.shape().back() != d || (batched && z_embd.dim(0) != batch)) {
    throw ShapeError("attention_fuse: query " + shape_str(z_embd.shape()) + " vs tokens " + shape_str(tokens.shape()));
  }
  if (m == 0) throw ShapeError("attention_fuse needs at least one token");
  const Tensor q = reshape(z_embd, {batch, 1, d});
  const Tensor kv = reshape(tokens, {batch, m, d});
  const Tensor w = softmax_last(scale(bmm(q, kv, false, true), 1.0 / std::sqrt(static_cast<double>(d))));
  const Tensor z = bmm(w, kv);
  if (batched) return {reshape(z, {batch, d}), reshape(w, {batch, m})};
  return {reshape(z, {d}), reshape(w, {m})};
}

}  // namespace grassnet
