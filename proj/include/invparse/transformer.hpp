#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "invparse/nn_ops.hpp"
#include "invparse/rng.hpp"

namespace invparse::nn {

struct TransformerShape {
  int layers = 2;
  int model_dim = 64;
  int heads = 4;
  int ffn_dim = 128;
  int max_positions = 512;
};

template <typename Scalar>
struct LayerNormParams {
  Matrix<Scalar> gain, bias;
};

template <typename Scalar>
struct EncoderLayerParams {
  LayerNormParams<Scalar> norm1;
  AttentionParams<Scalar> self_attn;
  LayerNormParams<Scalar> norm2;
  FeedForwardParams<Scalar> ffn;
};

template <typename Scalar>
struct DecoderLayerParams {
  LayerNormParams<Scalar> norm1;
  AttentionParams<Scalar> self_attn;
  LayerNormParams<Scalar> norm2;
  AttentionParams<Scalar> cross_attn;
  LayerNormParams<Scalar> norm3;
  FeedForwardParams<Scalar> ffn;
};

/// All trainable tensors. The embedding table is tied to the output
/// projection, so the vocabulary size appears in exactly one tensor.
template <typename Scalar>
struct TransformerParams {
  Matrix<Scalar> embed;  // vocab x d
  std::vector<EncoderLayerParams<Scalar>> encoder;
  LayerNormParams<Scalar> encoder_norm;
  std::vector<DecoderLayerParams<Scalar>> decoder;
  LayerNormParams<Scalar> decoder_norm;

  /// Named views over every tensor in a fixed order.
  std::vector<std::pair<std::string, Matrix<Scalar>*>> tensors();
  std::vector<std::pair<std::string, const Matrix<Scalar>*>> tensors() const;

  /// Same shapes, all zeros.
  TransformerParams zeros_like() const;
  void set_zero();
  Eigen::Index parameter_count() const;
};

template <typename Scalar>
TransformerParams<Scalar> init_transformer(const TransformerShape& shape, Eigen::Index vocab_size, Rng& rng);

/// Per-sample encoder-decoder computation.
template <typename Scalar>
class Transformer {
 public:
  Transformer(TransformerShape shape, double dropout);

  const TransformerShape& shape() const { return shape_; }

  /// Sum of token NLL of `targets` given `source` and teacher-forced
  /// `decoder_input`. With `grads`, accumulates scale * d(sum NLL)/dθ.
  /// With `dropout_rng` and a positive rate, dropout is active.
  /// `source_tags`, when non-empty, holds one extra embedding id per source
  /// position (negative for none) added to that position's input.
  Scalar loss(const TransformerParams<Scalar>& params, const std::vector<int>& source,
              const std::vector<int>& source_tags, const std::vector<int>& decoder_input, const std::vector<int>& targets, Scalar scale,
              TransformerParams<Scalar>* grads, Rng* dropout_rng) const;

  Matrix<Scalar> encode(const TransformerParams<Scalar>& params, const std::vector<int>& source,
                        const std::vector<int>& source_tags = {}) const;

  /// Logits (len x vocab) for every decoder position.
  Matrix<Scalar> decode_logits(const TransformerParams<Scalar>& params, const Matrix<Scalar>& memory,
                               const std::vector<int>& decoder_input) const;

 private:
  TransformerShape shape_;
  double dropout_;
  Matrix<Scalar> positions_;
};

extern template struct TransformerParams<double>;
extern template class Transformer<double>;

}  // namespace invparse::nn
