#include "invparse/transformer.hpp"

#include <cmath>

namespace invparse::nn {

namespace {

template <typename Scalar>
void add_norm(std::vector<std::pair<std::string, Matrix<Scalar>*>>& out, const std::string& prefix,
              LayerNormParams<Scalar>& p) {
  out.emplace_back(prefix + ".gain", &p.gain);
  out.emplace_back(prefix + ".bias", &p.bias);
}

template <typename Scalar>
void add_attention(std::vector<std::pair<std::string, Matrix<Scalar>*>>& out, const std::string& prefix,
                   AttentionParams<Scalar>& p) {
  out.emplace_back(prefix + ".wq", &p.wq);
  out.emplace_back(prefix + ".bq", &p.bq);
  out.emplace_back(prefix + ".wk", &p.wk);
  out.emplace_back(prefix + ".bk", &p.bk);
  out.emplace_back(prefix + ".wv", &p.wv);
  out.emplace_back(prefix + ".bv", &p.bv);
  out.emplace_back(prefix + ".wo", &p.wo);
  out.emplace_back(prefix + ".bo", &p.bo);
}

template <typename Scalar>
void add_ffn(std::vector<std::pair<std::string, Matrix<Scalar>*>>& out, const std::string& prefix,
             FeedForwardParams<Scalar>& p) {
  out.emplace_back(prefix + ".w1", &p.w1);
  out.emplace_back(prefix + ".b1", &p.b1);
  out.emplace_back(prefix + ".w2", &p.w2);
  out.emplace_back(prefix + ".b2", &p.b2);
}

template <typename Scalar>
Matrix<Scalar> gaussian(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  Matrix<Scalar> m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = static_cast<Scalar>(rng.normal() * stddev);
  return m;
}

template <typename Scalar>
LayerNormParams<Scalar> init_norm(Eigen::Index d) {
  return {Matrix<Scalar>::Ones(1, d), Matrix<Scalar>::Zero(1, d)};
}

template <typename Scalar>
AttentionParams<Scalar> init_attention(Eigen::Index d, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  AttentionParams<Scalar> p;
  p.wq = gaussian<Scalar>(d, d, s, rng);
  p.wk = gaussian<Scalar>(d, d, s, rng);
  p.wv = gaussian<Scalar>(d, d, s, rng);
  p.wo = gaussian<Scalar>(d, d, s, rng);
  p.bq = p.bk = p.bv = p.bo = Matrix<Scalar>::Zero(1, d);
  return p;
}

template <typename Scalar>
FeedForwardParams<Scalar> init_ffn(Eigen::Index d, Eigen::Index f, Rng& rng) {
  FeedForwardParams<Scalar> p;
  p.w1 = gaussian<Scalar>(d, f, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  p.b1 = Matrix<Scalar>::Zero(1, f);
  p.w2 = gaussian<Scalar>(f, d, 1.0 / std::sqrt(static_cast<double>(f)), rng);
  p.b2 = Matrix<Scalar>::Zero(1, d);
  return p;
}

template <typename Scalar>
Matrix<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng* rng) {
  if (rng == nullptr || rate <= 0.0) return {};
  const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - rate));
  Matrix<Scalar> m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng->uniform() < rate ? Scalar(0) : keep_scale;
  return m;
}

template <typename Scalar>
void apply_mask(Matrix<Scalar>& x, const Matrix<Scalar>& mask) {
  if (mask.size() != 0) x.array() *= mask.array();
}

template <typename Scalar>
struct EncoderLayerCache {
  LayerNormCache<Scalar> norm1, norm2;
  AttentionCache<Scalar> attn;
  FeedForwardCache<Scalar> ffn;
  Matrix<Scalar> drop1, drop2;
};

template <typename Scalar>
struct DecoderLayerCache {
  LayerNormCache<Scalar> norm1, norm2, norm3;
  AttentionCache<Scalar> self_attn, cross_attn;
  FeedForwardCache<Scalar> ffn;
  Matrix<Scalar> drop1, drop2, drop3;
};

template <typename Scalar>
struct ForwardCache {
  Matrix<Scalar> enc_drop;
  std::vector<EncoderLayerCache<Scalar>> enc;
  LayerNormCache<Scalar> enc_norm;
  Matrix<Scalar> memory;
  Matrix<Scalar> dec_drop;
  std::vector<DecoderLayerCache<Scalar>> dec;
  LayerNormCache<Scalar> dec_norm;
  Matrix<Scalar> dec_out;
};

template <typename Scalar>
Matrix<Scalar> embed_tokens(const TransformerParams<Scalar>& params, const Matrix<Scalar>& positions,
                            const std::vector<int>& ids, const std::vector<int>& tags = {}) {
  const Eigen::Index d = params.embed.cols();
  const Scalar scale = std::sqrt(static_cast<Scalar>(d));
  Matrix<Scalar> x(static_cast<Eigen::Index>(ids.size()), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x.row(r) = params.embed.row(ids[i]) * scale + positions.row(r);
    if (!tags.empty() && tags[i] >= 0) x.row(r) += params.embed.row(tags[i]) * scale;
  }
  return x;
}

template <typename Scalar>
void embed_backward(const Matrix<Scalar>& dx, const std::vector<int>& ids, Matrix<Scalar>& dembed,
                    const std::vector<int>& tags = {}) {
  const Scalar scale = std::sqrt(static_cast<Scalar>(dx.cols()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    dembed.row(ids[i]) += dx.row(static_cast<Eigen::Index>(i)) * scale;
    if (!tags.empty() && tags[i] >= 0) dembed.row(tags[i]) += dx.row(static_cast<Eigen::Index>(i)) * scale;
  }
}

template <typename Scalar>
Matrix<Scalar> encoder_forward(const TransformerParams<Scalar>& params, const TransformerShape& shape,
                               const Matrix<Scalar>& positions, double rate, Rng* rng,
                               const std::vector<int>& source, const std::vector<int>& tags,
                               ForwardCache<Scalar>& c) {
  Matrix<Scalar> x = embed_tokens(params, positions, source, tags);
  c.enc_drop = dropout_mask<Scalar>(x.rows(), x.cols(), rate, rng);
  apply_mask(x, c.enc_drop);
  c.enc.resize(params.encoder.size());
  for (std::size_t l = 0; l < params.encoder.size(); ++l) {
    const auto& p = params.encoder[l];
    auto& lc = c.enc[l];
    Matrix<Scalar> a = layer_norm_forward(x, p.norm1.gain, p.norm1.bias, lc.norm1);
    Matrix<Scalar> att = attention_forward(a, a, p.self_attn, shape.heads, false, lc.attn);
    lc.drop1 = dropout_mask<Scalar>(att.rows(), att.cols(), rate, rng);
    apply_mask(att, lc.drop1);
    x += att;
    Matrix<Scalar> b = layer_norm_forward(x, p.norm2.gain, p.norm2.bias, lc.norm2);
    Matrix<Scalar> ff = feed_forward_forward(b, p.ffn, lc.ffn);
    lc.drop2 = dropout_mask<Scalar>(ff.rows(), ff.cols(), rate, rng);
    apply_mask(ff, lc.drop2);
    x += ff;
  }
  c.memory = layer_norm_forward(x, params.encoder_norm.gain, params.encoder_norm.bias, c.enc_norm);
  return c.memory;
}

template <typename Scalar>
Matrix<Scalar> decoder_forward(const TransformerParams<Scalar>& params, const TransformerShape& shape,
                               const Matrix<Scalar>& positions, double rate, Rng* rng,
                               const Matrix<Scalar>& memory, const std::vector<int>& input,
                               ForwardCache<Scalar>& c) {
  Matrix<Scalar> y = embed_tokens(params, positions, input);
  c.dec_drop = dropout_mask<Scalar>(y.rows(), y.cols(), rate, rng);
  apply_mask(y, c.dec_drop);
  c.dec.resize(params.decoder.size());
  for (std::size_t l = 0; l < params.decoder.size(); ++l) {
    const auto& p = params.decoder[l];
    auto& lc = c.dec[l];
    Matrix<Scalar> a = layer_norm_forward(y, p.norm1.gain, p.norm1.bias, lc.norm1);
    Matrix<Scalar> self = attention_forward(a, a, p.self_attn, shape.heads, true, lc.self_attn);
    lc.drop1 = dropout_mask<Scalar>(self.rows(), self.cols(), rate, rng);
    apply_mask(self, lc.drop1);
    y += self;
    Matrix<Scalar> b = layer_norm_forward(y, p.norm2.gain, p.norm2.bias, lc.norm2);
    Matrix<Scalar> cross = attention_forward(b, memory, p.cross_attn, shape.heads, false, lc.cross_attn);
    lc.drop2 = dropout_mask<Scalar>(cross.rows(), cross.cols(), rate, rng);
    apply_mask(cross, lc.drop2);
    y += cross;
    Matrix<Scalar> e = layer_norm_forward(y, p.norm3.gain, p.norm3.bias, lc.norm3);
    Matrix<Scalar> ff = feed_forward_forward(e, p.ffn, lc.ffn);
    lc.drop3 = dropout_mask<Scalar>(ff.rows(), ff.cols(), rate, rng);
    apply_mask(ff, lc.drop3);
    y += ff;
  }
  c.dec_out = layer_norm_forward(y, params.decoder_norm.gain, params.decoder_norm.bias, c.dec_norm);
  return c.dec_out * params.embed.transpose();
}

}  // namespace

template <typename Scalar>
std::vector<std::pair<std::string, Matrix<Scalar>*>> TransformerParams<Scalar>::tensors() {
  std::vector<std::pair<std::string, Matrix<Scalar>*>> out;
  out.emplace_back("embed", &embed);
  for (std::size_t l = 0; l < encoder.size(); ++l) {
    const std::string prefix = "encoder." + std::to_string(l);
    add_norm(out, prefix + ".norm1", encoder[l].norm1);
    add_attention(out, prefix + ".self_attn", encoder[l].self_attn);
    add_norm(out, prefix + ".norm2", encoder[l].norm2);
    add_ffn(out, prefix + ".ffn", encoder[l].ffn);
  }
  add_norm(out, "encoder.norm", encoder_norm);
  for (std::size_t l = 0; l < decoder.size(); ++l) {
    const std::string prefix = "decoder." + std::to_string(l);
    add_norm(out, prefix + ".norm1", decoder[l].norm1);
    add_attention(out, prefix + ".self_attn", decoder[l].self_attn);
    add_norm(out, prefix + ".norm2", decoder[l].norm2);
    add_attention(out, prefix + ".cross_attn", decoder[l].cross_attn);
    add_norm(out, prefix + ".norm3", decoder[l].norm3);
    add_ffn(out, prefix + ".ffn", decoder[l].ffn);
  }
  add_norm(out, "decoder.norm", decoder_norm);
  return out;
}

template <typename Scalar>
std::vector<std::pair<std::string, const Matrix<Scalar>*>> TransformerParams<Scalar>::tensors() const {
  auto mutable_view = const_cast<TransformerParams*>(this)->tensors();
  std::vector<std::pair<std::string, const Matrix<Scalar>*>> out;
  out.reserve(mutable_view.size());
  for (auto& [name, ptr] : mutable_view) out.emplace_back(std::move(name), ptr);
  return out;
}

template <typename Scalar>
TransformerParams<Scalar> TransformerParams<Scalar>::zeros_like() const {
  TransformerParams out = *this;
  out.set_zero();
  return out;
}

template <typename Scalar>
void TransformerParams<Scalar>::set_zero() {
  for (auto& [_, m] : tensors()) m->setZero();
}

template <typename Scalar>
Eigen::Index TransformerParams<Scalar>::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& [_, m] : tensors()) n += m->size();
  return n;
}

template <typename Scalar>
TransformerParams<Scalar> init_transformer(const TransformerShape& shape, Eigen::Index vocab_size, Rng& rng) {
  const Eigen::Index d = shape.model_dim;
  TransformerParams<Scalar> p;
  p.embed = gaussian<Scalar>(vocab_size, d, 1.0 / std::sqrt(static_cast<double>(d)), rng);
  for (int l = 0; l < shape.layers; ++l) {
    EncoderLayerParams<Scalar> e;
    e.norm1 = init_norm<Scalar>(d);
    e.self_attn = init_attention<Scalar>(d, rng);
    e.norm2 = init_norm<Scalar>(d);
    e.ffn = init_ffn<Scalar>(d, shape.ffn_dim, rng);
    p.encoder.push_back(std::move(e));
  }
  p.encoder_norm = init_norm<Scalar>(d);
  for (int l = 0; l < shape.layers; ++l) {
    DecoderLayerParams<Scalar> e;
    e.norm1 = init_norm<Scalar>(d);
    e.self_attn = init_attention<Scalar>(d, rng);
    e.norm2 = init_norm<Scalar>(d);
    e.cross_attn = init_attention<Scalar>(d, rng);
    e.norm3 = init_norm<Scalar>(d);
    e.ffn = init_ffn<Scalar>(d, shape.ffn_dim, rng);
    p.decoder.push_back(std::move(e));
  }
  p.decoder_norm = init_norm<Scalar>(d);
  return p;
}

template <typename Scalar>
Transformer<Scalar>::Transformer(TransformerShape shape, double dropout)
    : shape_(shape), dropout_(dropout), positions_(sinusoidal_positions<Scalar>(shape.max_positions, shape.model_dim)) {}

template <typename Scalar>
Matrix<Scalar> Transformer<Scalar>::encode(const TransformerParams<Scalar>& params,
                                           const std::vector<int>& source,
                                           const std::vector<int>& source_tags) const {
  ForwardCache<Scalar> cache;
  return encoder_forward(params, shape_, positions_, 0.0, nullptr, source, source_tags, cache);
}

template <typename Scalar>
Matrix<Scalar> Transformer<Scalar>::decode_logits(const TransformerParams<Scalar>& params,
                                                  const Matrix<Scalar>& memory,
                                                  const std::vector<int>& decoder_input) const {
  ForwardCache<Scalar> cache;
  return decoder_forward(params, shape_, positions_, 0.0, nullptr, memory, decoder_input, cache);
}

template <typename Scalar>
Scalar Transformer<Scalar>::loss(const TransformerParams<Scalar>& params, const std::vector<int>& source,
                                 const std::vector<int>& source_tags, const std::vector<int>& decoder_input, const std::vector<int>& targets,
                                 Scalar scale, TransformerParams<Scalar>* grads, Rng* dropout_rng) const {
  ForwardCache<Scalar> c;
  const double rate = dropout_rng != nullptr ? dropout_ : 0.0;
  const Matrix<Scalar> memory = encoder_forward(params, shape_, positions_, rate, dropout_rng, source, source_tags, c);
  const Matrix<Scalar> logits =
      decoder_forward(params, shape_, positions_, rate, dropout_rng, memory, decoder_input, c);
  if (grads == nullptr) return softmax_cross_entropy<Scalar>(logits, targets, scale, nullptr);

  Matrix<Scalar> dlogits;
  const Scalar total = softmax_cross_entropy<Scalar>(logits, targets, scale, &dlogits);
  TransformerParams<Scalar>& g = *grads;

  // Output projection (tied to the embedding table).
  g.embed.noalias() += dlogits.transpose() * c.dec_out;
  Matrix<Scalar> dy = dlogits * params.embed;
  dy = layer_norm_backward(dy, params.decoder_norm.gain, c.dec_norm, g.decoder_norm.gain, g.decoder_norm.bias);

  Matrix<Scalar> dmemory = Matrix<Scalar>::Zero(memory.rows(), memory.cols());
  for (std::size_t li = params.decoder.size(); li-- > 0;) {
    const auto& p = params.decoder[li];
    auto& gp = g.decoder[li];
    const auto& lc = c.dec[li];

    Matrix<Scalar> dff = dy;
    apply_mask(dff, lc.drop3);
    Matrix<Scalar> de = feed_forward_backward(dff, p.ffn, lc.ffn, gp.ffn);
    dy += layer_norm_backward(de, p.norm3.gain, lc.norm3, gp.norm3.gain, gp.norm3.bias);

    Matrix<Scalar> dcross = dy;
    apply_mask(dcross, lc.drop2);
    Matrix<Scalar> db, dmem;
    attention_backward(dcross, p.cross_attn, shape_.heads, lc.cross_attn, gp.cross_attn, db, dmem);
    dmemory += dmem;
    dy += layer_norm_backward(db, p.norm2.gain, lc.norm2, gp.norm2.gain, gp.norm2.bias);

    Matrix<Scalar> dself = dy;
    apply_mask(dself, lc.drop1);
    Matrix<Scalar> dq, dkv;
    attention_backward(dself, p.self_attn, shape_.heads, lc.self_attn, gp.self_attn, dq, dkv);
    dq += dkv;
    dy += layer_norm_backward(dq, p.norm1.gain, lc.norm1, gp.norm1.gain, gp.norm1.bias);
  }
  apply_mask(dy, c.dec_drop);
  embed_backward(dy, decoder_input, g.embed);

  Matrix<Scalar> dx =
      layer_norm_backward(dmemory, params.encoder_norm.gain, c.enc_norm, g.encoder_norm.gain, g.encoder_norm.bias);
  for (std::size_t li = params.encoder.size(); li-- > 0;) {
    const auto& p = params.encoder[li];
    auto& gp = g.encoder[li];
    const auto& lc = c.enc[li];

    Matrix<Scalar> dff = dx;
    apply_mask(dff, lc.drop2);
    Matrix<Scalar> dbn = feed_forward_backward(dff, p.ffn, lc.ffn, gp.ffn);
    dx += layer_norm_backward(dbn, p.norm2.gain, lc.norm2, gp.norm2.gain, gp.norm2.bias);

    Matrix<Scalar> datt = dx;
    apply_mask(datt, lc.drop1);
    Matrix<Scalar> dq, dkv;
    attention_backward(datt, p.self_attn, shape_.heads, lc.attn, gp.self_attn, dq, dkv);
    dq += dkv;
    dx += layer_norm_backward(dq, p.norm1.gain, lc.norm1, gp.norm1.gain, gp.norm1.bias);
  }
  apply_mask(dx, c.enc_drop);
  embed_backward(dx, source, g.embed, source_tags);
  return total;
}

template struct TransformerParams<double>;
template class Transformer<double>;
template TransformerParams<double> init_transformer<double>(const TransformerShape&, Eigen::Index, Rng&);

}  // namespace invparse::nn
