#include "hemera/model.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "hemera/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hemera {

namespace {

constexpr double kNormEps = 1e-5;
constexpr int kGradChunks = 8;

using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

[[noreturn]] void invalid_config(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double z) {
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  return 0.5 * (1.0 + std::erf(z * std::numbers::sqrt2 / 2.0)) + z * inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

void softmax_rows(Matrix& s) {
  for (Index r = 0; r < s.rows(); ++r) {
    auto row = s.row(r);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
}

double log_sum_exp(const RowVector& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

struct NormCache {
  Matrix xhat;
  Vector rstd;
};

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, NormCache& c) {
  const Vector mean = x.rowwise().mean();
  Matrix centered = x.colwise() - mean;
  const Vector var = centered.array().square().rowwise().sum() / static_cast<double>(x.cols());
  c.rstd = (var.array() + kNormEps).rsqrt();
  c.xhat = centered.array().colwise() * c.rstd.array();
  Matrix y = c.xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const NormCache& c, const Matrix& gain, Matrix* dgain,
                           Matrix* dbias) {
  if (dgain) {
    *dgain += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    *dbias += dy.colwise().sum();
  }
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  const Vector m1 = dxhat.rowwise().mean();
  const Vector m2 = (dxhat.array() * c.xhat.array()).rowwise().mean();
  Matrix dx = (dxhat.colwise() - m1).array() - c.xhat.array().colwise() * m2.array();
  dx.array().colwise() *= c.rstd.array();
  return dx;
}

struct AttentionCache {
  NormCache ln1;
  Matrix h, hk, hv, kp, vp, q, attn;
  std::vector<Matrix> probs;
};

struct FfnCache {
  NormCache ln2;
  Matrix h2, z, g;
};

struct LayerCache {
  AttentionCache attention;
  FfnCache ffn;
};

// Only the first `rows` positions produce outputs; keys and values always
// span the whole sequence. With rows == 1 this is the cls-only path used by
// the classifier's last layer.
Matrix attention_forward(const Matrix& x, Index rows, const LayerParameters& p, int heads,
                         AttentionCache& c) {
  const Index d = x.cols();
  const Index dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  c.h = layer_norm(x, p.ln1_gain, p.ln1_bias, c.ln1);
  // (E H) W_K == E (H W_K); projecting the sequence first is cheaper when
  // k < L+1.
  c.hk.noalias() = p.e_proj * c.h;
  c.hv.noalias() = p.f_proj * c.h;
  c.kp.noalias() = c.hk * p.wk;
  c.vp.noalias() = c.hv * p.wv;
  c.q.noalias() = c.h.topRows(rows) * p.wq;

  c.attn.resize(rows, d);
  c.probs.resize(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Matrix s = (c.q.middleCols(h * dh, dh) * c.kp.middleCols(h * dh, dh).transpose()) * scale;
    softmax_rows(s);
    c.attn.middleCols(h * dh, dh).noalias() = s * c.vp.middleCols(h * dh, dh);
    c.probs[static_cast<std::size_t>(h)] = std::move(s);
  }
  Matrix out = x.topRows(rows);
  out.noalias() += c.attn * p.wo;
  return out;
}

Matrix attention_backward(const Matrix& dout, const LayerParameters& p, int heads, const AttentionCache& c,
                          LayerParameters* g) {
  const Index rows = dout.rows();
  const Index d = dout.cols();
  const Index hd = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  if (g) g->wo.noalias() += c.attn.transpose() * dout;
  const Matrix dattn = dout * p.wo.transpose();

  Matrix dq(rows, d);
  Matrix dkp(c.kp.rows(), d);
  Matrix dvp(c.vp.rows(), d);
  for (int h = 0; h < heads; ++h) {
    const Matrix& prob = c.probs[static_cast<std::size_t>(h)];
    const auto da = dattn.middleCols(h * hd, hd);
    dvp.middleCols(h * hd, hd).noalias() = prob.transpose() * da;
    const Matrix dprob = da * c.vp.middleCols(h * hd, hd).transpose();
    const Vector inner = (dprob.array() * prob.array()).rowwise().sum();
    const Matrix ds = (prob.array() * (dprob.colwise() - inner).array()) * scale;
    dq.middleCols(h * hd, hd).noalias() = ds * c.kp.middleCols(h * hd, hd);
    dkp.middleCols(h * hd, hd).noalias() = ds.transpose() * c.q.middleCols(h * hd, hd);
  }

  const Matrix dhk = dkp * p.wk.transpose();
  const Matrix dhv = dvp * p.wv.transpose();
  if (g) {
    g->wq.noalias() += c.h.topRows(rows).transpose() * dq;
    g->wk.noalias() += c.hk.transpose() * dkp;
    g->wv.noalias() += c.hv.transpose() * dvp;
    g->e_proj.noalias() += dhk * c.h.transpose();
    g->f_proj.noalias() += dhv * c.h.transpose();
  }
  Matrix dh = p.e_proj.transpose() * dhk;
  dh.noalias() += p.f_proj.transpose() * dhv;
  dh.topRows(rows).noalias() += dq * p.wq.transpose();

  Matrix dx = layer_norm_backward(dh, c.ln1, p.ln1_gain, g ? &g->ln1_gain : nullptr,
                                  g ? &g->ln1_bias : nullptr);
  dx.topRows(rows) += dout;
  return dx;
}

Matrix ffn_forward(const Matrix& y, const LayerParameters& p, FfnCache& c) {
  c.h2 = layer_norm(y, p.ln2_gain, p.ln2_bias, c.ln2);
  c.z.noalias() = c.h2 * p.ffn_w1;
  c.z.rowwise() += p.ffn_b1.row(0);
  c.g = c.z.unaryExpr(&gelu);
  Matrix out = y;
  out.noalias() += c.g * p.ffn_w2;
  out.rowwise() += p.ffn_b2.row(0);
  return out;
}

Matrix ffn_backward(const Matrix& dout, const LayerParameters& p, const FfnCache& c, LayerParameters* g) {
  if (g) {
    g->ffn_w2.noalias() += c.g.transpose() * dout;
    g->ffn_b2 += dout.colwise().sum();
  }
  Matrix dz = dout * p.ffn_w2.transpose();
  dz.array() *= c.z.unaryExpr(&gelu_grad).array();
  if (g) {
    g->ffn_w1.noalias() += c.h2.transpose() * dz;
    g->ffn_b1 += dz.colwise().sum();
  }
  const Matrix dh2 = dz * p.ffn_w1.transpose();
  Matrix dy = layer_norm_backward(dh2, c.ln2, p.ln2_gain, g ? &g->ln2_gain : nullptr,
                                  g ? &g->ln2_bias : nullptr);
  dy += dout;
  return dy;
}

struct EncoderCache {
  std::vector<LayerCache> layers;
  NormCache final;
};

void check_embedded_shape(const Matrix& embedded, const Model& model) {
  const auto& cfg = model.config();
  if (embedded.rows() != cfg.seq_len || embedded.cols() != cfg.embed_dim)
    throw Error(ErrorCode::ShapeMismatch, "embedded input is " + std::to_string(embedded.rows()) + "x" +
                                              std::to_string(embedded.cols()) + ", model expects " +
                                              std::to_string(cfg.seq_len) + "x" +
                                              std::to_string(cfg.embed_dim));
}

// Returns the final-normed hidden states: one row when cls_only, else all.
Matrix encode(const Matrix& embedded, const Model& model, bool cls_only, EncoderCache& c) {
  const auto& cfg = model.config();
  const auto& params = model.params();
  Matrix x = embedded + model.positional();
  c.layers.resize(static_cast<std::size_t>(cfg.n_layers));
  for (int l = 0; l < cfg.n_layers; ++l) {
    const Index rows = (cls_only && l + 1 == cfg.n_layers) ? 1 : x.rows();
    auto& lc = c.layers[static_cast<std::size_t>(l)];
    const auto& lp = params.layers[static_cast<std::size_t>(l)];
    Matrix y = attention_forward(x, rows, lp, cfg.n_heads, lc.attention);
    x = ffn_forward(y, lp, lc.ffn);
  }
  return layer_norm(x, params.final_gain, params.final_bias, c.final);
}

Matrix encode_backward(const Matrix& dhidden, const Model& model, const EncoderCache& c, ModelParameters* g) {
  const auto& cfg = model.config();
  const auto& params = model.params();
  Matrix dx = layer_norm_backward(dhidden, c.final, params.final_gain, g ? &g->final_gain : nullptr,
                                  g ? &g->final_bias : nullptr);
  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const auto& lc = c.layers[static_cast<std::size_t>(l)];
    const auto& lp = params.layers[static_cast<std::size_t>(l)];
    LayerParameters* lg = g ? &g->layers[static_cast<std::size_t>(l)] : nullptr;
    dx = ffn_backward(dx, lp, lc.ffn, lg);
    dx = attention_backward(dx, lp, cfg.n_heads, lc.attention, lg);
  }
  return dx;
}

void check_tokens(std::span<const TokenId> tokens, const Model& model, bool require_cls) {
  if (static_cast<int>(tokens.size()) != model.config().seq_len)
    throw Error(ErrorCode::ShapeMismatch, "sequence length " + std::to_string(tokens.size()) +
                                              ", model expects " + std::to_string(model.config().seq_len));
  for (auto t : tokens)
    if (t >= kVocabSize) throw Error(ErrorCode::TokenOutOfRange, std::to_string(t));
  if (require_cls && tokens.front() != kClsId)
    throw Error(ErrorCode::MissingClsToken, "sequence starts with token " + std::to_string(tokens.front()));
}

std::vector<Index> masked_positions(const Example& ex) {
  if (ex.mlm_targets.size() != ex.tokens.size())
    throw Error(ErrorCode::ShapeMismatch, "mlm targets do not align with tokens");
  std::vector<Index> rows;
  for (std::size_t t = 0; t < ex.mlm_targets.size(); ++t) {
    const int target = ex.mlm_targets[t];
    if (target == kIgnoreTarget) continue;
    if (target < 0 || target >= kVocabSize) throw Error(ErrorCode::TokenOutOfRange, "mlm target");
    rows.push_back(static_cast<Index>(t));
  }
  return rows;
}

// Adds weight * d(loss)/d(params) into `g` (when non-null) and returns the
// unweighted summed loss of the example.
double example_loss(const Example& ex, const Model& model, LossKind kind, double weight, ModelParameters* g) {
  const auto& params = model.params();
  EncoderCache cache;
  Matrix dhidden;
  double loss = 0.0;

  if (kind == LossKind::Classification) {
    check_tokens(ex.tokens, model, true);
    if (ex.label != 0 && ex.label != 1) throw Error(ErrorCode::LabelNotBinary, std::to_string(ex.label));
    const Matrix hidden = encode(embed(ex.tokens, model), model, true, cache);
    RowVector z = hidden.row(0) * params.cls_w;
    z += params.cls_b.row(0);
    const double lse = log_sum_exp(z);
    loss = lse - z(ex.label);
    if (!g) return loss;
    RowVector dz = (z.array() - lse).exp();
    dz(ex.label) -= 1.0;
    dz *= weight;
    g->cls_w.noalias() += hidden.row(0).transpose() * dz;
    g->cls_b += dz;
    dhidden = dz * params.cls_w.transpose();
  } else {
    check_tokens(ex.tokens, model, false);
    const auto rows = masked_positions(ex);
    if (rows.empty()) return 0.0;
    const Matrix hidden = encode(embed(ex.tokens, model), model, false, cache);
    const Index m = static_cast<Index>(rows.size());
    Matrix hm(m, hidden.cols());
    for (Index i = 0; i < m; ++i) hm.row(i) = hidden.row(rows[static_cast<std::size_t>(i)]);
    Matrix z = hm * params.mlm_w;
    z.rowwise() += params.mlm_b.row(0);
    Matrix dz(m, z.cols());
    for (Index i = 0; i < m; ++i) {
      const int target = ex.mlm_targets[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
      const RowVector zi = z.row(i);
      const double lse = log_sum_exp(zi);
      loss += lse - zi(target);
      dz.row(i) = (zi.array() - lse).exp();
      dz(i, target) -= 1.0;
    }
    if (!g) return loss;
    dz *= weight;
    g->mlm_w.noalias() += hm.transpose() * dz;
    g->mlm_b += dz.colwise().sum();
    const Matrix dhm = dz * params.mlm_w.transpose();
    dhidden = Matrix::Zero(hidden.rows(), hidden.cols());
    for (Index i = 0; i < m; ++i) dhidden.row(rows[static_cast<std::size_t>(i)]) = dhm.row(i);
  }

  const Matrix dembedded = encode_backward(dhidden, model, cache, g);
  for (std::size_t t = 0; t < ex.tokens.size(); ++t)
    g->embedding.row(ex.tokens[t]) += dembedded.row(static_cast<Index>(t));
  return loss;
}

double loss_normalizer(std::span<const Example> batch, LossKind kind) {
  if (kind == LossKind::Classification) return static_cast<double>(batch.size());
  std::size_t masked = 0;
  for (const auto& ex : batch)
    for (int t : ex.mlm_targets) masked += (t != kIgnoreTarget);
  return static_cast<double>(masked);
}

void fill_normal(Matrix& m, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, sd);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

}  // namespace

std::vector<Matrix*> ModelParameters::tensors() {
  std::vector<Matrix*> out;
  visit([&](std::string_view, Matrix& m) { out.push_back(&m); });
  return out;
}

std::vector<const Matrix*> ModelParameters::tensors() const {
  std::vector<const Matrix*> out;
  visit([&](std::string_view, const Matrix& m) { out.push_back(&m); });
  return out;
}

std::size_t ModelParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto* m : tensors()) n += static_cast<std::size_t>(m->size());
  return n;
}

ModelParameters ModelParameters::zeros_like() const {
  ModelParameters z = *this;
  for (auto* m : z.tensors()) m->setZero();
  return z;
}

void ModelParameters::add(const ModelParameters& other) {
  auto dst = tensors();
  auto src = other.tensors();
  if (dst.size() != src.size()) throw Error(ErrorCode::ShapeMismatch, "parameter sets differ");
  for (std::size_t i = 0; i < dst.size(); ++i) *dst[i] += *src[i];
}

bool ModelParameters::all_finite() const {
  for (const auto* m : tensors())
    if (!m->allFinite()) return false;
  return true;
}

void validate(const ModelConfig& c) {
  if (c.vocab_size != kVocabSize) invalid_config("vocab_size must be " + std::to_string(kVocabSize));
  if (c.embed_dim <= 0 || c.embed_dim % 2 != 0) invalid_config("embed_dim must be positive and even");
  if (c.n_layers < 1 || c.n_layers > 6) invalid_config("n_layers must lie in 1..6");
  if (c.n_heads < 1 || c.embed_dim % c.n_heads != 0)
    invalid_config("embed_dim " + std::to_string(c.embed_dim) + " not divisible by n_heads " +
                   std::to_string(c.n_heads));
  if (c.seq_len < 1) invalid_config("seq_len must be positive");
  if (c.linformer_k < 1 || c.linformer_k > c.seq_len) invalid_config("linformer_k must lie in 1..seq_len");
  if (c.ffn_dim < 1) invalid_config("ffn_dim must be positive");
  if (!(c.init_scale > 0.0) || !std::isfinite(c.init_scale)) invalid_config("init_scale must be positive");
}

Matrix positional_encoding(int length, int dim) {
  if (length < 1 || dim < 1 || dim % 2 != 0)
    throw Error(ErrorCode::ConfigInvalid, "positional encoding needs positive length and even dimension");
  Matrix pe(length, dim);
  for (int i = 0; i < dim / 2; ++i) {
    const double inv_freq = std::pow(10000.0, -2.0 * i / static_cast<double>(dim));
    for (int pos = 0; pos < length; ++pos) {
      pe(pos, 2 * i) = std::sin(pos * inv_freq);
      pe(pos, 2 * i + 1) = std::cos(pos * inv_freq);
    }
  }
  return pe;
}

Model::Model(ModelConfig config, ModelParameters params) : config_(config), params_(std::move(params)) {
  validate(config_);
  const Index d = config_.embed_dim, n = config_.seq_len, k = config_.linformer_k, f = config_.ffn_dim;
  auto expect = [](const Matrix& m, Index r, Index c, std::string_view name) {
    if (m.rows() != r || m.cols() != c)
      throw Error(ErrorCode::ShapeMismatch, std::string(name) + " has wrong shape");
  };
  expect(params_.embedding, kVocabSize, d, "embedding");
  if (params_.layers.size() != static_cast<std::size_t>(config_.n_layers))
    throw Error(ErrorCode::ShapeMismatch, "layer count");
  for (const auto& l : params_.layers) {
    for (const auto* w : {&l.wq, &l.wk, &l.wv, &l.wo}) expect(*w, d, d, "attention weight");
    expect(l.e_proj, k, n, "e_proj");
    expect(l.f_proj, k, n, "f_proj");
    for (const auto* v : {&l.ln1_gain, &l.ln1_bias, &l.ln2_gain, &l.ln2_bias, &l.ffn_b2})
      expect(*v, 1, d, "layer vector");
    expect(l.ffn_w1, d, f, "ffn_w1");
    expect(l.ffn_b1, 1, f, "ffn_b1");
    expect(l.ffn_w2, f, d, "ffn_w2");
  }
  expect(params_.final_gain, 1, d, "final_gain");
  expect(params_.final_bias, 1, d, "final_bias");
  expect(params_.mlm_w, d, kVocabSize, "mlm_w");
  expect(params_.mlm_b, 1, kVocabSize, "mlm_b");
  expect(params_.cls_w, d, 2, "cls_w");
  expect(params_.cls_b, 1, 2, "cls_b");
  positional_ = positional_encoding(config_.seq_len, config_.embed_dim);
}

Model init_model(const ModelConfig& config, std::uint64_t seed) {
  validate(config);
  const Index d = config.embed_dim, n = config.seq_len, k = config.linformer_k, f = config.ffn_dim;
  const double s = config.init_scale;
  std::mt19937_64 rng(seed);

  // Normal draws scaled by 1/sqrt(fan_in); norms start at identity.
  ModelParameters p;
  p.embedding.resize(kVocabSize, d);
  fill_normal(p.embedding, s / std::sqrt(static_cast<double>(d)), rng);
  for (int l = 0; l < config.n_layers; ++l) {
    LayerParameters lp;
    for (auto* w : {&lp.wq, &lp.wk, &lp.wv, &lp.wo}) {
      w->resize(d, d);
      fill_normal(*w, s / std::sqrt(static_cast<double>(d)), rng);
    }
    lp.e_proj.resize(k, n);
    lp.f_proj.resize(k, n);
    fill_normal(lp.e_proj, s / std::sqrt(static_cast<double>(n)), rng);
    fill_normal(lp.f_proj, s / std::sqrt(static_cast<double>(n)), rng);
    lp.ln1_gain = Matrix::Ones(1, d);
    lp.ln1_bias = Matrix::Zero(1, d);
    lp.ln2_gain = Matrix::Ones(1, d);
    lp.ln2_bias = Matrix::Zero(1, d);
    lp.ffn_w1.resize(d, f);
    fill_normal(lp.ffn_w1, s / std::sqrt(static_cast<double>(d)), rng);
    lp.ffn_b1 = Matrix::Zero(1, f);
    lp.ffn_w2.resize(f, d);
    fill_normal(lp.ffn_w2, s / std::sqrt(static_cast<double>(f)), rng);
    lp.ffn_b2 = Matrix::Zero(1, d);
    p.layers.push_back(std::move(lp));
  }
  p.final_gain = Matrix::Ones(1, d);
  p.final_bias = Matrix::Zero(1, d);
  p.mlm_w.resize(d, kVocabSize);
  fill_normal(p.mlm_w, s / std::sqrt(static_cast<double>(d)), rng);
  p.mlm_b = Matrix::Zero(1, kVocabSize);
  p.cls_w.resize(d, 2);
  fill_normal(p.cls_w, s / std::sqrt(static_cast<double>(d)), rng);
  p.cls_b = Matrix::Zero(1, 2);
  return Model(config, std::move(p));
}

Matrix embed(std::span<const TokenId> tokens, const Model& model) {
  const auto& table = model.params().embedding;
  Matrix out(static_cast<Index>(tokens.size()), table.cols());
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] >= kVocabSize) throw Error(ErrorCode::TokenOutOfRange, std::to_string(tokens[t]));
    out.row(static_cast<Index>(t)) = table.row(tokens[t]);
  }
  return out;
}

Matrix linformer_attention(const Matrix& x, const Model& model, int layer_index) {
  check_embedded_shape(x, model);
  if (layer_index < 0 || layer_index >= model.config().n_layers)
    throw Error(ErrorCode::ShapeMismatch, "layer index out of range");
  AttentionCache cache;
  return attention_forward(x, x.rows(), model.params().layers[static_cast<std::size_t>(layer_index)],
                           model.config().n_heads, cache);
}

Logits forward_classify(std::span<const TokenId> tokens, const Model& model) {
  check_tokens(tokens, model, true);
  return forward_from_embeddings(embed(tokens, model), model);
}

Matrix forward_mlm(std::span<const TokenId> tokens, const Model& model) {
  check_tokens(tokens, model, false);
  EncoderCache cache;
  const Matrix hidden = encode(embed(tokens, model), model, false, cache);
  Matrix logits = hidden * model.params().mlm_w;
  logits.rowwise() += model.params().mlm_b.row(0);
  return logits;
}

Logits forward_from_embeddings(const Matrix& embedded, const Model& model) {
  check_embedded_shape(embedded, model);
  if (!embedded.allFinite()) throw Error(ErrorCode::ShapeMismatch, "embedded input is not finite");
  EncoderCache cache;
  const Matrix hidden = encode(embedded, model, true, cache);
  const RowVector z = hidden.row(0) * model.params().cls_w + model.params().cls_b.row(0);
  return z.transpose();
}

Matrix grad_wrt_embeddings(const Matrix& embedded, const Model& model, int target) {
  check_embedded_shape(embedded, model);
  if (target != 0 && target != 1) throw Error(ErrorCode::ShapeMismatch, "target must be 0 or 1");
  EncoderCache cache;
  encode(embedded, model, true, cache);
  const Matrix dhidden = model.params().cls_w.col(target).transpose();
  return encode_backward(dhidden, model, cache, nullptr);
}

LossAndGrad grad_wrt_params(std::span<const Example> batch, const Model& model, LossKind kind) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "gradient requested for an empty batch");
  LossAndGrad result;
  result.grad = model.params().zeros_like();
  const double normalizer = loss_normalizer(batch, kind);
  if (normalizer == 0.0) return result;
  const double weight = 1.0 / normalizer;

  // Fixed chunking with an ordered final reduction keeps the result
  // independent of the thread count.
  const int chunks = static_cast<int>(std::min<std::size_t>(kGradChunks, batch.size()));
  std::vector<ModelParameters> partial(static_cast<std::size_t>(chunks));
  std::vector<double> partial_loss(static_cast<std::size_t>(chunks), 0.0);
  std::vector<std::exception_ptr> failures(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
  for (int c = 0; c < chunks; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    try {
      partial[uc] = model.params().zeros_like();
      const std::size_t begin = uc * batch.size() / static_cast<std::size_t>(chunks);
      const std::size_t end = (uc + 1) * batch.size() / static_cast<std::size_t>(chunks);
      for (std::size_t i = begin; i < end; ++i)
        partial_loss[uc] += example_loss(batch[i], model, kind, weight, &partial[uc]);
    } catch (...) {
      failures[uc] = std::current_exception();
    }
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  double loss = 0.0;
  for (std::size_t c = 0; c < partial.size(); ++c) {
    result.grad.add(partial[c]);
    loss += partial_loss[c];
  }
  result.loss = loss * weight;
  return result;
}

double batch_loss(std::span<const Example> batch, const Model& model, LossKind kind) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "loss requested for an empty batch");
  const double normalizer = loss_normalizer(batch, kind);
  if (normalizer == 0.0) return 0.0;
  std::vector<double> losses(batch.size(), 0.0);
  std::vector<std::exception_ptr> failures(batch.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(batch.size()); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    try {
      losses[ui] = example_loss(batch[ui], model, kind, 0.0, nullptr);
    } catch (...) {
      failures[ui] = std::current_exception();
    }
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  double total = 0.0;
  for (double l : losses) total += l;
  return total / normalizer;
}

}  // namespace hemera
