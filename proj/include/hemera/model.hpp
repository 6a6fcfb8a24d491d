#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "hemera/tokenizer.hpp"

namespace hemera {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Logits = Eigen::Vector2d;

struct ModelConfig {
  int vocab_size = kVocabSize;
  int embed_dim = 36;
  int n_layers = 1;
  int n_heads = 1;
  int linformer_k = 36;
  int seq_len = 0;  // L + 1, including the cls position
  int ffn_dim = 144;
  // Multiplier on every random initialization scale.
  double init_scale = 1.0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void validate(const ModelConfig& config);

struct LayerParameters {
  Matrix wq, wk, wv, wo;     // D x D
  Matrix e_proj, f_proj;     // k x (L+1), key and value sequence projections
  Matrix ln1_gain, ln1_bias; // 1 x D, before attention
  Matrix ln2_gain, ln2_bias; // 1 x D, before the feed-forward block
  Matrix ffn_w1, ffn_b1;     // D x F, 1 x F
  Matrix ffn_w2, ffn_b2;     // F x D, 1 x D

  template <typename Self, typename Fn>
  static void visit(Self& self, Fn&& fn) {
    fn("wq", self.wq);
    fn("wk", self.wk);
    fn("wv", self.wv);
    fn("wo", self.wo);
    fn("e_proj", self.e_proj);
    fn("f_proj", self.f_proj);
    fn("ln1_gain", self.ln1_gain);
    fn("ln1_bias", self.ln1_bias);
    fn("ln2_gain", self.ln2_gain);
    fn("ln2_bias", self.ln2_bias);
    fn("ffn_w1", self.ffn_w1);
    fn("ffn_b1", self.ffn_b1);
    fn("ffn_w2", self.ffn_w2);
    fn("ffn_b2", self.ffn_b2);
  }
};

struct ModelParameters {
  Matrix embedding;  // vocab x D
  std::vector<LayerParameters> layers;
  Matrix final_gain, final_bias;  // 1 x D
  Matrix mlm_w, mlm_b;            // D x vocab, 1 x vocab
  Matrix cls_w, cls_b;            // D x 2, 1 x 2

  // Visits every tensor in checkpoint order with a dotted name such as
  // "layers.0.wq".
  template <typename Fn>
  void visit(Fn&& fn) { visit_impl(*this, fn); }
  template <typename Fn>
  void visit(Fn&& fn) const { visit_impl(*this, fn); }

  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
  std::size_t parameter_count() const;
  ModelParameters zeros_like() const;
  void add(const ModelParameters& other);
  bool all_finite() const;

 private:
  template <typename Self, typename Fn>
  static void visit_impl(Self& self, Fn& fn) {
    fn(std::string_view("embedding"), self.embedding);
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      const std::string prefix = "layers." + std::to_string(l) + ".";
      LayerParameters::visit(self.layers[l], [&](std::string_view name, auto& m) {
        fn(std::string_view(prefix + std::string(name)), m);
      });
    }
    fn(std::string_view("final_gain"), self.final_gain);
    fn(std::string_view("final_bias"), self.final_bias);
    fn(std::string_view("mlm_w"), self.mlm_w);
    fn(std::string_view("mlm_b"), self.mlm_b);
    fn(std::string_view("cls_w"), self.cls_w);
    fn(std::string_view("cls_b"), self.cls_b);
  }
};

// Fixed sinusoidal table: PE[p, 2i] = sin(p / 10000^(2i/D)),
// PE[p, 2i+1] = cos(p / 10000^(2i/D)).
Matrix positional_encoding(int length, int dim);

class Model {
 public:
  Model() = default;
  Model(ModelConfig config, ModelParameters params);

  const ModelConfig& config() const { return config_; }
  const ModelParameters& params() const { return params_; }
  ModelParameters& mutable_params() { return params_; }
  const Matrix& positional() const { return positional_; }

 private:
  ModelConfig config_;
  ModelParameters params_;
  Matrix positional_;
};

Model init_model(const ModelConfig& config, std::uint64_t seed);

// Token embeddings only; the positional term is added on entry to the
// encoder so that attribution paths interpolate pure token embeddings.
Matrix embed(std::span<const TokenId> tokens, const Model& model);

// One attention sub-block with its residual: X + Attn(LayerNorm(X)).
Matrix linformer_attention(const Matrix& x, const Model& model, int layer_index);

Logits forward_classify(std::span<const TokenId> tokens, const Model& model);
Matrix forward_mlm(std::span<const TokenId> tokens, const Model& model);
Logits forward_from_embeddings(const Matrix& embedded, const Model& model);

// Exact gradient of the pre-softmax logit `target` with respect to the token
// embeddings.
Matrix grad_wrt_embeddings(const Matrix& embedded, const Model& model, int target);

enum class LossKind { Classification, MaskedLM };

inline constexpr int kIgnoreTarget = -1;

struct Example {
  std::vector<TokenId> tokens;
  int label = -1;                // classification target
  std::vector<int> mlm_targets;  // original id at masked positions, kIgnoreTarget elsewhere
};

struct LossAndGrad {
  double loss = 0.0;
  ModelParameters grad;
};

// Mean loss over the batch (per sample for classification, per masked
// position for MLM) and its exact gradient with respect to every parameter.
LossAndGrad grad_wrt_params(std::span<const Example> batch, const Model& model, LossKind kind);
double batch_loss(std::span<const Example> batch, const Model& model, LossKind kind);

// Checkpoint: "HMCK" | u32 version | config echo | f64 tensors in visit order.
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace hemera
