#include <doctest.h>

#include <cmath>
#include <random>

#include "hemera/error.hpp"
#include "hemera/model.hpp"
#include "test_support.hpp"

using namespace hemera;
using namespace hemera::testing;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::Mismatch;
}

Matrix softmax_rows(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    const auto e = (z.row(r).array() - m).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

Model identity_projection_model(int seq_len, int dim, int heads, std::uint64_t seed) {
  Model m = random_model(small_config(seq_len, dim, 1, heads), seed);
  auto p = m.params();
  p.layers[0].e_proj = Matrix::Identity(seq_len, seq_len);
  p.layers[0].f_proj = Matrix::Identity(seq_len, seq_len);
  return Model(m.config(), std::move(p));
}

}  // namespace

TEST_CASE("init_model shapes and determinism") {
  ModelConfig c;
  c.seq_len = 41;
  const Model a = init_model(c, 3);
  CHECK(a.params().embedding.rows() == 33);
  CHECK(a.params().embedding.cols() == 36);
  CHECK(a.params().layers.size() == 1);
  CHECK(a.params().layers[0].e_proj.rows() == 36);
  CHECK(a.params().layers[0].e_proj.cols() == 41);
  CHECK(a.params().layers[0].ffn_w1.cols() == 144);
  const Model b = init_model(c, 3);
  bool same = true;
  for (std::size_t i = 0; i < a.params().tensors().size(); ++i)
    same = same && *a.params().tensors()[i] == *b.params().tensors()[i];
  CHECK(same);
  CHECK_FALSE(init_model(c, 4).params().embedding == a.params().embedding);
}

TEST_CASE("invalid model configs") {
  ModelConfig c;
  c.seq_len = 40;
  c.n_heads = 5;
  CHECK(code_of([&] { init_model(c, 1); }) == ErrorCode::ConfigInvalid);
  c.n_heads = 1;
  c.linformer_k = 41;
  CHECK(code_of([&] { init_model(c, 1); }) == ErrorCode::ConfigInvalid);
  c.linformer_k = 36;
  c.n_layers = 7;
  CHECK(code_of([&] { init_model(c, 1); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("positional encoding values") {
  const Matrix pe = positional_encoding(50, 8);
  for (int c = 0; c < 8; ++c) CHECK(pe(0, c) == (c % 2 == 0 ? 0.0 : 1.0));
  CHECK(pe(1, 0) == doctest::Approx(0.841471).epsilon(1e-6));
  CHECK(pe(7, 3) == doctest::Approx(std::cos(7.0 / std::pow(10000.0, 2.0 / 8.0))));
  CHECK(pe.cwiseAbs().maxCoeff() <= 1.0);
  CHECK_THROWS_AS(positional_encoding(4, 5), Error);
}

TEST_CASE("embed is a row lookup") {
  const Model m = random_model(small_config(4, 6), 1);
  const std::vector<TokenId> one{3};
  CHECK(embed(one, m) == m.params().embedding.row(3));
  const std::vector<TokenId> t{3, 9, 9, 12};
  const Matrix e = embed(t, m);
  CHECK(e.row(1) == e.row(2));
  CHECK(e.row(3) == m.params().embedding.row(12));
  const std::vector<TokenId> bad{3, 33, 5, 5};
  CHECK(code_of([&] { embed(bad, m); }) == ErrorCode::TokenOutOfRange);
}

TEST_CASE("identity projections reproduce full attention") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int len = 2 + trial * 3, heads = trial % 2 == 0 ? 1 : 2;
    const Model m = identity_projection_model(len, 6, heads, static_cast<std::uint64_t>(trial));
    Matrix x(len, 6);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    const Matrix diff = linformer_attention(x, m, 0) - reference_full_attention(x, m.params().layers[0], heads);
    CHECK(max_abs(diff) < 1e-10);
  }
}

TEST_CASE("attention keeps the input shape when k is small") {
  const Model m = random_model(small_config(9, 6, 2, 3, 2), 5);
  Matrix x = Matrix::Random(9, 6);
  const Matrix y = linformer_attention(x, m, 1);
  CHECK(y.rows() == 9);
  CHECK(y.cols() == 6);
  CHECK_THROWS_AS(linformer_attention(Matrix::Zero(8, 6), m, 0), Error);
  CHECK_THROWS_AS(linformer_attention(x, m, 2), Error);
}

TEST_CASE("zero input with zero biases passes through unchanged") {
  const Model m = init_model(small_config(5, 4), 2);
  const Matrix x = Matrix::Zero(5, 4);
  CHECK(max_abs(linformer_attention(x, m, 0)) == 0.0);
}

TEST_CASE("forward_classify contract") {
  const Model m = random_model(small_config(6, 6, 2, 2, 3), 8);
  std::mt19937_64 rng(1);
  const auto t = random_sequence(6, rng);
  const Logits a = forward_classify(t, m);
  const Logits b = forward_classify(t, m);
  CHECK(a == b);
  const double z = std::exp(a(0)) + std::exp(a(1));
  CHECK(std::exp(a(0)) / z + std::exp(a(1)) / z == doctest::Approx(1.0).epsilon(1e-12));
  auto no_cls = t;
  no_cls[0] = 5;
  CHECK(code_of([&] { forward_classify(no_cls, m); }) == ErrorCode::MissingClsToken);
  CHECK(forward_from_embeddings(embed(t, m), m) == a);
}

TEST_CASE("forward_mlm shape and normalization") {
  const Model m = random_model(small_config(7, 4), 9);
  std::mt19937_64 rng(2);
  auto t = random_sequence(7, rng);
  t[2] = kMaskId;
  const Matrix logits = forward_mlm(t, m);
  CHECK(logits.rows() == 7);
  CHECK(logits.cols() == 33);
  CHECK(forward_mlm(t, m) == logits);
  const Matrix p = softmax_rows(logits);
  for (Eigen::Index r = 0; r < p.rows(); ++r) CHECK(p.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("forward_from_embeddings accepts interpolated input") {
  const Model m = random_model(small_config(5, 6), 4);
  std::mt19937_64 rng(3);
  const Matrix e1 = embed(random_sequence(5, rng), m), e2 = embed(random_sequence(5, rng), m);
  const Logits z = forward_from_embeddings(0.3 * e1 + 0.7 * e2, m);
  CHECK(z.allFinite());
  CHECK(code_of([&] { forward_from_embeddings(Matrix::Zero(4, 6), m); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("embedding gradient matches finite differences") {
  const Model m = random_model(small_config(5, 4, 2, 2, 3), 11);
  std::mt19937_64 rng(4);
  Matrix e = embed(random_sequence(5, rng), m);
  for (int target : {0, 1}) {
    const Matrix analytic = grad_wrt_embeddings(e, m, target);
    const Matrix numeric = central_difference(e, [&] { return forward_from_embeddings(e, m)(target); }, 1e-5);
    CHECK(max_relative_error(analytic, numeric) < 1e-5);
  }
}

TEST_CASE("embedding gradient is linear in the target logit") {
  const Model m = random_model(small_config(6, 4), 12);
  std::mt19937_64 rng(5);
  const Matrix e = embed(random_sequence(6, rng), m);
  const Matrix g0 = grad_wrt_embeddings(e, m, 0), g1 = grad_wrt_embeddings(e, m, 1);
  auto p = m.params();
  p.cls_w.col(0) += p.cls_w.col(1);
  const Model summed(m.config(), p);
  CHECK(max_abs(grad_wrt_embeddings(e, summed, 0) - (g0 + g1)) < 1e-12);
  p.cls_w.col(1).setZero();
  CHECK(max_abs(grad_wrt_embeddings(e, Model(m.config(), p), 1)) == 0.0);
  CHECK(code_of([&] { grad_wrt_embeddings(e, m, 2); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("parameter gradients match finite differences") {
  const ModelConfig c = small_config(5, 4, 2, 2, 3);
  Model m = random_model(c, 13);
  std::mt19937_64 rng(6);
  std::vector<Example> cls_batch, mlm_batch;
  for (int i = 0; i < 3; ++i) {
    cls_batch.push_back({random_sequence(5, rng), i % 2, {}});
    Example e{random_sequence(5, rng), -1, std::vector<int>(5, kIgnoreTarget)};
    e.mlm_targets[1 + i] = e.tokens[1 + i];
    e.tokens[1 + i] = kMaskId;
    e.mlm_targets[4] = 7;
    mlm_batch.push_back(e);
  }
  for (auto [batch, kind] : {std::pair{&cls_batch, LossKind::Classification}, std::pair{&mlm_batch, LossKind::MaskedLM}}) {
    const auto lg = grad_wrt_params(*batch, m, kind);
    CHECK(lg.loss == doctest::Approx(batch_loss(*batch, m, kind)).epsilon(1e-12));
    auto analytic = lg.grad.tensors();
    auto params = m.mutable_params().tensors();
    REQUIRE(analytic.size() == params.size());
    for (std::size_t t = 0; t < params.size(); ++t) {
      const Matrix numeric = central_difference(*params[t], [&] { return batch_loss(*batch, m, kind); }, 1e-5);
      CHECK(max_relative_error(*analytic[t], numeric) < 1e-5);
    }
  }
}

TEST_CASE("duplicated batch gives the same mean gradient") {
  const Model m = random_model(small_config(6, 4), 14);
  std::mt19937_64 rng(7);
  std::vector<Example> batch{{random_sequence(6, rng), 1, {}}, {random_sequence(6, rng), 0, {}}};
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  const auto a = grad_wrt_params(batch, m, LossKind::Classification);
  const auto b = grad_wrt_params(doubled, m, LossKind::Classification);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-12));
  for (std::size_t t = 0; t < a.grad.tensors().size(); ++t)
    CHECK(max_abs(*a.grad.tensors()[t] - *b.grad.tensors()[t]) < 1e-12);
  CHECK(a.grad.all_finite());
  CHECK(code_of([&] { grad_wrt_params({}, m, LossKind::Classification); }) == ErrorCode::EmptyBatch);
}

TEST_CASE("forward passes are pure") {
  const Model m = random_model(small_config(6, 4), 15);
  std::mt19937_64 rng(8);
  const auto t = random_sequence(6, rng);
  const Logits before = forward_classify(t, m);
  forward_mlm(t, m);
  grad_wrt_embeddings(embed(t, m), m, 1);
  CHECK(forward_classify(t, m) == before);
}

TEST_CASE("checkpoint round trip and mismatch") {
  TempDir dir;
  const Model m = random_model(small_config(6, 4, 2, 2, 3), 16);
  save_checkpoint(m, dir / "m.ckpt");
  const Model back = load_checkpoint(dir / "m.ckpt", m.config());
  CHECK(back.config() == m.config());
  for (std::size_t t = 0; t < m.params().tensors().size(); ++t)
    CHECK(*back.params().tensors()[t] == *m.params().tensors()[t]);
  CHECK(code_of([&] { load_checkpoint(dir / "m.ckpt", small_config(6, 4)); }) == ErrorCode::CheckpointMismatch);
  write_file(dir / "junk.ckpt", "not a checkpoint");
  CHECK(code_of([&] { load_checkpoint(dir / "junk.ckpt"); }) == ErrorCode::IoFailure);
}
