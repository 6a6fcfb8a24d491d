#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "hemera/model.hpp"
#include "hemera/train.hpp"

namespace hemera {

inline constexpr int kDefaultIgSteps = 50;
inline constexpr int kRiskClass = 1;

// Per-position mean of the pure token embeddings over a training split.
// Rejects splits not tagged Train so that no held-out sample can leak into
// its own fold's baseline.
Matrix mean_embedding_baseline(const DataSplit& train, const Model& model);

using EmbeddingGradient = std::function<Matrix(const Matrix&)>;

// Right-endpoint Riemann sum of the path integral:
//   (x - x') * (1/m) * sum_{k=1..m} grad F(x' + (k/m)(x - x'))
Matrix integrated_gradients(const Matrix& input, const Matrix& baseline, const EmbeddingGradient& gradient,
                            int steps);

// Integrated gradients of the pre-softmax logit `target` with respect to the
// token-embedding layer output.
Matrix layer_integrated_gradients(std::span<const TokenId> tokens, const Matrix& baseline, const Model& model,
                                  int target = kRiskClass, int steps = kDefaultIgSteps);

// Mean over embedding dimensions: one score per sequence position.
Eigen::VectorXd per_position_scores(const Matrix& attribution);

// N x (L+1) per-position scores for every sample of `split`, in split order.
Matrix attribute_split(const DataSplit& split, const Matrix& baseline, const Model& model, int target, int steps);

struct AttributionRecord {
  int chromosome = 0;
  std::int64_t position = 0;
  TokenId token = 0;
  double mean_attribution = 0.0;
  std::size_t carrier_count = 0;
  std::size_t fold_count = 1;

  friend bool operator==(const AttributionRecord&, const AttributionRecord&) = default;
};

// Unique by (chromosome, position, token), sorted by that key.
using AttributionTable = std::vector<AttributionRecord>;

// Row i of `scores` belongs to sample i of `split`. Each position's score is
// averaged only over the samples carrying the token in question; the cls
// column is ignored.
AttributionTable aggregate_carriers(const Matrix& scores, const DataSplit& split);

// Mean of per-fold means over the folds in which a tuple occurs; carrier
// counts are summed.
AttributionTable aggregate_folds(std::span<const AttributionTable> tables);

void write_attribution_table(const AttributionTable& table, const std::filesystem::path& path);
AttributionTable read_attribution_table(const std::filesystem::path& path);

}  // namespace hemera
