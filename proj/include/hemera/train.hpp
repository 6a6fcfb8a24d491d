#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <mutex>
#include <random>
#include <span>
#include <vector>

#include "hemera/model.hpp"
#include "hemera/optim.hpp"
#include "hemera/tokenizer.hpp"

namespace hemera {

// Learning rate for full-scale cohorts. It stalls at desk scale, so
// TrainConfig defaults to 1e-3 instead.
inline constexpr double kPublishedLearningRate = 1e-7;

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 32;
  int max_epochs = 50;
  int patience = 5;
  double min_delta = 1e-4;
  double mask_select_rate = 0.40;
  double mask_replace_rate = 0.80;
  double mask_random_rate = 0.10;
  double mask_keep_rate = 0.10;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 7;

  AdamWConfig optimizer() const { return {lr, beta1, beta2, eps, weight_decay}; }
};

void validate(const TrainConfig& config);

enum class SplitTag { Train, Validation, Test };

const char* split_name(SplitTag tag);

// Records every sample read through a DataSplit so tests can prove which
// indices a stage touched.
class AccessLog {
 public:
  struct Entry {
    SplitTag tag;
    std::size_t index;
  };

  void record(SplitTag tag, std::size_t index);
  std::vector<Entry> entries() const;
  bool touched(SplitTag tag) const;

 private:
  mutable std::mutex mutex_;
  std::vector<Entry> entries_;
};

class DataSplit {
 public:
  DataSplit(const TokenizedDataset& data, std::vector<std::size_t> indices, SplitTag tag,
            AccessLog* log = nullptr);

  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  SplitTag tag() const { return tag_; }
  const std::vector<std::size_t>& indices() const { return indices_; }
  const TokenizedDataset& dataset() const { return *data_; }

  std::span<const TokenId> sequence(std::size_t i) const;
  int label(std::size_t i) const;

 private:
  const TokenizedDataset* data_;
  std::vector<std::size_t> indices_;
  SplitTag tag_;
  AccessLog* log_;
};

struct SplitIndices {
  std::vector<std::size_t> train, validation, test;
};

// Disjoint, covering split with sizes from largest-remainder rounding of
// n * ratios; class counts per split follow the global proportions within one
// sample when stratified.
SplitIndices split_dataset(std::span<const int> labels, std::array<double, 3> ratios, bool stratify,
                           std::uint64_t seed);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

struct FoldPlan {
  std::vector<Fold> folds;
};

FoldPlan kfold_partition(std::span<const int> labels, std::size_t k, bool stratify, std::uint64_t seed);

struct MaskedSequence {
  std::vector<TokenId> tokens;
  std::vector<int> targets;  // original ids at selected positions, kIgnoreTarget elsewhere
};

// BERT-style corruption of every non-cls position: select with
// mask_select_rate; a selected token becomes mask / a random non-structural
// token / itself with the replace/random/keep rates.
MaskedSequence mask_tokens(std::span<const TokenId> sequence, std::mt19937_64& rng, const TrainConfig& config);

class EarlyStopping {
 public:
  EarlyStopping(int patience, double min_delta);

  // Feeds one epoch's validation loss; returns true once `patience`
  // consecutive epochs failed to beat the best loss by more than min_delta.
  bool update(double loss);

  bool improved() const { return improved_; }
  int best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_loss_; }

 private:
  int patience_;
  double min_delta_;
  int epoch_ = -1;
  int best_epoch_ = -1;
  int bad_epochs_ = 0;
  double best_loss_ = 0.0;
  bool improved_ = false;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainResult {
  Model model;  // best-validation checkpoint
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 1-based, 0 when no epoch ran
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

TrainResult pretrain_mlm(Model model, const DataSplit& train, const DataSplit& validation,
                         const TrainConfig& config, const EpochCallback& on_epoch = {});

TrainResult finetune(Model model, const DataSplit& train, const DataSplit& validation,
                     const TrainConfig& config, const EpochCallback& on_epoch = {});

// Softmax probability of class 1 for every sample of the split.
std::vector<double> predict_scores(const Model& model, const DataSplit& split);

}  // namespace hemera
