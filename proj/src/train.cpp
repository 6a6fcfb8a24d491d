#include "hemera/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hemera/error.hpp"

namespace hemera {

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

// Integer apportionment of `total` by `weights` (summing to 1) using the
// largest-remainder rule; ties go to the lower index.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights) {
  std::vector<std::size_t> counts(weights.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = weights[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += counts[i];
    remainders.emplace_back(exact - static_cast<double>(counts[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < total; r = (r + 1) % remainders.size(), ++assigned)
    ++counts[remainders[r].second];
  return counts;
}

std::vector<std::vector<std::size_t>> shuffled_classes(std::span<const int> labels, std::mt19937_64& rng) {
  std::vector<std::vector<std::size_t>> classes(2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error(ErrorCode::LabelNotBinary, std::to_string(labels[i]));
    classes[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (auto& c : classes) std::shuffle(c.begin(), c.end(), rng);
  return classes;
}

Example make_example(const DataSplit& split, std::size_t i, LossKind kind, std::mt19937_64& rng,
                     const TrainConfig& config) {
  Example ex;
  const auto seq = split.sequence(i);
  if (kind == LossKind::Classification) {
    ex.tokens.assign(seq.begin(), seq.end());
    ex.label = split.label(i);
  } else {
    auto masked = mask_tokens(seq, rng, config);
    ex.tokens = std::move(masked.tokens);
    ex.mlm_targets = std::move(masked.targets);
  }
  return ex;
}

double normalizer(std::span<const Example> batch, LossKind kind) {
  if (kind == LossKind::Classification) return static_cast<double>(batch.size());
  double masked = 0.0;
  for (const auto& ex : batch)
    for (int t : ex.mlm_targets) masked += (t != kIgnoreTarget);
  return masked;
}

TrainResult run_training(Model model, const DataSplit& train, const DataSplit& validation,
                         const TrainConfig& config, LossKind kind, const EpochCallback& on_epoch) {
  validate(config);
  if (train.empty()) throw Error(ErrorCode::EmptyTrainingSet, "training split is empty");
  if (validation.empty()) throw Error(ErrorCode::EmptyTrainingSet, "validation split is empty");

  TrainResult result;
  result.model = model;
  if (config.max_epochs == 0) return result;

  std::mt19937_64 rng(config.seed);
  // Validation masks are drawn once so epoch losses are comparable.
  std::mt19937_64 val_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<Example> val_examples;
  val_examples.reserve(validation.size());
  for (std::size_t i = 0; i < validation.size(); ++i)
    val_examples.push_back(make_example(validation, i, kind, val_rng, config));

  AdamWState state = AdamWState::zeros_for(model.params());
  const AdamWConfig opt = config.optimizer();
  EarlyStopping stopper(config.patience, config.min_delta);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    double weight_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<Example> batch;
      batch.reserve(end - start);
      for (std::size_t b = start; b < end; ++b) batch.push_back(make_example(train, order[b], kind, rng, config));
      const double w = normalizer(batch, kind);
      if (w == 0.0) continue;
      auto step = grad_wrt_params(batch, model, kind);
      loss_sum += step.loss * w;
      weight_sum += w;
      adamw_amsgrad_step(model.mutable_params(), step.grad, state, opt);
    }
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = weight_sum > 0.0 ? loss_sum / weight_sum : 0.0;
    record.val_loss = batch_loss(val_examples, model, kind);
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);

    const bool stop = stopper.update(record.val_loss);
    if (stopper.improved()) {
      result.model = model;
      result.best_epoch = epoch;
    }
    if (stop) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace

void validate(const TrainConfig& c) {
  if (!(c.lr > 0.0)) invalid("lr must be positive");
  if (c.batch_size == 0) invalid("batch_size must be positive");
  if (c.max_epochs < 0) invalid("max_epochs must be non-negative");
  if (c.patience < 1) invalid("patience must be at least 1");
  if (!(c.min_delta >= 0.0)) invalid("min_delta must be non-negative");
  for (double r : {c.mask_select_rate, c.mask_replace_rate, c.mask_random_rate, c.mask_keep_rate})
    if (!(r >= 0.0 && r <= 1.0)) invalid("mask rates must lie in [0, 1]");
  if (std::abs(c.mask_replace_rate + c.mask_random_rate + c.mask_keep_rate - 1.0) > 1e-9)
    invalid("replace + random + keep rates must sum to 1");
  if (!(c.weight_decay >= 0.0)) invalid("weight_decay must be non-negative");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0 && c.beta2 >= 0.0 && c.beta2 < 1.0)) invalid("betas must lie in [0, 1)");
  if (!(c.eps > 0.0)) invalid("eps must be positive");
}

const char* split_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::Train: return "train";
    case SplitTag::Validation: return "validation";
    case SplitTag::Test: return "test";
  }
  return "?";
}

void AccessLog::record(SplitTag tag, std::size_t index) {
  std::lock_guard lock(mutex_);
  entries_.push_back({tag, index});
}

std::vector<AccessLog::Entry> AccessLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

bool AccessLog::touched(SplitTag tag) const {
  std::lock_guard lock(mutex_);
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.tag == tag; });
}

DataSplit::DataSplit(const TokenizedDataset& data, std::vector<std::size_t> indices, SplitTag tag, AccessLog* log)
    : data_(&data), indices_(std::move(indices)), tag_(tag), log_(log) {
  for (auto i : indices_)
    if (i >= data.n_samples()) throw Error(ErrorCode::ShapeMismatch, "split index out of range");
}

std::span<const TokenId> DataSplit::sequence(std::size_t i) const {
  const std::size_t index = indices_.at(i);
  if (log_) log_->record(tag_, index);
  return {data_->sequence(index), data_->seq_len()};
}

int DataSplit::label(std::size_t i) const {
  const std::size_t index = indices_.at(i);
  if (log_) log_->record(tag_, index);
  return data_->labels[index];
}

SplitIndices split_dataset(std::span<const int> labels, std::array<double, 3> ratios, bool stratify,
                           std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (n == 0) throw Error(ErrorCode::TooFewSamples, "cannot split an empty dataset");
  for (double r : ratios)
    if (!(r >= 0.0)) throw Error(ErrorCode::RatioInvalid, "ratios must be non-negative");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw Error(ErrorCode::RatioInvalid, "ratios must sum to 1");

  std::mt19937_64 rng(seed);
  const auto sizes = apportion(n, ratios);
  std::array<std::vector<std::size_t>*, 3> out;
  SplitIndices result;
  out = {&result.train, &result.validation, &result.test};

  if (!stratify) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s)
      for (std::size_t j = 0; j < sizes[s]; ++j) out[s]->push_back(order[pos++]);
  } else {
    const auto classes = shuffled_classes(labels, rng);
    // Controlled rounding of the class x split table so rows sum to class
    // sizes and columns to split sizes, each cell within one of its share.
    std::array<std::array<std::size_t, 3>, 2> cells{};
    std::array<std::size_t, 2> row_left{};
    std::array<std::size_t, 3> col_left = {sizes[0], sizes[1], sizes[2]};
    std::vector<std::tuple<double, std::size_t, std::size_t>> fractions;
    for (std::size_t c = 0; c < 2; ++c) {
      row_left[c] = classes[c].size();
      for (std::size_t s = 0; s < 3; ++s) {
        const double exact = static_cast<double>(sizes[s]) * static_cast<double>(classes[c].size()) /
                             static_cast<double>(n);
        cells[c][s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        row_left[c] -= cells[c][s];
        col_left[s] -= cells[c][s];
        fractions.emplace_back(exact - static_cast<double>(cells[c][s]), c, s);
      }
    }
    std::stable_sort(fractions.begin(), fractions.end(),
                     [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
    for (const auto& [frac, c, s] : fractions) {
      if (row_left[c] > 0 && col_left[s] > 0) {
        ++cells[c][s];
        --row_left[c];
        --col_left[s];
      }
    }
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t s = 0; s < 3 && row_left[c] > 0; ++s)
        while (row_left[c] > 0 && col_left[s] > 0) {
          ++cells[c][s];
          --row_left[c];
          --col_left[s];
        }
    for (std::size_t c = 0; c < 2; ++c) {
      std::size_t pos = 0;
      for (std::size_t s = 0; s < 3; ++s)
        for (std::size_t j = 0; j < cells[c][s]; ++j) out[s]->push_back(classes[c][pos++]);
    }
  }
  for (auto* v : out) std::sort(v->begin(), v->end());
  return result;
}

FoldPlan kfold_partition(std::span<const int> labels, std::size_t k, bool stratify, std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (k < 2) throw Error(ErrorCode::ConfigInvalid, "k must be at least 2");
  if (n < k)
    throw Error(ErrorCode::TooFewSamples,
                std::to_string(n) + " samples cannot fill " + std::to_string(k) + " folds");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order;
  if (stratify) {
    for (auto& c : shuffled_classes(labels, rng)) order.insert(order.end(), c.begin(), c.end());
  } else {
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
  }
  // Dealing the class-grouped order round-robin balances both fold sizes
  // and per-class counts.
  std::vector<std::size_t> fold_of(n);
  for (std::size_t j = 0; j < n; ++j) fold_of[order[j]] = j % k;

  FoldPlan plan;
  plan.folds.resize(k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      (fold_of[i] == f ? plan.folds[f].validation : plan.folds[f].train).push_back(i);
    }
  }
  return plan;
}

MaskedSequence mask_tokens(std::span<const TokenId> sequence, std::mt19937_64& rng, const TrainConfig& config) {
  MaskedSequence out;
  out.tokens.assign(sequence.begin(), sequence.end());
  out.targets.assign(sequence.size(), kIgnoreTarget);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // Random replacements avoid the structural cls and mask ids.
  std::uniform_int_distribution<int> random_token(0, kVocabSize - 3);
  for (std::size_t t = 1; t < sequence.size(); ++t) {
    if (unit(rng) >= config.mask_select_rate) continue;
    out.targets[t] = sequence[t];
    const double u = unit(rng);
    if (u < config.mask_replace_rate) {
      out.tokens[t] = kMaskId;
    } else if (u < config.mask_replace_rate + config.mask_random_rate) {
      int id = random_token(rng);
      if (id >= kClsId) id += 2;
      out.tokens[t] = static_cast<TokenId>(id);
    }
  }
  return out;
}

EarlyStopping::EarlyStopping(int patience, double min_delta) : patience_(patience), min_delta_(min_delta) {}

bool EarlyStopping::update(double loss) {
  ++epoch_;
  improved_ = best_epoch_ < 0 || loss < best_loss_ - min_delta_;
  if (improved_) {
    best_loss_ = loss;
    best_epoch_ = epoch_;
    bad_epochs_ = 0;
    return false;
  }
  return ++bad_epochs_ >= patience_;
}

TrainResult pretrain_mlm(Model model, const DataSplit& train, const DataSplit& validation,
                         const TrainConfig& config, const EpochCallback& on_epoch) {
  return run_training(std::move(model), train, validation, config, LossKind::MaskedLM, on_epoch);
}

TrainResult finetune(Model model, const DataSplit& train, const DataSplit& validation, const TrainConfig& config,
                     const EpochCallback& on_epoch) {
  return run_training(std::move(model), train, validation, config, LossKind::Classification, on_epoch);
}

std::vector<double> predict_scores(const Model& model, const DataSplit& split) {
  std::vector<std::vector<TokenId>> sequences(split.size());
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto s = split.sequence(i);
    sequences[i].assign(s.begin(), s.end());
  }
  std::vector<double> scores(split.size());
  std::vector<std::exception_ptr> failures(split.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(split.size()); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    try {
      const Logits z = forward_classify(sequences[ui], model);
      scores[ui] = 1.0 / (1.0 + std::exp(z(0) - z(1)));
    } catch (...) {
      failures[ui] = std::current_exception();
    }
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  return scores;
}

}  // namespace hemera
