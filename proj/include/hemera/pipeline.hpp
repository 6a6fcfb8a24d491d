#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hemera/attribution.hpp"
#include "hemera/metrics.hpp"
#include "hemera/model.hpp"
#include "hemera/synth.hpp"
#include "hemera/train.hpp"

namespace hemera {

struct PathsConfig {
  std::string variants;    // empty: use <output_dir>/cohort/variants.tsv
  std::string genotypes;   // empty: use <output_dir>/cohort/genotypes.tsv
  std::string known_loci;  // optional
  std::string output_dir = "hemera_out";
};

struct AblationConfig {
  std::vector<int> layers{1, 2, 3, 4, 5, 6};
  std::vector<int> heads{1, 2, 3, 4, 6};
  std::vector<double> maf_thresholds{0.01, 0.05, 0.1, 0.2, 0.3, 0.4};
};

struct RunConfig {
  PathsConfig paths;
  ModelConfig model;  // seq_len is taken from the data
  TrainConfig pretrain;
  TrainConfig finetune;
  std::optional<SynthConfig> synth;
  double maf_threshold = 0.01;
  std::size_t cv_folds = 5;
  int ig_steps = kDefaultIgSteps;
  std::size_t top_k = 50;
  std::int64_t window_bp = 1'000'000;
  std::uint64_t seed = 42;
  std::array<double, 3> split_ratios{0.7, 0.1, 0.2};
  bool stratify = true;
  std::string report_source = "attribute";  // "attribute" or "cv"
  AblationConfig ablate;
  bool verbose = true;
};

nlohmann::json to_json(const RunConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
// Applies a `dotted.key=value` override; the value is parsed as JSON when
// possible and taken as a string otherwise.
void apply_override(nlohmann::json& j, const std::string& assignment);
void validate(const RunConfig& config);

struct FoldSplits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

struct FoldOutcome {
  Model model;
  FoldMetrics metrics;
  YoudenResult threshold;
  std::vector<EpochRecord> pretrain_history;
  std::vector<EpochRecord> finetune_history;
  AttributionTable attributions;
  std::vector<double> test_scores;
};

struct FoldOptions {
  bool attribute = true;
  AccessLog* access_log = nullptr;
  std::function<void(const char* stage, const EpochRecord&)> on_epoch;
};

// Fresh model -> MLM pretraining -> fine-tuning -> Youden threshold on the
// validation split -> test metrics -> carrier-aggregated test attributions
// against a training-split baseline.
FoldOutcome run_fold(const TokenizedDataset& data, const FoldSplits& splits, const RunConfig& config,
                     const ModelConfig& model_config, std::uint64_t model_seed, const FoldOptions& options = {});

// Splits the k-fold training part into train/validation so that the
// held-out fold serves only as the test set.
FoldSplits cv_fold_splits(const TokenizedDataset& data, const Fold& fold, const RunConfig& config,
                          std::size_t fold_index);

struct Artifacts {
  std::filesystem::path root;

  std::filesystem::path cohort_dir() const { return root / "cohort"; }
  std::filesystem::path preprocess_dir() const { return root / "preprocess"; }
  std::filesystem::path pretrain_dir() const { return root / "pretrain"; }
  std::filesystem::path finetune_dir() const { return root / "finetune"; }
  std::filesystem::path attribute_dir() const { return root / "attribute"; }
  std::filesystem::path report_dir() const { return root / "report"; }
  std::filesystem::path cv_dir() const { return root / "cv"; }
  std::filesystem::path ablate_dir() const { return root / "ablate"; }
};

void run_generate(const RunConfig& config);
void run_preprocess(const RunConfig& config);
void run_pretrain(const RunConfig& config);
void run_finetune(const RunConfig& config);
void run_cv(const RunConfig& config);
void run_attribute(const RunConfig& config);
void run_report(const RunConfig& config);
void run_ablate(const RunConfig& config);
void run_all(const RunConfig& config);

const std::vector<std::string>& subcommands();
void run_subcommand(const std::string& name, const RunConfig& config);

// Applies the HEMERA_THREADS environment variable when OpenMP is enabled.
void configure_threads();

}  // namespace hemera
