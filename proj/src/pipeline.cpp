#include "hemera/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "hemera/error.hpp"
#include "hemera/genotype_io.hpp"
#include "hemera/report.hpp"
#include "hemera/tokenizer.hpp"
#include "text_util.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hemera {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

[[noreturn]] void missing(const fs::path& path, const std::string& producer) {
  throw Error(ErrorCode::MissingArtifact,
              path.string() + " not found; run `" + producer + "` first");
}

void require(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) missing(path, producer);
}

void log(const RunConfig& config, const std::string& message) {
  if (config.verbose) std::cerr << "[hemera] " << message << std::endl;
}

json train_to_json(const TrainConfig& t) {
  return {{"lr", t.lr},
          {"batch_size", t.batch_size},
          {"max_epochs", t.max_epochs},
          {"patience", t.patience},
          {"min_delta", t.min_delta},
          {"mask_select_rate", t.mask_select_rate},
          {"mask_replace_rate", t.mask_replace_rate},
          {"mask_random_rate", t.mask_random_rate},
          {"mask_keep_rate", t.mask_keep_rate},
          {"weight_decay", t.weight_decay},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"eps", t.eps},
          {"seed", t.seed}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig t;
  t.lr = j.at("lr").get<double>();
  t.batch_size = j.at("batch_size").get<std::size_t>();
  t.max_epochs = j.at("max_epochs").get<int>();
  t.patience = j.at("patience").get<int>();
  t.min_delta = j.at("min_delta").get<double>();
  t.mask_select_rate = j.at("mask_select_rate").get<double>();
  t.mask_replace_rate = j.at("mask_replace_rate").get<double>();
  t.mask_random_rate = j.at("mask_random_rate").get<double>();
  t.mask_keep_rate = j.at("mask_keep_rate").get<double>();
  t.weight_decay = j.at("weight_decay").get<double>();
  t.beta1 = j.at("beta1").get<double>();
  t.beta2 = j.at("beta2").get<double>();
  t.eps = j.at("eps").get<double>();
  t.seed = j.at("seed").get<std::uint64_t>();
  return t;
}

json synth_to_json(const SynthConfig& s) {
  json causal = json::array();
  for (const auto& e : s.causal) causal.push_back({{"index", e.variant_index}, {"beta", e.beta}});
  json epistatic = json::array();
  for (const auto& e : s.epistatic) epistatic.push_back({{"i", e.first}, {"j", e.second}, {"beta", e.beta}});
  return {{"n_samples", s.n_samples},
          {"n_variants", s.n_variants},
          {"maf_range", {s.maf_low, s.maf_high}},
          {"causal", causal},
          {"epistatic", epistatic},
          {"missing_rate", s.missing_rate},
          {"seed", s.seed},
          {"noise_sd", s.noise_sd},
          {"indel_rate", s.indel_rate}};
}

// Besides explicit effects, "planted_causal"/"planted_beta" spread that many
// alternating-sign loci evenly over the variants.
SynthConfig synth_from_json(const json& j) {
  SynthConfig s;
  const json defaults = synth_to_json(s);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key) && key != "planted_causal" && key != "planted_beta")
      invalid("unknown synth key '" + key + "'");
  }
  auto get = [&](const char* key, auto fallback) {
    return j.contains(key) ? j.at(key).get<decltype(fallback)>() : fallback;
  };
  s.n_samples = get("n_samples", s.n_samples);
  s.n_variants = get("n_variants", s.n_variants);
  if (j.contains("maf_range")) {
    const auto range = j.at("maf_range").get<std::vector<double>>();
    if (range.size() != 2) invalid("maf_range needs two values");
    s.maf_low = range[0];
    s.maf_high = range[1];
  }
  s.missing_rate = get("missing_rate", s.missing_rate);
  s.seed = get("seed", s.seed);
  s.noise_sd = get("noise_sd", s.noise_sd);
  s.indel_rate = get("indel_rate", s.indel_rate);
  if (j.contains("causal"))
    for (const auto& e : j.at("causal")) s.causal.push_back({e.at("index").get<std::size_t>(), e.at("beta").get<double>()});
  if (j.contains("epistatic"))
    for (const auto& e : j.at("epistatic"))
      s.epistatic.push_back({e.at("i").get<std::size_t>(), e.at("j").get<std::size_t>(), e.at("beta").get<double>()});
  const auto planted = get("planted_causal", std::size_t{0});
  if (planted > 0) {
    if (!s.causal.empty()) invalid("use either causal or planted_causal, not both");
    s.causal = planted_config(s.n_samples, s.n_variants, planted, get("planted_beta", 3.0), s.seed).causal;
  }
  return s;
}

void check_keys(const json& defaults, const json& user, const std::string& prefix) {
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!defaults.contains(key)) invalid("unknown config key '" + path + "'");
    if (key == "synth") continue;
    if (defaults.at(key).is_object()) {
      if (!value.is_object()) invalid("config key '" + path + "' must be an object");
      check_keys(defaults.at(key), value, path);
    }
  }
}

void merge_into(json& base, const json& user) {
  for (const auto& [key, value] : user.items()) {
    if (key != "synth" && base.contains(key) && base.at(key).is_object() && value.is_object()) {
      merge_into(base[key], value);
    } else {
      base[key] = value;
    }
  }
}

void write_json(const json& j, const fs::path& path) {
  auto out = detail::open_output(path);
  out << j.dump(2) << '\n';
  detail::check_written(out, path);
}

json read_json(const fs::path& path) {
  auto in = detail::open_input(path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
}

void write_provenance(const RunConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  write_json(to_json(config), dir / "provenance.json");
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

// Line-delimited JSON, one record per epoch.
class EpochLog {
 public:
  explicit EpochLog(const fs::path& path) : path_(path), out_(detail::open_output(path)) {}

  void write(const char* stage, const EpochRecord& r) {
    json line = {{"stage", stage},
                 {"epoch", r.epoch},
                 {"train_loss", r.train_loss},
                 {"val_loss", r.val_loss},
                 {"timestamp", timestamp()}};
    out_ << line.dump() << '\n';
    out_.flush();
    detail::check_written(out_, path_);
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

ModelConfig model_config_for(const TokenizedDataset& data, const RunConfig& config) {
  ModelConfig m = config.model;
  m.seq_len = static_cast<int>(data.seq_len());
  if (m.linformer_k > m.seq_len) m.linformer_k = m.seq_len;
  return m;
}

fs::path variants_input(const RunConfig& c) {
  return c.paths.variants.empty() ? Artifacts{c.paths.output_dir}.cohort_dir() / "variants.tsv"
                                  : fs::path(c.paths.variants);
}

fs::path genotypes_input(const RunConfig& c) {
  return c.paths.genotypes.empty() ? Artifacts{c.paths.output_dir}.cohort_dir() / "genotypes.tsv"
                                   : fs::path(c.paths.genotypes);
}

Cohort load_cohort(const RunConfig& config) {
  const auto vpath = variants_input(config);
  const auto gpath = genotypes_input(config);
  require(vpath, "generate");
  require(gpath, "generate");
  return parse_genotypes(gpath, parse_variants(vpath));
}

TokenizedDataset load_tokens(const Artifacts& art) {
  const auto tokens = art.preprocess_dir() / "tokens.bin";
  const auto variants = art.preprocess_dir() / "variants.tsv";
  require(tokens, "preprocess");
  require(variants, "preprocess");
  std::vector<ChromPos> meta;
  for (const auto& v : parse_variants(variants)) meta.push_back({v.chromosome, v.position});
  return read_token_cache(tokens, std::move(meta));
}

json indices_json(const std::vector<std::size_t>& v) { return json(v); }

void write_split(const SplitIndices& s, const fs::path& path) {
  write_json({{"train", indices_json(s.train)}, {"validation", indices_json(s.validation)}, {"test", indices_json(s.test)}},
             path);
}

SplitIndices read_split(const fs::path& path) {
  require(path, "pretrain");
  const json j = read_json(path);
  SplitIndices s;
  s.train = j.at("train").get<std::vector<std::size_t>>();
  s.validation = j.at("validation").get<std::vector<std::size_t>>();
  s.test = j.at("test").get<std::vector<std::size_t>>();
  return s;
}

json fold_metrics_json(const FoldOutcome& o) {
  return {{"fold", o.metrics.fold},
          {"threshold", o.threshold.threshold},
          {"youden_j", o.threshold.j},
          {"auc", o.metrics.auc},
          {"precision", o.metrics.precision},
          {"recall", o.metrics.recall},
          {"f1", o.metrics.f1}};
}

FoldMetrics evaluate(const Model& model, const DataSplit& validation, const DataSplit& test, YoudenResult& threshold,
                     std::vector<double>* test_scores) {
  const auto val_scores = predict_scores(model, validation);
  std::vector<int> val_labels;
  for (std::size_t i = 0; i < validation.size(); ++i) val_labels.push_back(validation.label(i));
  threshold = youden_threshold(val_scores, val_labels);

  auto scores = predict_scores(model, test);
  std::vector<int> labels;
  for (std::size_t i = 0; i < test.size(); ++i) labels.push_back(test.label(i));
  FoldMetrics m;
  m.auc = auc(scores, labels);
  const auto prf = prf_at_threshold(scores, labels, threshold.threshold);
  m.precision = prf.precision;
  m.recall = prf.recall;
  m.f1 = prf.f1;
  if (test_scores) *test_scores = std::move(scores);
  return m;
}

std::string format_number(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

}  // namespace

json to_json(const RunConfig& c) {
  return {{"paths",
           {{"variants", c.paths.variants},
            {"genotypes", c.paths.genotypes},
            {"known_loci", c.paths.known_loci},
            {"output_dir", c.paths.output_dir}}},
          {"model",
           {{"embed_dim", c.model.embed_dim},
            {"n_layers", c.model.n_layers},
            {"n_heads", c.model.n_heads},
            {"linformer_k", c.model.linformer_k},
            {"ffn_dim", c.model.ffn_dim},
            {"init_scale", c.model.init_scale}}},
          {"pretrain", train_to_json(c.pretrain)},
          {"finetune", train_to_json(c.finetune)},
          {"synth", c.synth ? synth_to_json(*c.synth) : json(nullptr)},
          {"maf_threshold", c.maf_threshold},
          {"cv_folds", c.cv_folds},
          {"ig_steps", c.ig_steps},
          {"top_k", c.top_k},
          {"window_bp", c.window_bp},
          {"seed", c.seed},
          {"split_ratios", c.split_ratios},
          {"stratify", c.stratify},
          {"report_source", c.report_source},
          {"ablate",
           {{"layers", c.ablate.layers}, {"heads", c.ablate.heads}, {"maf_thresholds", c.ablate.maf_thresholds}}},
          {"verbose", c.verbose}};
}

RunConfig run_config_from_json(const json& user) {
  if (!user.is_object()) invalid("config must be a JSON object");
  const RunConfig defaults;
  json merged = to_json(defaults);
  check_keys(merged, user, "");
  merge_into(merged, user);
  // ffn_dim tracks 4 * embed_dim unless given explicitly.
  if (!(user.contains("model") && user.at("model").contains("ffn_dim"))) {
    auto& m = merged.at("model");
    if (m.at("embed_dim").is_number_integer()) m["ffn_dim"] = 4 * m.at("embed_dim").get<int>();
  }

  RunConfig c;
  try {
    const auto& p = merged.at("paths");
    c.paths.variants = p.at("variants").get<std::string>();
    c.paths.genotypes = p.at("genotypes").get<std::string>();
    c.paths.known_loci = p.at("known_loci").get<std::string>();
    c.paths.output_dir = p.at("output_dir").get<std::string>();
    const auto& m = merged.at("model");
    c.model.embed_dim = m.at("embed_dim").get<int>();
    c.model.n_layers = m.at("n_layers").get<int>();
    c.model.n_heads = m.at("n_heads").get<int>();
    c.model.linformer_k = m.at("linformer_k").get<int>();
    c.model.ffn_dim = m.at("ffn_dim").get<int>();
    c.model.init_scale = m.at("init_scale").get<double>();
    c.pretrain = train_from_json(merged.at("pretrain"));
    c.finetune = train_from_json(merged.at("finetune"));
    if (!merged.at("synth").is_null()) c.synth = synth_from_json(merged.at("synth"));
    c.maf_threshold = merged.at("maf_threshold").get<double>();
    c.cv_folds = merged.at("cv_folds").get<std::size_t>();
    c.ig_steps = merged.at("ig_steps").get<int>();
    c.top_k = merged.at("top_k").get<std::size_t>();
    c.window_bp = merged.at("window_bp").get<std::int64_t>();
    c.seed = merged.at("seed").get<std::uint64_t>();
    c.split_ratios = merged.at("split_ratios").get<std::array<double, 3>>();
    c.stratify = merged.at("stratify").get<bool>();
    c.report_source = merged.at("report_source").get<std::string>();
    const auto& a = merged.at("ablate");
    c.ablate.layers = a.at("layers").get<std::vector<int>>();
    c.ablate.heads = a.at("heads").get<std::vector<int>>();
    c.ablate.maf_thresholds = a.at("maf_thresholds").get<std::vector<double>>();
    c.verbose = merged.at("verbose").get<bool>();
  } catch (const json::exception& e) {
    invalid(e.what());
  }
  validate(c);
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  require(path, "a config file");
  return run_config_from_json(read_json(path));
}

void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) invalid("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    if (!node->contains(part) || !(*node)[part].is_object()) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

void validate(const RunConfig& c) {
  ModelConfig m = c.model;
  m.seq_len = std::max(1, m.linformer_k);
  validate(m);
  validate(c.pretrain);
  validate(c.finetune);
  if (c.synth) validate(*c.synth);
  if (!(c.maf_threshold >= 0.0 && c.maf_threshold <= 0.5)) invalid("maf_threshold must lie in [0, 0.5]");
  if (c.cv_folds < 2) invalid("cv_folds must be at least 2");
  if (c.ig_steps < 1) invalid("ig_steps must be at least 1");
  if (c.top_k < 1) invalid("top_k must be at least 1");
  if (c.window_bp < 1) invalid("window_bp must be positive");
  if (c.paths.output_dir.empty()) invalid("paths.output_dir must be set");
  for (const auto* input : {&c.paths.variants, &c.paths.genotypes, &c.paths.known_loci})
    if (!input->empty() && !fs::exists(*input)) invalid("input file " + *input + " does not exist");
  if (c.report_source != "attribute" && c.report_source != "cv") invalid("report_source must be attribute or cv");
  double total = 0.0;
  for (double r : c.split_ratios) {
    if (!(r >= 0.0)) invalid("split ratios must be non-negative");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) invalid("split ratios must sum to 1");
  for (int l : c.ablate.layers)
    if (l < 1 || l > 6) invalid("ablate.layers values must lie in 1..6");
  for (int h : c.ablate.heads)
    if (h < 1) invalid("ablate.heads values must be positive");
  for (double t : c.ablate.maf_thresholds)
    if (!(t >= 0.0 && t <= 0.5)) invalid("ablate.maf_thresholds values must lie in [0, 0.5]");
}

FoldSplits cv_fold_splits(const TokenizedDataset& data, const Fold& fold, const RunConfig& config,
                          std::size_t fold_index) {
  std::vector<int> labels;
  for (auto i : fold.train) labels.push_back(data.labels[i]);
  const double train_share = config.split_ratios[0];
  const double val_share = config.split_ratios[1];
  if (!(train_share + val_share > 0.0) || val_share <= 0.0)
    invalid("cv needs a positive validation ratio to carve from the training folds");
  const double val_fraction = val_share / (train_share + val_share);
  const auto inner = split_dataset(labels, {1.0 - val_fraction, val_fraction, 0.0}, config.stratify,
                                   config.seed + 7919 * (fold_index + 1));
  FoldSplits s;
  for (auto i : inner.train) s.train.push_back(fold.train[i]);
  for (auto i : inner.validation) s.validation.push_back(fold.train[i]);
  s.test = fold.validation;
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

FoldOutcome run_fold(const TokenizedDataset& data, const FoldSplits& splits, const RunConfig& config,
                     const ModelConfig& model_config, std::uint64_t model_seed, const FoldOptions& options) {
  const DataSplit train(data, splits.train, SplitTag::Train, options.access_log);
  const DataSplit validation(data, splits.validation, SplitTag::Validation, options.access_log);
  const DataSplit test(data, splits.test, SplitTag::Test, options.access_log);

  FoldOutcome outcome;
  Model model = init_model(model_config, model_seed);
  auto pre = pretrain_mlm(std::move(model), train, validation, config.pretrain, [&](const EpochRecord& r) {
    if (options.on_epoch) options.on_epoch("pretrain", r);
  });
  outcome.pretrain_history = std::move(pre.history);
  auto fine = finetune(std::move(pre.model), train, validation, config.finetune, [&](const EpochRecord& r) {
    if (options.on_epoch) options.on_epoch("finetune", r);
  });
  outcome.finetune_history = std::move(fine.history);
  outcome.model = std::move(fine.model);

  outcome.metrics = evaluate(outcome.model, validation, test, outcome.threshold, &outcome.test_scores);
  if (options.attribute) {
    const Matrix baseline = mean_embedding_baseline(train, outcome.model);
    const Matrix scores = attribute_split(test, baseline, outcome.model, kRiskClass, config.ig_steps);
    outcome.attributions = aggregate_carriers(scores, test);
  }
  return outcome;
}

void run_generate(const RunConfig& config) {
  if (!config.synth) invalid("`generate` needs a synth section in the config");
  const Artifacts art{config.paths.output_dir};
  const auto dir = art.cohort_dir();
  fs::create_directories(dir);
  log(config, "generating synthetic cohort");
  const auto synthetic = generate_cohort(*config.synth);
  write_variants(synthetic.cohort.variants(), dir / "variants.tsv");
  write_cohort(synthetic.cohort, dir / "genotypes.tsv");
  write_ground_truth(synthetic.truth, dir / "truth.tsv");
  write_json(synth_to_json(*config.synth), dir / "synth_config.json");

  std::vector<int> labels;
  for (const auto& s : synthetic.cohort.samples()) labels.push_back(s.label);
  json summary = {{"n_samples", synthetic.cohort.n_samples()}, {"n_variants", synthetic.cohort.n_variants()}};
  try {
    summary["oracle_auc"] = auc(oracle_bayes_scores(synthetic.cohort, synthetic.truth), labels);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingleClass) throw;
  }
  write_json(summary, dir / "summary.json");
  write_provenance(config, dir);
}

void run_preprocess(const RunConfig& config) {
  const Artifacts art{config.paths.output_dir};
  const auto cohort = load_cohort(config);
  const auto filtered = filter_by_maf(cohort, config.maf_threshold);
  log(config, "kept " + std::to_string(filtered.n_variants()) + " of " + std::to_string(cohort.n_variants()) +
                  " variants at MAF >= " + format_number(config.maf_threshold));
  const auto tokenized = tokenize_cohort(filtered);
  const auto dir = art.preprocess_dir();
  fs::create_directories(dir);
  write_token_cache(tokenized.dataset, dir / "tokens.bin");
  write_variants(filtered.variants(), dir / "variants.tsv");
  write_json({{"n_samples", filtered.n_samples()},
              {"n_variants_in", cohort.n_variants()},
              {"n_variants_kept", filtered.n_variants()},
              {"maf_threshold", config.maf_threshold},
              {"unknown_token_fallbacks", tokenized.unknown_token_fallbacks}},
             dir / "summary.json");
  write_provenance(config, dir);
}

void run_pretrain(const RunConfig& config) {
  const Artifacts art{config.paths.output_dir};
  const auto data = load_tokens(art);
  const auto split = split_dataset(data.labels, config.split_ratios, config.stratify, config.seed);
  const auto dir = art.pretrain_dir();
  fs::create_directories(dir);
  write_split(split, dir / "split.json");

  const DataSplit train(data, split.train, SplitTag::Train);
  const DataSplit validation(data, split.validation, SplitTag::Validation);
  EpochLog epochs(dir / "metrics.jsonl");
  auto result = pretrain_mlm(init_model(model_config_for(data, config), config.seed), train, validation,
                             config.pretrain, [&](const EpochRecord& r) {
                               epochs.write("pretrain", r);
                               log(config, "pretrain epoch " + std::to_string(r.epoch) + " train " +
                                               format_number(r.train_loss) + " val " + format_number(r.val_loss));
                             });
  save_checkpoint(result.model, dir / "model.ckpt");
  write_provenance(config, dir);
}

void run_finetune(const RunConfig& config) {
  const Artifacts art{config.paths.output_dir};
  const auto data = load_tokens(art);
  const auto split = read_split(art.pretrain_dir() / "split.json");
  require(art.pretrain_dir() / "model.ckpt", "pretrain");
  Model model = load_checkpoint(art.pretrain_dir() / "model.ckpt", model_config_for(data, config));

  const DataSplit train(data, split.train, SplitTag::Train);
  const DataSplit validation(data, split.validation, SplitTag::Validation);
  const DataSplit test(data, split.test, SplitTag::Test);
  const auto dir = art.finetune_dir();
  fs::create_directories(dir);
  EpochLog epochs(dir / "metrics.jsonl");
  auto result = finetune(std::move(model), train, validation, config.finetune, [&](const EpochRecord& r) {
    epochs.write("finetune", r);
    log(config, "finetune epoch " + std::to_string(r.epoch) + " train " + format_number(r.train_loss) + " val " +
                    format_number(r.val_loss));
  });
  save_checkpoint(result.model, dir / "model.ckpt");

  YoudenResult threshold;
  const auto metrics = evaluate(result.model, validation, test, threshold, nullptr);
  write_json({{"best_epoch", result.best_epoch},
              {"threshold", threshold.threshold},
              {"youden_j", threshold.j},
              {"test_auc", metrics.auc},
              {"test_precision", metrics.precision},
              {"test_recall", metrics.recall},
              {"test_f1", metrics.f1}},
             dir / "evaluation.json");
  log(config, "test AUC " + format_number(metrics.auc));
  write_provenance(config, dir);
}

void run_attribute(const RunConfig& config) {
  const Artifacts art{config.paths.output_dir};
  const auto data = load_tokens(art);
  const auto split = read_split(art.pretrain_dir() / "split.json");
  require(art.finetune_dir() / "model.ckpt", "finetune");
  const Model model = load_checkpoint(art.finetune_dir() / "model.ckpt", model_config_for(data, config));
  const DataSplit train(data, split.train, SplitTag::Train);
  const DataSplit test(data, split.test, SplitTag::Test);

  log(config, "attributing " + std::to_string(test.size()) + " test samples");
  const Matrix baseline = mean_embedding_baseline(train, model);
  const Matrix scores = attribute_split(test, baseline, model, kRiskClass, config.ig_steps);
  const auto table = aggregate_carriers(scores, test);
  const auto dir = art.attribute_dir();
  fs::create_directories(dir);
  write_attribution_table(table, dir / "attributions.tsv");
  write_provenance(config, dir);
}

void run_report(const RunConfig& config) {
  const Artifacts art{config.paths.output_dir};
  const bool from_cv = config.report_source == "cv";
  const auto source = from_cv ? art.cv_dir() / "attributions.tsv" : art.attribute_dir() / "attributions.tsv";
  require(source, from_cv ? "cv" : "attribute");
  const auto table = read_attribution_table(source);

  const auto dir = art.report_dir();
  fs::create_directories(dir);
  const auto positive = top_k_per_chromosome(table, config.top_k, AttributionSign::Positive);
  const auto negative = top_k_per_chromosome(table, config.top_k, AttributionSign::Negative);
  write_attribution_table(positive, dir / "top_positive.tsv");
  write_attribution_table(negative, dir / "top_negative.tsv");

  const auto pos_points = manhattan_points(table, AttributionSign::Positive);
  const auto neg_points = manhattan_points(table, AttributionSign::Negative);
  write_manhattan(pos_points, dir / "manhattan_positive.tsv");
  write_manhattan(neg_points, dir / "manhattan_negative.tsv");
  write_manhattan_svg(pos_points, dir / "manhattan_positive.svg", "Positive attribution");
  write_manhattan_svg(neg_points, dir / "manhattan_negative.svg", "Negative attribution");

  if (!config.paths.known_loci.empty()) {
    const auto known = parse_known_loci(fs::path(config.paths.known_loci));
    write_matches(proximity_match(positive, known, config.window_bp), dir / "matches.tsv");
  }
  write_provenance(config, dir);
}

void run_cv(const RunConfig& config) {
  const Artifacts art{config.paths.output_dir};
  const auto data = load_tokens(art);
  const auto plan = kfold_partition(data.labels, config.cv_folds, config.stratify, config.seed);
  const auto model_config = model_config_for(data, config);
  const auto dir = art.cv_dir();
  fs::create_directories(dir);

  std::vector<FoldMetrics> metrics;
  std::vector<AttributionTable> tables;
  json fold_records = json::array();
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto fold_dir = dir / ("fold_" + std::to_string(f + 1));
    fs::create_directories(fold_dir);
    log(config, "fold " + std::to_string(f + 1) + " of " + std::to_string(plan.folds.size()));
    const auto splits = cv_fold_splits(data, plan.folds[f], config, f);
    EpochLog epochs(fold_dir / "metrics.jsonl");
    FoldOptions options;
    options.on_epoch = [&](const char* stage, const EpochRecord& r) { epochs.write(stage, r); };
    auto outcome = run_fold(data, splits, config, model_config, config.seed + 1000 * (f + 1), options);
    outcome.metrics.fold = static_cast<int>(f + 1);
    save_checkpoint(outcome.model, fold_dir / "model.ckpt");
    write_attribution_table(outcome.attributions, fold_dir / "attributions.tsv");
    write_json(fold_metrics_json(outcome), fold_dir / "fold_metrics.json");
    fold_records.push_back(fold_metrics_json(outcome));
    log(config, "fold " + std::to_string(f + 1) + " test AUC " + format_number(outcome.metrics.auc));
    metrics.push_back(outcome.metrics);
    tables.push_back(std::move(outcome.attributions));
  }
  write_metrics_report(metrics, dir / "metrics_report.tsv");
  write_attribution_table(aggregate_folds(tables), dir / "attributions.tsv");
  write_provenance(config, dir);
}

void run_ablate(const RunConfig& config) {
  for (int h : config.ablate.heads)
    if (config.model.embed_dim % h != 0) invalid("ablate.heads values must divide model.embed_dim");
  const Artifacts art{config.paths.output_dir};
  const auto cohort = load_cohort(config);
  const auto dir = art.ablate_dir();
  fs::create_directories(dir);
  auto out = detail::open_output(dir / "summary.tsv");
  out << "axis\tvalue\tn_layers\tn_heads\tmaf_threshold\tn_variants\tauc\tprecision\trecall\tf1\n";

  auto run_point = [&](const std::string& axis, const std::string& value, int layers, int heads, double maf) {
    const auto tokenized = tokenize_cohort(filter_by_maf(cohort, maf)).dataset;
    ModelConfig model_config = model_config_for(tokenized, config);
    model_config.n_layers = layers;
    model_config.n_heads = heads;
    const auto s = split_dataset(tokenized.labels, config.split_ratios, config.stratify, config.seed);
    FoldOptions options;
    options.attribute = false;
    log(config, "ablation " + axis + "=" + value);
    const auto outcome = run_fold(tokenized, {s.train, s.validation, s.test}, config, model_config, config.seed,
                                  options);
    out << axis << '\t' << value << '\t' << layers << '\t' << heads << '\t' << format_number(maf) << '\t'
        << tokenized.variant_meta.size() << '\t' << format_number(outcome.metrics.auc) << '\t'
        << format_number(outcome.metrics.precision) << '\t' << format_number(outcome.metrics.recall) << '\t'
        << format_number(outcome.metrics.f1) << '\n';
    out.flush();
  };
  for (int layers : config.ablate.layers)
    run_point("layers", std::to_string(layers), layers, 1, config.maf_threshold);
  for (int heads : config.ablate.heads)
    run_point("heads", std::to_string(heads), 1, heads, config.maf_threshold);
  for (double maf : config.ablate.maf_thresholds)
    run_point("maf", format_number(maf), config.model.n_layers, config.model.n_heads, maf);
  detail::check_written(out, dir / "summary.tsv");
  write_provenance(config, dir);
}

void run_all(const RunConfig& config) {
  if (config.synth) run_generate(config);
  run_preprocess(config);
  run_pretrain(config);
  run_finetune(config);
  run_attribute(config);
  run_report(config);
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"generate", "preprocess", "pretrain", "finetune", "cv",
                                              "attribute", "report",     "ablate",   "all"};
  return names;
}

void run_subcommand(const std::string& name, const RunConfig& config) {
  if (name == "generate") return run_generate(config);
  if (name == "preprocess") return run_preprocess(config);
  if (name == "pretrain") return run_pretrain(config);
  if (name == "finetune") return run_finetune(config);
  if (name == "cv") return run_cv(config);
  if (name == "attribute") return run_attribute(config);
  if (name == "report") return run_report(config);
  if (name == "ablate") return run_ablate(config);
  if (name == "all") return run_all(config);
  invalid("unknown subcommand '" + name + "'");
}

void configure_threads() {
#ifdef _OPENMP
  if (const char* env = std::getenv("HEMERA_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
#endif
}

}  // namespace hemera
