#include "hemera/synth.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "hemera/error.hpp"
#include "text_util.hpp"

namespace hemera {

namespace {

constexpr char kBases[4] = {'A', 'C', 'G', 'T'};
constexpr int kAutosomes = 22;

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

}  // namespace

void validate(const SynthConfig& c) {
  if (c.n_samples == 0) invalid("n_samples must be positive");
  if (c.n_variants == 0) invalid("n_variants must be positive");
  if (!(c.maf_low >= 0.01 && c.maf_low <= c.maf_high && c.maf_high <= 0.5))
    invalid("maf_range must satisfy 0.01 <= low <= high <= 0.5");
  if (!(c.missing_rate >= 0.0 && c.missing_rate <= 0.1)) invalid("missing_rate must lie in [0, 0.1]");
  if (!(c.noise_sd >= 0.0)) invalid("noise_sd must be non-negative");
  if (!(c.indel_rate >= 0.0 && c.indel_rate <= 1.0)) invalid("indel_rate must lie in [0, 1]");
  std::set<std::size_t> seen;
  for (const auto& e : c.causal) {
    if (e.variant_index >= c.n_variants) invalid("causal index out of range");
    if (!seen.insert(e.variant_index).second) invalid("duplicate causal index");
  }
  for (const auto& e : c.epistatic) {
    if (e.first >= c.n_variants || e.second >= c.n_variants) invalid("epistatic index out of range");
  }
}

SyntheticCohort generate_cohort(const SynthConfig& config) {
  validate(config);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> base(0, 3);
  std::uniform_int_distribution<std::int64_t> gap(5'000, 500'000);

  const std::size_t n_var = config.n_variants;
  const std::size_t n = config.n_samples;

  std::vector<Variant> variants(n_var);
  int chrom = 0;
  std::int64_t pos = 0;
  for (std::size_t v = 0; v < n_var; ++v) {
    const int c = 1 + static_cast<int>((v * kAutosomes) / n_var);
    if (c != chrom) {
      chrom = c;
      pos = 10'000 + gap(rng);
    } else {
      pos += gap(rng);
    }
    auto& var = variants[v];
    var.chromosome = chrom;
    var.position = pos;
    var.id = "snp" + std::to_string(v + 1);
    if (unit(rng) < config.indel_rate) {
      const int extra = 1 + base(rng);
      var.major_allele = std::string(1, kBases[base(rng)]);
      for (int i = 0; i < extra; ++i) var.major_allele += kBases[base(rng)];
      var.minor_allele = "DEL";
    } else {
      const int a = base(rng);
      const int b = (a + 1 + std::uniform_int_distribution<int>(0, 2)(rng)) % 4;
      var.major_allele = std::string(1, kBases[a]);
      var.minor_allele = std::string(1, kBases[b]);
    }
  }

  GroundTruth truth;
  truth.causal = config.causal;
  truth.epistatic = config.epistatic;
  truth.drawn_maf.resize(n_var);
  std::uniform_real_distribution<double> maf_dist(config.maf_low, config.maf_high);
  for (auto& m : truth.drawn_maf) m = config.maf_low == config.maf_high ? config.maf_low : maf_dist(rng);

  // Hardy-Weinberg: two independent allele draws per call.
  std::vector<std::uint8_t> dosage(n * n_var);
  std::vector<GenotypeCall> calls(n * n_var);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t v = 0; v < n_var; ++v) {
      const double p = truth.drawn_maf[v];
      const bool m1 = unit(rng) < p;
      const bool m2 = unit(rng) < p;
      const bool hidden = config.missing_rate > 0.0 && unit(rng) < config.missing_rate;
      dosage[s * n_var + v] = static_cast<std::uint8_t>(m1 + m2);
      if (!hidden)
        calls[s * n_var + v] = {m1 ? Allele::Minor : Allele::Major, m2 ? Allele::Minor : Allele::Major};
    }
  }

  std::normal_distribution<double> noise(0.0, 1.0);
  truth.genetic_value.assign(n, 0.0);
  truth.liability.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    double g = 0.0;
    for (const auto& e : config.causal) g += e.beta * dosage[s * n_var + e.variant_index];
    for (const auto& e : config.epistatic)
      g += e.beta * dosage[s * n_var + e.first] * dosage[s * n_var + e.second];
    truth.genetic_value[s] = g;
    truth.liability[s] = g + config.noise_sd * noise(rng);
  }

  // Median split: the top half of liabilities are cases.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return truth.liability[a] > truth.liability[b]; });
  std::vector<Sample> samples(n);
  for (std::size_t s = 0; s < n; ++s) samples[s].id = "sample" + std::to_string(s + 1);
  for (std::size_t r = 0; r < n / 2; ++r) samples[order[r]].label = 1;

  return {Cohort(std::move(variants), std::move(samples), std::move(calls)), std::move(truth)};
}

std::vector<double> oracle_bayes_scores(const Cohort& cohort, const GroundTruth& truth) {
  if (truth.genetic_value.size() != cohort.n_samples() || truth.drawn_maf.size() != cohort.n_variants())
    throw Error(ErrorCode::Mismatch, "ground truth does not describe this cohort");
  return truth.genetic_value;
}

void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out.precision(17);
  out << "variant_index\tbeta\n";
  for (const auto& e : truth.causal) out << e.variant_index << '\t' << e.beta << '\n';
  detail::check_written(out, path);
}

SynthConfig planted_config(std::size_t n_samples, std::size_t n_variants, std::size_t n_causal,
                           double beta, std::uint64_t seed) {
  SynthConfig c;
  c.n_samples = n_samples;
  c.n_variants = n_variants;
  c.seed = seed;
  for (std::size_t i = 0; i < n_causal; ++i) {
    const std::size_t index = (2 * i + 1) * n_variants / (2 * n_causal);
    c.causal.push_back({index, (i % 2 == 0) ? beta : -beta});
  }
  return c;
}

}  // namespace hemera
