#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hemera/genotype_io.hpp"

namespace hemera {

struct CausalEffect {
  std::size_t variant_index = 0;
  double beta = 0.0;
};

struct EpistaticEffect {
  std::size_t first = 0;
  std::size_t second = 0;
  double beta = 0.0;
};

struct SynthConfig {
  std::size_t n_samples = 2000;
  std::size_t n_variants = 1000;
  double maf_low = 0.1;
  double maf_high = 0.4;
  std::vector<CausalEffect> causal;
  std::vector<EpistaticEffect> epistatic;
  double missing_rate = 0.0;
  std::uint64_t seed = 1;
  // Scale of the liability noise term; 0 makes labels a deterministic function
  // of the genotypes.
  double noise_sd = 1.0;
  // Fraction of variants generated as multi-nucleotide/deletion sites.
  double indel_rate = 0.05;
};

struct GroundTruth {
  std::vector<CausalEffect> causal;
  std::vector<EpistaticEffect> epistatic;
  std::vector<double> drawn_maf;      // per variant
  std::vector<double> genetic_value;  // noiseless liability per sample
  std::vector<double> liability;      // genetic_value + noise
};

struct SyntheticCohort {
  Cohort cohort;
  GroundTruth truth;
};

void validate(const SynthConfig& config);
SyntheticCohort generate_cohort(const SynthConfig& config);

// The Bayes-optimal score: the noiseless liability of each sample.
std::vector<double> oracle_bayes_scores(const Cohort& cohort, const GroundTruth& truth);

// `variant_index beta` per causal variant (header included).
void write_ground_truth(const GroundTruth& truth, const std::filesystem::path& path);

// Benchmark cohort: `n_causal` planted loci with |beta| = 3 and
// alternating sign, spread evenly over the variant range.
SynthConfig planted_config(std::size_t n_samples, std::size_t n_variants, std::size_t n_causal,
                           double beta, std::uint64_t seed);

}  // namespace hemera
