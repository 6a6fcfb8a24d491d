#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hemera {

// Chromosomes are numbered 1..26 with PLINK's convention for the
// non-autosomal codes: 23=X, 24=Y, 25=XY, 26=MT.
inline constexpr int kMaxChromosome = 26;

struct Variant {
  int chromosome = 0;
  std::int64_t position = 0;
  std::string id;
  std::string major_allele;
  std::string minor_allele;

  friend bool operator==(const Variant&, const Variant&) = default;
};

// Alleles of a call are stored relative to the owning variant, which keeps the
// matrix compact and makes the "allele must be major or minor" invariant hold
// by construction.
enum class Allele : std::uint8_t { Major = 0, Minor = 1, Missing = 0xFF };

struct GenotypeCall {
  Allele allele1 = Allele::Missing;
  Allele allele2 = Allele::Missing;

  bool missing() const { return allele1 == Allele::Missing; }
  int minor_dosage() const {
    return (allele1 == Allele::Minor ? 1 : 0) + (allele2 == Allele::Minor ? 1 : 0);
  }

  friend bool operator==(const GenotypeCall&, const GenotypeCall&) = default;
};

struct Sample {
  std::string id;
  int label = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

class Cohort {
 public:
  Cohort() = default;
  // Throws MalformedLine/UnsortedInput/LabelNotBinary/ColumnCountMismatch when
  // the invariants do not hold.
  Cohort(std::vector<Variant> variants, std::vector<Sample> samples, std::vector<GenotypeCall> calls);

  const std::vector<Variant>& variants() const { return variants_; }
  const std::vector<Sample>& samples() const { return samples_; }
  std::size_t n_variants() const { return variants_.size(); }
  std::size_t n_samples() const { return samples_.size(); }

  const GenotypeCall& call(std::size_t sample, std::size_t variant) const {
    return calls_[sample * variants_.size() + variant];
  }
  const std::vector<GenotypeCall>& calls() const { return calls_; }

  friend bool operator==(const Cohort&, const Cohort&) = default;

 private:
  std::vector<Variant> variants_;
  std::vector<Sample> samples_;
  std::vector<GenotypeCall> calls_;  // row-major, samples x variants
};

struct KnownLocus {
  int chromosome = 0;
  std::int64_t position = 0;
  std::string source;

  friend bool operator==(const KnownLocus&, const KnownLocus&) = default;
};

using KnownLociList = std::vector<KnownLocus>;

int parse_chromosome(const std::string& text);
bool valid_allele(const std::string& allele);

std::vector<Variant> parse_variants(std::istream& in, bool strict_sort = false);
std::vector<Variant> parse_variants(const std::filesystem::path& path, bool strict_sort = false);

// Columns follow the order of `variants`; the returned cohort is re-sorted by
// (chromosome, position) together with its calls.
Cohort parse_genotypes(std::istream& in, const std::vector<Variant>& variants);
Cohort parse_genotypes(const std::filesystem::path& path, const std::vector<Variant>& variants);

KnownLociList parse_known_loci(std::istream& in);
KnownLociList parse_known_loci(const std::filesystem::path& path);

double compute_maf(const Cohort& cohort, std::size_t variant_index);
Cohort filter_by_maf(const Cohort& cohort, double threshold);

void write_variants(const std::vector<Variant>& variants, std::ostream& out);
void write_variants(const std::vector<Variant>& variants, const std::filesystem::path& path);
void write_cohort(const Cohort& cohort, std::ostream& out);
void write_cohort(const Cohort& cohort, const std::filesystem::path& path);
void write_known_loci(const KnownLociList& loci, const std::filesystem::path& path);

}  // namespace hemera
