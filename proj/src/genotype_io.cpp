#include "hemera/genotype_io.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

#include "hemera/error.hpp"
#include "text_util.hpp"

namespace hemera {

using detail::LineReader;
using detail::parse_int;
using detail::split_tabs;

namespace {

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line) + ": " + what);
}

bool position_less(const Variant& a, const Variant& b) {
  return std::pair(a.chromosome, a.position) < std::pair(b.chromosome, b.position);
}

// Call alleles use `-` for a deletion; the variant file spells it DEL.
std::string canonical_call_allele(std::string_view text) {
  if (text == "-") return "DEL";
  return std::string(text);
}

std::string call_allele_text(const std::string& allele) {
  return allele == "DEL" ? "-" : allele;
}

Allele resolve_allele(const std::string& allele, const Variant& v, std::size_t line) {
  if (allele == v.major_allele) return Allele::Major;
  if (allele == v.minor_allele) return Allele::Minor;
  throw Error(ErrorCode::AlleleMismatch, "line " + std::to_string(line) + ": allele '" + allele +
                                             "' is neither " + v.major_allele + " nor " +
                                             v.minor_allele + " at " + v.id);
}

}  // namespace

Cohort::Cohort(std::vector<Variant> variants, std::vector<Sample> samples,
               std::vector<GenotypeCall> calls)
    : variants_(std::move(variants)), samples_(std::move(samples)), calls_(std::move(calls)) {
  if (calls_.size() != variants_.size() * samples_.size())
    throw Error(ErrorCode::ColumnCountMismatch, "call matrix does not match samples x variants");
  for (std::size_t i = 1; i < variants_.size(); ++i) {
    if (!position_less(variants_[i - 1], variants_[i]))
      throw Error(ErrorCode::UnsortedInput, "variants not strictly increasing at " + variants_[i].id);
  }
  for (const auto& s : samples_) {
    if (s.label != 0 && s.label != 1)
      throw Error(ErrorCode::LabelNotBinary, "sample " + s.id);
  }
  for (const auto& c : calls_) {
    if ((c.allele1 == Allele::Missing) != (c.allele2 == Allele::Missing))
      throw Error(ErrorCode::MalformedLine, "half-missing genotype call");
  }
}

int parse_chromosome(const std::string& text) {
  if (text == "X") return 23;
  if (text == "Y") return 24;
  if (text == "XY") return 25;
  if (text == "MT") return 26;
  auto value = parse_int<int>(text);
  if (!value || *value < 1 || *value > kMaxChromosome) return 0;
  return *value;
}

bool valid_allele(const std::string& allele) {
  if (allele == "INS" || allele == "DEL") return true;
  if (allele.empty()) return false;
  return std::all_of(allele.begin(), allele.end(),
                     [](char c) { return c == 'A' || c == 'C' || c == 'G' || c == 'T'; });
}

std::vector<Variant> parse_variants(std::istream& in, bool strict_sort) {
  LineReader reader(in);
  std::string line;
  if (!reader.next(line)) return {};
  const auto header = split_tabs(line);
  const std::vector<std::string_view> expected{"chrom", "pos", "id", "major", "minor"};
  if (header != expected) malformed(reader.number(), "expected header 'chrom pos id major minor'");

  std::vector<Variant> variants;
  std::set<std::pair<int, std::int64_t>> seen;
  while (reader.next(line)) {
    const auto fields = split_tabs(line);
    if (fields.size() != 5) malformed(reader.number(), "expected 5 columns");
    Variant v;
    v.chromosome = parse_chromosome(std::string(fields[0]));
    if (v.chromosome == 0) malformed(reader.number(), "bad chromosome");
    auto pos = parse_int<std::int64_t>(fields[1]);
    if (!pos || *pos < 1) malformed(reader.number(), "position must be a positive integer");
    v.position = *pos;
    v.id = std::string(fields[2]);
    v.major_allele = std::string(fields[3]);
    v.minor_allele = std::string(fields[4]);
    if (v.id.empty()) malformed(reader.number(), "empty id");
    if (!valid_allele(v.major_allele) || !valid_allele(v.minor_allele))
      malformed(reader.number(), "invalid allele");
    if (v.major_allele == v.minor_allele) malformed(reader.number(), "major equals minor allele");
    if (!seen.emplace(v.chromosome, v.position).second)
      throw Error(ErrorCode::DuplicatePosition,
                  "line " + std::to_string(reader.number()) + ": duplicate " +
                      std::to_string(v.chromosome) + ":" + std::to_string(v.position));
    if (strict_sort && !variants.empty() && !position_less(variants.back(), v))
      throw Error(ErrorCode::UnsortedInput, "line " + std::to_string(reader.number()));
    variants.push_back(std::move(v));
  }
  return variants;
}

std::vector<Variant> parse_variants(const std::filesystem::path& path, bool strict_sort) {
  auto in = detail::open_input(path);
  return parse_variants(in, strict_sort);
}

Cohort parse_genotypes(std::istream& in, const std::vector<Variant>& variants) {
  const std::size_t n_var = variants.size();
  std::vector<std::size_t> order(n_var);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return position_less(variants[a], variants[b]);
  });

  LineReader reader(in);
  std::string line;
  std::vector<Sample> samples;
  std::vector<GenotypeCall> calls;
  std::vector<GenotypeCall> row(n_var);
  while (reader.next(line)) {
    const auto fields = split_tabs(line);
    if (fields.size() != n_var + 2)
      throw Error(ErrorCode::ColumnCountMismatch,
                  "line " + std::to_string(reader.number()) + ": expected " +
                      std::to_string(n_var + 2) + " columns, found " + std::to_string(fields.size()));
    Sample s;
    s.id = std::string(fields[0]);
    if (fields[1] == "0") {
      s.label = 0;
    } else if (fields[1] == "1") {
      s.label = 1;
    } else {
      throw Error(ErrorCode::LabelNotBinary,
                  "line " + std::to_string(reader.number()) + ": label '" + std::string(fields[1]) + "'");
    }
    for (std::size_t j = 0; j < n_var; ++j) {
      const auto text = fields[j + 2];
      if (text == "./.") {
        row[j] = GenotypeCall{};
        continue;
      }
      const auto slash = text.find('/');
      if (slash == std::string_view::npos || text.find('/', slash + 1) != std::string_view::npos)
        malformed(reader.number(), "bad call '" + std::string(text) + "'");
      const auto a = canonical_call_allele(text.substr(0, slash));
      const auto b = canonical_call_allele(text.substr(slash + 1));
      if (a == "." || b == ".") malformed(reader.number(), "half-missing call");
      row[j] = GenotypeCall{resolve_allele(a, variants[j], reader.number()),
                            resolve_allele(b, variants[j], reader.number())};
    }
    for (std::size_t j = 0; j < n_var; ++j) calls.push_back(row[order[j]]);
    samples.push_back(std::move(s));
  }

  std::vector<Variant> sorted;
  sorted.reserve(n_var);
  for (auto idx : order) sorted.push_back(variants[idx]);
  return Cohort(std::move(sorted), std::move(samples), std::move(calls));
}

Cohort parse_genotypes(const std::filesystem::path& path, const std::vector<Variant>& variants) {
  auto in = detail::open_input(path);
  return parse_genotypes(in, variants);
}

KnownLociList parse_known_loci(std::istream& in) {
  LineReader reader(in);
  std::string line;
  KnownLociList loci;
  while (reader.next(line)) {
    const auto fields = split_tabs(line);
    if (fields.size() != 3) malformed(reader.number(), "expected 'chrom pos source'");
    KnownLocus locus;
    locus.chromosome = parse_chromosome(std::string(fields[0]));
    if (locus.chromosome == 0) malformed(reader.number(), "bad chromosome");
    auto pos = parse_int<std::int64_t>(fields[1]);
    if (!pos || *pos < 1) malformed(reader.number(), "position must be a positive integer");
    locus.position = *pos;
    locus.source = std::string(fields[2]);
    loci.push_back(std::move(locus));
  }
  return loci;
}

KnownLociList parse_known_loci(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return parse_known_loci(in);
}

double compute_maf(const Cohort& cohort, std::size_t variant_index) {
  if (variant_index >= cohort.n_variants())
    throw Error(ErrorCode::ShapeMismatch, "variant index out of range");
  std::size_t minor = 0;
  std::size_t called = 0;
  for (std::size_t s = 0; s < cohort.n_samples(); ++s) {
    const auto& c = cohort.call(s, variant_index);
    if (c.missing()) continue;
    ++called;
    minor += static_cast<std::size_t>(c.minor_dosage());
  }
  if (called == 0)
    throw Error(ErrorCode::AllMissing, "no called genotypes at " + cohort.variants()[variant_index].id);
  const std::size_t total = 2 * called;
  return static_cast<double>(std::min(minor, total - minor)) / static_cast<double>(total);
}

Cohort filter_by_maf(const Cohort& cohort, double threshold) {
  if (threshold < 0.0 || threshold > 0.5)
    throw Error(ErrorCode::ConfigInvalid, "MAF threshold must lie in [0, 0.5]");
  std::vector<std::size_t> keep;
  for (std::size_t v = 0; v < cohort.n_variants(); ++v) {
    try {
      if (compute_maf(cohort, v) >= threshold) keep.push_back(v);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllMissing) throw;
    }
  }
  std::vector<Variant> variants;
  for (auto v : keep) variants.push_back(cohort.variants()[v]);
  std::vector<GenotypeCall> calls;
  calls.reserve(keep.size() * cohort.n_samples());
  for (std::size_t s = 0; s < cohort.n_samples(); ++s)
    for (auto v : keep) calls.push_back(cohort.call(s, v));
  return Cohort(std::move(variants), cohort.samples(), std::move(calls));
}

void write_variants(const std::vector<Variant>& variants, std::ostream& out) {
  out << "chrom\tpos\tid\tmajor\tminor\n";
  for (const auto& v : variants)
    out << v.chromosome << '\t' << v.position << '\t' << v.id << '\t' << v.major_allele << '\t'
        << v.minor_allele << '\n';
}

void write_variants(const std::vector<Variant>& variants, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  write_variants(variants, out);
  detail::check_written(out, path);
}

void write_cohort(const Cohort& cohort, std::ostream& out) {
  const auto& variants = cohort.variants();
  std::string line;
  for (std::size_t s = 0; s < cohort.n_samples(); ++s) {
    line = cohort.samples()[s].id;
    line += '\t';
    line += cohort.samples()[s].label == 1 ? '1' : '0';
    for (std::size_t v = 0; v < variants.size(); ++v) {
      const auto& c = cohort.call(s, v);
      line += '\t';
      if (c.missing()) {
        line += "./.";
        continue;
      }
      auto text = [&](Allele a) {
        return call_allele_text(a == Allele::Major ? variants[v].major_allele : variants[v].minor_allele);
      };
      line += text(c.allele1);
      line += '/';
      line += text(c.allele2);
    }
    line += '\n';
    out << line;
  }
}

void write_cohort(const Cohort& cohort, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  write_cohort(cohort, out);
  detail::check_written(out, path);
}

void write_known_loci(const KnownLociList& loci, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const auto& l : loci) out << l.chromosome << '\t' << l.position << '\t' << l.source << '\n';
  detail::check_written(out, path);
}

}  // namespace hemera
