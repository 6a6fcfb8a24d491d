#include <doctest.h>

#include <random>
#include <sstream>

#include "hemera/error.hpp"
#include "hemera/genotype_io.hpp"
#include "test_support.hpp"

using namespace hemera;

namespace {

const char* kHeader = "chrom\tpos\tid\tmajor\tminor\n";

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::IoFailure;
}

std::vector<Variant> variants_from(const std::string& body) {
  std::istringstream in(std::string(kHeader) + body);
  return parse_variants(in);
}

Cohort cohort_from(const std::vector<Variant>& variants, const std::string& body) {
  std::istringstream in(body);
  return parse_genotypes(in, variants);
}

Cohort random_cohort(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_var(0, 6), n_samp(1, 5), coin(0, 3);
  const char* alleles[] = {"A", "C", "G", "T", "GATT", "DEL", "INS"};
  std::vector<Variant> variants;
  const int nv = n_var(rng);
  for (int v = 0; v < nv; ++v) {
    const int a = static_cast<int>(rng() % 7);
    int b = static_cast<int>(rng() % 7);
    if (b == a) b = (a + 1) % 7;
    variants.push_back({1 + v / 3, 100 + 50 * v, "v" + std::to_string(v), alleles[a], alleles[b]});
  }
  std::vector<Sample> samples;
  std::vector<GenotypeCall> calls;
  const int ns = n_samp(rng);
  for (int s = 0; s < ns; ++s) {
    samples.push_back({"s" + std::to_string(s), s % 2});
    for (int v = 0; v < nv; ++v) {
      const int r = coin(rng);
      if (r == 0) calls.push_back({});
      else
        calls.push_back({rng() % 2 ? Allele::Major : Allele::Minor, rng() % 2 ? Allele::Major : Allele::Minor});
    }
  }
  return Cohort(std::move(variants), std::move(samples), std::move(calls));
}

}  // namespace

TEST_CASE("parse_variants reads rows in file order") {
  const auto v = variants_from("1\t160386089\tv1\tA\tG\n");
  REQUIRE(v.size() == 1);
  CHECK(v[0] == Variant{1, 160386089, "v1", "A", "G"});
  CHECK(variants_from("").empty());

  const auto two = variants_from("2\t5\tb\tC\tT\n1\t7\ta\tGATT\tDEL\n");
  REQUIRE(two.size() == 2);
  CHECK(two[0].id == "b");
  CHECK(two[1].major_allele == "GATT");
}

TEST_CASE("parse_variants rejects malformed rows") {
  CHECK(code_of([] { variants_from("1\t0\tv\tA\tG\n"); }) == ErrorCode::MalformedLine);
  CHECK(code_of([] { variants_from("1\t-3\tv\tA\tG\n"); }) == ErrorCode::MalformedLine);
  CHECK(code_of([] { variants_from("1\t10\tv\tA\tA\n"); }) == ErrorCode::MalformedLine);
  CHECK(code_of([] { variants_from("1\t10\tv\tA\tN\n"); }) == ErrorCode::MalformedLine);
  CHECK(code_of([] { variants_from("27\t10\tv\tA\tG\n"); }) == ErrorCode::MalformedLine);
  CHECK(code_of([] { variants_from("1\t10\tv\tA\n"); }) == ErrorCode::MalformedLine);
  CHECK(code_of([] { variants_from("1\t10\ta\tA\tG\n1\t10\tb\tC\tT\n"); }) == ErrorCode::DuplicatePosition);
  std::istringstream unsorted(std::string(kHeader) + "2\t10\ta\tA\tG\n1\t10\tb\tC\tT\n");
  CHECK(code_of([&] { parse_variants(unsorted, true); }) == ErrorCode::UnsortedInput);
  std::istringstream no_header("1\t10\ta\tA\tG\n");
  CHECK(code_of([&] { parse_variants(no_header); }) == ErrorCode::MalformedLine);
}

TEST_CASE("malformed lines report their line number") {
  try {
    variants_from("1\t10\ta\tA\tG\n1\t0\tb\tA\tG\n");
    FAIL("expected MalformedLine");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
}

TEST_CASE("chromosome codes") {
  CHECK(parse_chromosome("1") == 1);
  CHECK(parse_chromosome("22") == 22);
  CHECK(parse_chromosome("X") == 23);
  CHECK(parse_chromosome("MT") == 26);
  CHECK(parse_chromosome("0") == 0);
  CHECK(parse_chromosome("chr1") == 0);
}

TEST_CASE("parse_genotypes decodes calls") {
  const auto v = variants_from("1\t10\ta\tA\tG\n1\t20\tb\tGATT\tDEL\n");
  const auto c = cohort_from(v, "s1\t1\tA/G\tGATT/-\ns2\t0\t./.\t-/-\n");
  REQUIRE(c.n_samples() == 2);
  CHECK(c.call(0, 0) == GenotypeCall{Allele::Major, Allele::Minor});
  CHECK(c.call(0, 1) == GenotypeCall{Allele::Major, Allele::Minor});
  CHECK(c.call(1, 0).missing());
  CHECK(c.call(1, 1).minor_dosage() == 2);
  CHECK(c.samples()[0] == Sample{"s1", 1});
}

TEST_CASE("parse_genotypes errors") {
  const auto v = variants_from("1\t10\ta\tA\tG\n");
  CHECK(code_of([&] { cohort_from(v, "s\t1\tA/T\n"); }) == ErrorCode::AlleleMismatch);
  CHECK(code_of([&] { cohort_from(v, "s\t1\tA/G\tA/A\n"); }) == ErrorCode::ColumnCountMismatch);
  CHECK(code_of([&] { cohort_from(v, "s\t2\tA/G\n"); }) == ErrorCode::LabelNotBinary);
  CHECK(code_of([&] { cohort_from(v, "s\t1\tA/.\n"); }) == ErrorCode::MalformedLine);
  CHECK(code_of([&] { cohort_from(v, "s\t1\tAG\n"); }) == ErrorCode::MalformedLine);
}

TEST_CASE("parse_genotypes sorts variant columns with their calls") {
  const auto v = variants_from("2\t5\tlate\tC\tT\n1\t7\tearly\tA\tG\n");
  const auto c = cohort_from(v, "s\t0\tC/T\tG/G\n");
  CHECK(c.variants()[0].id == "early");
  CHECK(c.variants()[1].id == "late");
  CHECK(c.call(0, 0).minor_dosage() == 2);
  CHECK(c.call(0, 1).minor_dosage() == 1);
}

TEST_CASE("parse_known_loci") {
  std::istringstream in("6\t32591476\tstudy_a\n1\t5\tb\n");
  const auto k = parse_known_loci(in);
  REQUIRE(k.size() == 2);
  CHECK(k[0] == KnownLocus{6, 32591476, "study_a"});
  CHECK(k[1].chromosome == 1);
  std::istringstream empty("");
  CHECK(parse_known_loci(empty).empty());
  std::istringstream bad("6\t-5\tx\n");
  CHECK(code_of([&] { parse_known_loci(bad); }) == ErrorCode::MalformedLine);
}

TEST_CASE("compute_maf counts called alleles only") {
  const auto v = variants_from("1\t10\ta\tA\tG\n");
  std::string body;
  for (int i = 0; i < 8; ++i) body += "s" + std::to_string(i) + "\t0\tA/A\n";
  body += "h\t1\tA/G\nm\t1\tG/G\nx\t1\t./.\n";
  const auto c = cohort_from(v, body);
  CHECK(compute_maf(c, 0) == doctest::Approx(0.15).epsilon(1e-15));

  const auto hom = cohort_from(v, "a\t0\tA/A\nb\t1\tA/A\n");
  CHECK(compute_maf(hom, 0) == 0.0);
  const auto none = cohort_from(v, "a\t0\t./.\nb\t1\t./.\n");
  CHECK(code_of([&] { compute_maf(none, 0); }) == ErrorCode::AllMissing);
  // The declared minor allele can be the more frequent one.
  const auto flipped = cohort_from(v, "a\t0\tG/G\nb\t1\tG/G\nc\t1\tA/G\n");
  CHECK(compute_maf(flipped, 0) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("compute_maf is invariant under swapping alleles within calls") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_cohort(rng);
    std::vector<GenotypeCall> swapped;
    for (const auto& call : c.calls()) swapped.push_back({call.allele2, call.allele1});
    const Cohort s(c.variants(), c.samples(), swapped);
    for (std::size_t v = 0; v < c.n_variants(); ++v) {
      bool all_missing = true;
      for (std::size_t i = 0; i < c.n_samples(); ++i) all_missing = all_missing && c.call(i, v).missing();
      if (all_missing) continue;
      CHECK(compute_maf(c, v) == compute_maf(s, v));
    }
  }
}

TEST_CASE("filter_by_maf") {
  const auto v = variants_from("1\t10\tlow\tA\tG\n1\t20\thigh\tC\tT\n1\t30\tgone\tA\tC\n");
  std::string body;
  // 100 samples: variant low has one minor allele (0.005), high four (0.02).
  for (int i = 0; i < 100; ++i) {
    body += "s" + std::to_string(i) + "\t" + std::to_string(i % 2) + "\t";
    body += i == 0 ? "A/G" : "A/A";
    body += "\t";
    body += i < 2 ? "C/T" : (i == 2 ? "T/T" : "C/C");
    body += "\t./.\n";
  }
  const auto c = cohort_from(v, body);
  const auto f = filter_by_maf(c, 0.01);
  REQUIRE(f.n_variants() == 1);
  CHECK(f.variants()[0].id == "high");
  CHECK(f.samples() == c.samples());
  CHECK(filter_by_maf(c, 0.0).n_variants() == 2);
  CHECK(code_of([&] { filter_by_maf(c, 0.6); }) == ErrorCode::ConfigInvalid);
}

TEST_CASE("filter_by_maf is monotone in the threshold") {
  std::mt19937_64 rng(5);
  const double thresholds[] = {0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = random_cohort(rng);
    std::vector<Variant> previous = filter_by_maf(c, 0.0).variants();
    for (double t : thresholds) {
      const auto kept = filter_by_maf(c, t).variants();
      for (const auto& var : kept) CHECK(std::find(previous.begin(), previous.end(), var) != previous.end());
      CHECK(kept.size() <= previous.size());
      previous = kept;
    }
  }
}

TEST_CASE("write/parse round trip") {
  const auto v = variants_from("1\t10\ta\tA\tG\n3\t20\tb\tCAT\tDEL\n");
  const auto c = cohort_from(v, "x\t1\tA/G\tCAT/-\ny\t0\t./.\tCAT/CAT\nz\t1\tG/G\t./.\n");
  std::ostringstream vout, gout;
  write_variants(c.variants(), vout);
  write_cohort(c, gout);
  std::istringstream vin(vout.str()), gin(gout.str());
  const auto back = parse_genotypes(gin, parse_variants(vin));
  CHECK(back == c);
  CHECK(gout.str().find("./.") != std::string::npos);

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = random_cohort(rng);
    std::ostringstream vo, go;
    write_variants(r.variants(), vo);
    write_cohort(r, go);
    std::istringstream vi(vo.str()), gi(go.str());
    const auto again = parse_genotypes(gi, parse_variants(vi));
    CHECK(again == r);
    std::ostringstream go2;
    write_cohort(again, go2);
    CHECK(go2.str() == go.str());
  }
}

TEST_CASE("unwritable path fails with IoFailure") {
  const Cohort empty;
  CHECK(code_of([&] { write_cohort(empty, std::filesystem::path("/nonexistent_dir/x/y.tsv")); }) ==
        ErrorCode::IoFailure);
  CHECK(code_of([&] { parse_variants(std::filesystem::path("/nonexistent_dir/v.tsv")); }) == ErrorCode::IoFailure);
}

TEST_CASE("cohort constructor enforces invariants") {
  std::vector<Variant> v{{1, 10, "a", "A", "G"}, {1, 5, "b", "A", "G"}};
  CHECK(code_of([&] { Cohort(v, {}, {}); }) == ErrorCode::UnsortedInput);
  std::vector<Variant> one{{1, 10, "a", "A", "G"}};
  CHECK(code_of([&] { Cohort(one, {{"s", 0}}, {}); }) == ErrorCode::ColumnCountMismatch);
  CHECK(code_of([&] { Cohort(one, {{"s", 3}}, {GenotypeCall{Allele::Major, Allele::Major}}); }) ==
        ErrorCode::LabelNotBinary);
  CHECK(code_of([&] { Cohort(one, {{"s", 0}}, {GenotypeCall{Allele::Major, Allele::Missing}}); }) ==
        ErrorCode::MalformedLine);
}
