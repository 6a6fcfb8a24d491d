#include <doctest.h>

#include <random>
#include <set>
#include <sstream>

#include "hemera/error.hpp"
#include "hemera/tokenizer.hpp"
#include "test_support.hpp"

using namespace hemera;

namespace {

Cohort make_cohort(std::vector<Variant> variants, std::vector<std::vector<GenotypeCall>> rows) {
  std::vector<Sample> samples;
  std::vector<GenotypeCall> calls;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    samples.push_back({"s" + std::to_string(i), static_cast<int>(i % 2)});
    calls.insert(calls.end(), rows[i].begin(), rows[i].end());
  }
  return Cohort(std::move(variants), std::move(samples), std::move(calls));
}

constexpr GenotypeCall kHomMajor{Allele::Major, Allele::Major};
constexpr GenotypeCall kHet{Allele::Major, Allele::Minor};
constexpr GenotypeCall kHomMinor{Allele::Minor, Allele::Minor};
constexpr GenotypeCall kMissing{};

}  // namespace

TEST_CASE("normalize_allele") {
  CHECK(normalize_allele("GATT") == "GI");
  CHECK(normalize_allele("A") == "A");
  CHECK(normalize_allele("DEL") == "del");
  CHECK(normalize_allele("INS") == "ins");
  CHECK(normalize_allele("TA") == "TI");
  CHECK_THROWS_AS(normalize_allele("N"), Error);
  CHECK_THROWS_AS(normalize_allele(""), Error);
}

TEST_CASE("genotype_to_token") {
  const Variant ag{1, 10, "v", "A", "G"};
  CHECK(genotype_to_token(kHomMajor, ag) == "A");
  CHECK(genotype_to_token(kHet, ag) == "A,G");
  CHECK(genotype_to_token({Allele::Minor, Allele::Major}, ag) == "A,G");
  CHECK(genotype_to_token(kHomMinor, ag) == "G");
  CHECK(genotype_to_token(kMissing, ag) == "nan");
  const Variant ga{1, 10, "v", "G", "A"};
  CHECK(genotype_to_token(kHet, ga) == "G,A");
  const Variant indel{1, 10, "v", "GATT", "DEL"};
  CHECK(genotype_to_token(kHet, indel) == "GI,del");
  CHECK(genotype_to_token(kHomMinor, indel) == "del");
  CHECK(genotype_to_token(kHomMajor, indel) == "GI");
  const Variant c_ins{1, 10, "v", "C", "INS"};
  CHECK(genotype_to_token(kHet, c_ins) == "C,ins");
  const Variant ag_rev{1, 10, "v", "A", "C"};
  CHECK(genotype_to_token(kHet, ag_rev) == "A,C");
  try {
    genotype_to_token(kHet, Variant{1, 10, "v", "INS", "DEL"});
    FAIL("expected UnknownToken");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownToken);
  }
}

TEST_CASE("token ids") {
  CHECK(token_to_id("cls") == 3);
  CHECK(token_to_id("GI,del") == 20);
  CHECK(token_to_id("AI,del") == 32);
  CHECK(token_to_id("nan") == 0);
  for (int id = 0; id < kVocabSize; ++id)
    CHECK(token_to_id(id_to_token(static_cast<TokenId>(id))) == id);
  std::set<std::string_view> distinct(kVocabulary.begin(), kVocabulary.end());
  CHECK(distinct.size() == static_cast<std::size_t>(kVocabSize));
  CHECK_THROWS_AS(id_to_token(33), Error);
  CHECK_THROWS_AS(token_to_id("G,G"), Error);
}

TEST_CASE("tokenize_cohort") {
  const auto c = make_cohort({{1, 10, "a", "A", "G"}, {1, 20, "b", "C", "T"}}, {{kHomMajor, kHet}});
  const auto r = tokenize_cohort(c);
  CHECK(r.dataset.tokens == std::vector<TokenId>{3, 5, 18});
  CHECK(r.unknown_token_fallbacks == 0);
  CHECK(r.dataset.variant_meta == std::vector<ChromPos>{{1, 10}, {1, 20}});

  const auto empty = make_cohort({}, {{}, {}});
  const auto e = tokenize_cohort(empty);
  CHECK(e.dataset.tokens == std::vector<TokenId>{3, 3});
  CHECK(e.dataset.seq_len() == 1);

  const auto missing = make_cohort({{1, 10, "a", "A", "G"}, {2, 5, "b", "C", "T"}}, {{kMissing, kMissing}});
  CHECK(tokenize_cohort(missing).dataset.tokens == std::vector<TokenId>{3, 0, 0});
}

TEST_CASE("unknown combinations fall back to nan and are counted") {
  const auto c = make_cohort({{1, 10, "a", "INS", "DEL"}, {1, 20, "b", "A", "G"}},
                             {{kHet, kHet}, {kHet, kHomMinor}, {kHomMajor, kHomMajor}});
  const auto r = tokenize_cohort(c);
  CHECK(r.unknown_token_fallbacks == 2);
  CHECK(r.dataset.tokens[1] == kNanId);
  CHECK(r.dataset.tokens[4] == kNanId);
  CHECK(r.dataset.tokens[7] == 1);  // hom INS
}

TEST_CASE("tokenized sequences: cls first, fixed length, never mask") {
  std::mt19937_64 rng(17);
  const char* alleles[] = {"A", "C", "G", "T", "GATT", "CA", "TAG", "AC", "DEL", "INS"};
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Variant> variants;
    const int nv = static_cast<int>(rng() % 12);
    for (int v = 0; v < nv; ++v) {
      const int a = static_cast<int>(rng() % 10);
      int b = static_cast<int>(rng() % 10);
      if (b == a) b = (a + 1) % 10;
      variants.push_back({1, 10 * (v + 1), "v", alleles[a], alleles[b]});
    }
    std::vector<std::vector<GenotypeCall>> rows(1 + rng() % 6);
    const GenotypeCall options[] = {kHomMajor, kHet, kHomMinor, kMissing};
    for (auto& row : rows)
      for (int v = 0; v < nv; ++v) row.push_back(options[rng() % 4]);
    const auto d = tokenize_cohort(make_cohort(variants, rows)).dataset;
    REQUIRE(d.tokens.size() == rows.size() * (static_cast<std::size_t>(nv) + 1));
    for (std::size_t s = 0; s < rows.size(); ++s) {
      CHECK(d.sequence(s)[0] == kClsId);
      for (int p = 1; p <= nv; ++p) {
        CHECK(d.sequence(s)[p] != kMaskId);
        CHECK(d.sequence(s)[p] != kClsId);
        CHECK(d.sequence(s)[p] < kVocabSize);
      }
    }
  }
}

TEST_CASE("token cache round trip") {
  testing::TempDir dir;
  const auto data = testing::random_dataset(7, 5, 3);
  write_token_cache(data, dir / "t.bin");
  const auto back = read_token_cache(dir / "t.bin", data.variant_meta);
  CHECK(back.tokens == data.tokens);
  CHECK(back.labels == data.labels);
  auto short_meta = data.variant_meta;
  short_meta.pop_back();
  try {
    read_token_cache(dir / "t.bin", short_meta);
    FAIL("expected Mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Mismatch);
  }
  testing::write_file(dir / "bad.bin", "nope");
  CHECK_THROWS_AS(read_token_cache(dir / "bad.bin", data.variant_meta), Error);
}
