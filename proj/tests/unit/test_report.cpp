#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "hemera/error.hpp"
#include "hemera/report.hpp"
#include "test_support.hpp"

using namespace hemera;
using namespace hemera::testing;

namespace {

AttributionRecord rec(int chrom, std::int64_t pos, double value, TokenId token = 5) {
  return {chrom, pos, token, value, 1, 1};
}

AttributionTable random_table(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> chrom(1, 4), pos(1, 40), tok(5, 8);
  std::normal_distribution<double> n(0.0, 1.0);
  std::set<std::tuple<int, std::int64_t, int>> keys;
  AttributionTable t;
  for (int i = 0; i < 60; ++i) {
    const auto key = std::make_tuple(chrom(rng), static_cast<std::int64_t>(pos(rng)), tok(rng));
    if (!keys.insert(key).second) continue;
    const double v = i % 7 == 0 ? 0.0 : std::round(n(rng) * 4) / 4;  // coarse values force ties
    t.push_back({std::get<0>(key), std::get<1>(key), static_cast<TokenId>(std::get<2>(key)), v, 1, 1});
  }
  std::sort(t.begin(), t.end(), [](const auto& a, const auto& b) {
    return std::tie(a.chromosome, a.position, a.token) < std::tie(b.chromosome, b.position, b.token);
  });
  return t;
}

}  // namespace

TEST_CASE("top-k per chromosome examples") {
  const AttributionTable t{rec(1, 10, 0.3), rec(1, 20, -0.2), rec(1, 30, 0.1), rec(1, 40, 0.5),
                           rec(2, 5, -0.9), rec(2, 6, 0.0), rec(2, 7, -0.1)};
  const auto pos = top_k_per_chromosome(t, 50, AttributionSign::Positive);
  REQUIRE(pos.size() == 3);
  CHECK(pos[0].position == 40);
  CHECK(pos[1].position == 10);
  CHECK(pos[2].position == 30);

  const auto neg = top_k_per_chromosome(t, 50, AttributionSign::Negative);
  REQUIRE(neg.size() == 3);
  CHECK(neg[0].position == 20);
  CHECK(neg[1].position == 5);
  CHECK(neg[2].position == 7);

  const auto one = top_k_per_chromosome(t, 1, AttributionSign::Positive);
  REQUIRE(one.size() == 1);
  CHECK(one[0].position == 40);
  CHECK_THROWS_AS(top_k_per_chromosome(t, 0, AttributionSign::Positive), Error);
}

TEST_CASE("ties break by position then token") {
  const AttributionTable t{rec(1, 30, 0.5, 6), rec(1, 30, 0.5, 5), rec(1, 10, 0.5, 9)};
  const auto top = top_k_per_chromosome(t, 2, AttributionSign::Positive);
  REQUIRE(top.size() == 2);
  CHECK(top[0].position == 10);
  CHECK(top[1].token == 5);
}

TEST_CASE("top-k results are signed subsets") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_table(rng);
    for (auto sign : {AttributionSign::Positive, AttributionSign::Negative}) {
      for (std::size_t k : {1u, 3u, 100u}) {
        const auto top = top_k_per_chromosome(t, k, sign);
        std::map<int, std::size_t> per_chrom;
        for (const auto& r : top) {
          CHECK(std::find(t.begin(), t.end(), r) != t.end());
          CHECK((sign == AttributionSign::Positive ? r.mean_attribution > 0 : r.mean_attribution < 0));
          ++per_chrom[r.chromosome];
        }
        for (const auto& [c, n] : per_chrom) CHECK(n <= k);
        // Nothing left out beats the weakest kept record of its chromosome.
        for (const auto& r : t) {
          if (std::find(top.begin(), top.end(), r) != top.end()) continue;
          const bool qualifies = sign == AttributionSign::Positive ? r.mean_attribution > 0 : r.mean_attribution < 0;
          if (!qualifies) continue;
          CHECK(per_chrom[r.chromosome] == k);
        }
        const auto overall = top_k_overall(t, k, sign);
        CHECK(overall.size() <= k);
      }
    }
  }
}

TEST_CASE("proximity matching examples") {
  const KnownLociList known{{1, 160210727, "study_a"}, {6, 10415006, "study_a"}, {3, 5000000, "study_b"}};
  const AttributionTable records{rec(1, 160386089, 0.1), rec(6, 10114925, 0.1), rec(2, 5000000, 0.1)};
  const auto m = proximity_match(records, known);
  REQUIRE(m.size() == 2);
  CHECK(m[0] == LocusMatch{1, 160386089, 160210727, "study_a", 175362});
  CHECK(m[1] == LocusMatch{6, 10114925, 10415006, "study_a", 300081});
  CHECK_THROWS_AS(proximity_match(records, known, 0), Error);
}

TEST_CASE("proximity window is inclusive and symmetric") {
  const KnownLociList known{{1, 2'000'000, "s"}};
  const AttributionTable records{rec(1, 1'000'000, 0.1), rec(1, 3'000'000, 0.1), rec(1, 3'000'001, 0.1),
                                 rec(1, 999'999, 0.1)};
  const auto m = proximity_match(records, known);
  REQUIRE(m.size() == 2);
  CHECK(m[0].distance == 1'000'000);
  CHECK(m[1].distance == 1'000'000);
}

TEST_CASE("a record may match several loci and order does not matter") {
  KnownLociList known{{6, 30882415, "study_a"}, {6, 29000000, "study_b"}, {6, 31500000, "study_b"}};
  AttributionTable records{rec(6, 30340145, 0.1), rec(6, 29910698, 0.1), rec(6, 29910698, 0.2, 13)};
  const auto m = proximity_match(records, known);
  CHECK(m.size() == 3);
  std::reverse(known.begin(), known.end());
  std::reverse(records.begin(), records.end());
  CHECK(proximity_match(records, known) == m);
}

TEST_CASE("proximity matching reproduces the validated table pairs") {
  const std::filesystem::path data = HEMERA_TEST_DATA;
  const auto records = read_attribution_table(data / "validated_attributions.tsv");
  const auto known = parse_known_loci(data / "validated_known_loci.tsv");
  std::ifstream pairs(data / "validated_expected_pairs.tsv");
  std::set<std::tuple<int, std::int64_t, std::int64_t>> expected;
  std::string line;
  while (std::getline(pairs, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream s(line);
    int c;
    std::int64_t a, k;
    s >> c >> a >> k;
    expected.insert({c, a, k});
  }
  std::set<std::tuple<int, std::int64_t, std::int64_t>> found;
  for (const auto& m : proximity_match(records, known)) found.insert({m.chromosome, m.attributed_position, m.known_position});
  CHECK(found == expected);
}

TEST_CASE("manhattan layout") {
  const AttributionTable t{rec(1, 100, 0.2), rec(1, 40, -0.1), rec(2, 50, 0.3), rec(2, 10, -0.4), rec(3, 7, 0.1)};
  const auto all = manhattan_points(t, std::nullopt);
  REQUIRE(all.size() == 5);
  CHECK(all[2].chromosome == 2);
  CHECK(all[2].position == 10);
  CHECK(all[2].cumulative_x == 110);
  CHECK(all[4].cumulative_x == 157);
  CHECK(all[0].color_band == 0);
  CHECK(all[2].color_band == 1);
  CHECK(all[4].color_band == 0);
  for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i].cumulative_x > all[i - 1].cumulative_x);

  const auto pos = manhattan_points(t, AttributionSign::Positive);
  CHECK(pos.size() == 3);
  for (const auto& p : pos) CHECK(p.attribution > 0);
  const auto neg = manhattan_points(t, AttributionSign::Negative);
  CHECK(neg.size() == 2);
  CHECK(neg[1].cumulative_x == 110);
}

TEST_CASE("manhattan and match files") {
  TempDir dir;
  const AttributionTable t{rec(1, 100, 0.25), rec(2, 10, 0.5)};
  const auto points = manhattan_points(t, AttributionSign::Positive);
  write_manhattan(points, dir / "m.tsv");
  CHECK(read_file(dir / "m.tsv") ==
        "cumulative_x\tchrom\tpos\ttoken_id\tattribution\tcolor_band\n100\t1\t100\t5\t0.25\t0\n110\t2\t10\t5\t0.5\t1\n");
  write_manhattan_svg(points, dir / "m.svg", "positive");
  const auto svg = read_file(dir / "m.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(std::count(svg.begin(), svg.end(), '\n') > 3);
  CHECK(svg.find("<circle") != std::string::npos);

  const std::vector<LocusMatch> m{{1, 100, 200, "s", 100}};
  write_matches(m, dir / "x.tsv");
  CHECK(read_file(dir / "x.tsv") == "chrom\tattr_pos\tknown_pos\tsource\tdistance\n1\t100\t200\ts\t100\n");
  CHECK_THROWS_AS(write_manhattan(points, dir / "missing_dir" / "m.tsv"), Error);
}
