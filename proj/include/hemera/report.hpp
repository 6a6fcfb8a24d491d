#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "hemera/attribution.hpp"
#include "hemera/genotype_io.hpp"

namespace hemera {

inline constexpr std::int64_t kDefaultWindowBp = 1'000'000;
inline constexpr std::size_t kDefaultTopK = 50;

enum class AttributionSign { Positive, Negative };

// Per chromosome, the k most positive (> 0) or most negative (< 0) records,
// ordered by value (descending for positive, ascending for negative) with
// ties broken by (position, token) ascending.
AttributionTable top_k_per_chromosome(const AttributionTable& table, std::size_t k, AttributionSign sign);

// Genome-wide counterpart of top_k_per_chromosome.
AttributionTable top_k_overall(const AttributionTable& table, std::size_t k, AttributionSign sign);

struct LocusMatch {
  int chromosome = 0;
  std::int64_t attributed_position = 0;
  std::int64_t known_position = 0;
  std::string source;
  std::int64_t distance = 0;

  friend bool operator==(const LocusMatch&, const LocusMatch&) = default;
};

// Every (record, known locus) pair on the same chromosome within `window`
// base pairs, sorted by (chromosome, attributed position, known position,
// source).
std::vector<LocusMatch> proximity_match(const AttributionTable& records, const KnownLociList& known,
                                        std::int64_t window = kDefaultWindowBp);

void write_matches(std::span<const LocusMatch> matches, const std::filesystem::path& path);

struct ManhattanPoint {
  std::int64_t cumulative_x = 0;
  int chromosome = 0;
  std::int64_t position = 0;
  TokenId token = 0;
  double attribution = 0.0;
  int color_band = 0;
};

// Chromosomes are laid end to end in numeric order, each offset by the sum
// of the maximum positions of the chromosomes before it. Bands alternate
// 0, 1, 0, ... by chromosome.
std::vector<ManhattanPoint> manhattan_points(const AttributionTable& table, std::optional<AttributionSign> filter);

void write_manhattan(std::span<const ManhattanPoint> points, const std::filesystem::path& path);
void write_manhattan_svg(std::span<const ManhattanPoint> points, const std::filesystem::path& path,
                         const std::string& title);

}  // namespace hemera
