#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hemera/genotype_io.hpp"

namespace hemera {

inline constexpr int kVocabSize = 33;
inline constexpr std::uint8_t kNanId = 0;
inline constexpr std::uint8_t kClsId = 3;
inline constexpr std::uint8_t kMaskId = 4;

// The fixed SNP vocabulary; index == token id.
inline constexpr std::array<std::string_view, kVocabSize> kVocabulary{
    "nan",    "ins", "del",    "cls", "mask",  "A",     "G",      "C",     "T",
    "GI",     "CI",  "TI",     "AI",  "A,G",   "A,C",   "G,A",    "G,C",   "C,G",
    "C,T",    "T,C", "GI,del", "T,G", "G,T",   "C,A",   "C,ins",  "CI,del", "T,ins",
    "TI,del", "A,T", "G,ins",  "A,ins", "T,A", "AI,del"};

using TokenId = std::uint8_t;

std::string normalize_allele(const std::string& allele);
std::string genotype_to_token(const GenotypeCall& call, const Variant& variant);
TokenId token_to_id(std::string_view token);
std::string_view id_to_token(TokenId id);

struct ChromPos {
  int chromosome = 0;
  std::int64_t position = 0;
  friend auto operator<=>(const ChromPos&, const ChromPos&) = default;
};

struct TokenizedDataset {
  // Row-major N x (L+1) token ids; column 0 is always the cls token.
  std::vector<TokenId> tokens;
  std::vector<int> labels;
  std::vector<ChromPos> variant_meta;  // L entries aligned to columns 1..L

  std::size_t n_samples() const { return labels.size(); }
  std::size_t seq_len() const { return variant_meta.size() + 1; }
  const TokenId* sequence(std::size_t sample) const { return tokens.data() + sample * seq_len(); }
};

struct TokenizeResult {
  TokenizedDataset dataset;
  // Calls whose genotype produced a string outside the vocabulary and fell
  // back to "nan".
  std::size_t unknown_token_fallbacks = 0;
};

TokenizeResult tokenize_cohort(const Cohort& cohort);

// Binary cache: "HMTK" | u32 version | u64 L | u64 N | N*(L+1) token bytes |
// N label bytes. All integers little-endian.
void write_token_cache(const TokenizedDataset& data, const std::filesystem::path& path);
// Variant metadata is not stored in the cache; callers re-attach it from the
// filtered variants file.
TokenizedDataset read_token_cache(const std::filesystem::path& path, std::vector<ChromPos> variant_meta);

}  // namespace hemera
