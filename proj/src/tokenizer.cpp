#include "hemera/tokenizer.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "hemera/error.hpp"
#include "text_util.hpp"

namespace hemera {

namespace {

constexpr char kCacheMagic[4] = {'H', 'M', 'T', 'K'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts unsupported");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

}  // namespace

std::string normalize_allele(const std::string& allele) {
  if (allele == "DEL") return "del";
  if (allele == "INS") return "ins";
  if (allele.empty() || !valid_allele(allele))
    throw Error(ErrorCode::InvalidAllele, "'" + allele + "'");
  if (allele.size() == 1) return allele;
  return std::string(1, allele.front()) + "I";
}

std::string genotype_to_token(const GenotypeCall& call, const Variant& variant) {
  if (call.missing()) return "nan";
  auto allele = [&](Allele a) -> const std::string& {
    return a == Allele::Major ? variant.major_allele : variant.minor_allele;
  };
  std::string token;
  if (call.allele1 == call.allele2) {
    token = normalize_allele(allele(call.allele1));
  } else {
    token = normalize_allele(variant.major_allele) + "," + normalize_allele(variant.minor_allele);
  }
  // Throws UnknownToken when the combination is outside the vocabulary.
  token_to_id(token);
  return token;
}

TokenId token_to_id(std::string_view token) {
  const auto it = std::find(kVocabulary.begin(), kVocabulary.end(), token);
  if (it == kVocabulary.end()) throw Error(ErrorCode::UnknownToken, "'" + std::string(token) + "'");
  return static_cast<TokenId>(it - kVocabulary.begin());
}

std::string_view id_to_token(TokenId id) {
  if (id >= kVocabSize) throw Error(ErrorCode::TokenOutOfRange, std::to_string(id));
  return kVocabulary[id];
}

TokenizeResult tokenize_cohort(const Cohort& cohort) {
  const std::size_t n_var = cohort.n_variants();
  const std::size_t width = n_var + 1;

  // Each variant has at most four distinct calls (missing, hom major, het, hom
  // minor), so tokens are resolved once per variant and looked up per sample.
  struct VariantTokens {
    TokenId missing = kNanId, hom_major = kNanId, het = kNanId, hom_minor = kNanId;
    bool unknown_hom_major = false, unknown_het = false, unknown_hom_minor = false;
  };
  std::vector<VariantTokens> table(n_var);
  for (std::size_t v = 0; v < n_var; ++v) {
    const auto& var = cohort.variants()[v];
    auto resolve = [&](GenotypeCall call, TokenId& id, bool& unknown) {
      try {
        id = token_to_id(genotype_to_token(call, var));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::UnknownToken) throw;
        id = kNanId;
        unknown = true;
      }
    };
    resolve({Allele::Major, Allele::Major}, table[v].hom_major, table[v].unknown_hom_major);
    resolve({Allele::Major, Allele::Minor}, table[v].het, table[v].unknown_het);
    resolve({Allele::Minor, Allele::Minor}, table[v].hom_minor, table[v].unknown_hom_minor);
  }

  TokenizeResult result;
  auto& data = result.dataset;
  data.tokens.resize(cohort.n_samples() * width);
  data.labels.reserve(cohort.n_samples());
  for (const auto& v : cohort.variants()) data.variant_meta.push_back({v.chromosome, v.position});

  for (std::size_t s = 0; s < cohort.n_samples(); ++s) {
    TokenId* row = data.tokens.data() + s * width;
    row[0] = kClsId;
    for (std::size_t v = 0; v < n_var; ++v) {
      const auto& c = cohort.call(s, v);
      const auto& t = table[v];
      switch (c.missing() ? -1 : c.minor_dosage()) {
        case -1: row[v + 1] = t.missing; break;
        case 0:
          row[v + 1] = t.hom_major;
          result.unknown_token_fallbacks += t.unknown_hom_major;
          break;
        case 1:
          row[v + 1] = t.het;
          result.unknown_token_fallbacks += t.unknown_het;
          break;
        default:
          row[v + 1] = t.hom_minor;
          result.unknown_token_fallbacks += t.unknown_hom_minor;
          break;
      }
    }
    data.labels.push_back(cohort.samples()[s].label);
  }
  return result;
}

void write_token_cache(const TokenizedDataset& data, const std::filesystem::path& path) {
  auto out = detail::open_output(path, std::ios::binary);
  out.write(kCacheMagic, 4);
  put_le<std::uint32_t>(out, kCacheVersion);
  put_le<std::uint64_t>(out, data.variant_meta.size());
  put_le<std::uint64_t>(out, data.n_samples());
  out.write(reinterpret_cast<const char*>(data.tokens.data()),
            static_cast<std::streamsize>(data.tokens.size()));
  for (int label : data.labels) out.put(static_cast<char>(label));
  detail::check_written(out, path);
}

TokenizedDataset read_token_cache(const std::filesystem::path& path, std::vector<ChromPos> variant_meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCacheMagic, 4) != 0)
    throw Error(ErrorCode::IoFailure, path.string() + " is not a token cache");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCacheVersion)
    throw Error(ErrorCode::IoFailure, "unsupported token cache version " + std::to_string(version));
  const auto length = get_le<std::uint64_t>(in);
  const auto n = get_le<std::uint64_t>(in);
  if (length != variant_meta.size())
    throw Error(ErrorCode::Mismatch, "token cache has " + std::to_string(length) +
                                         " variants, metadata has " + std::to_string(variant_meta.size()));
  TokenizedDataset data;
  data.variant_meta = std::move(variant_meta);
  data.tokens.resize(n * (length + 1));
  in.read(reinterpret_cast<char*>(data.tokens.data()), static_cast<std::streamsize>(data.tokens.size()));
  data.labels.resize(n);
  for (auto& label : data.labels) label = in.get();
  if (!in) throw Error(ErrorCode::IoFailure, "truncated token cache " + path.string());
  for (auto t : data.tokens)
    if (t >= kVocabSize) throw Error(ErrorCode::TokenOutOfRange, "corrupt token cache");
  return data;
}

}  // namespace hemera
