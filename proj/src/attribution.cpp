#include "hemera/attribution.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <tuple>

#include "hemera/error.hpp"
#include "text_util.hpp"

namespace hemera {

namespace {

using Key = std::tuple<int, std::int64_t, TokenId>;

Key key_of(const AttributionRecord& r) { return {r.chromosome, r.position, r.token}; }

}  // namespace

Matrix mean_embedding_baseline(const DataSplit& train, const Model& model) {
  if (train.tag() != SplitTag::Train)
    throw Error(ErrorCode::Mismatch, std::string("baseline requested from a ") + split_name(train.tag()) + " split");
  if (train.empty()) throw Error(ErrorCode::EmptyTrainingSet, "baseline needs at least one training sample");
  Matrix sum = Matrix::Zero(model.config().seq_len, model.config().embed_dim);
  for (std::size_t i = 0; i < train.size(); ++i) sum += embed(train.sequence(i), model);
  return sum / static_cast<double>(train.size());
}

Matrix integrated_gradients(const Matrix& input, const Matrix& baseline, const EmbeddingGradient& gradient,
                            int steps) {
  if (steps < 1) throw Error(ErrorCode::StepCountInvalid, "integration needs at least one step");
  if (input.rows() != baseline.rows() || input.cols() != baseline.cols())
    throw Error(ErrorCode::ShapeMismatch, "baseline shape differs from the input");
  const Matrix delta = input - baseline;
  Matrix accumulated = Matrix::Zero(input.rows(), input.cols());
  for (int k = 1; k <= steps; ++k) {
    const double alpha = static_cast<double>(k) / static_cast<double>(steps);
    accumulated += gradient(baseline + alpha * delta);
  }
  return delta.cwiseProduct(accumulated) / static_cast<double>(steps);
}

Matrix layer_integrated_gradients(std::span<const TokenId> tokens, const Matrix& baseline, const Model& model,
                                  int target, int steps) {
  if (target != 0 && target != 1) throw Error(ErrorCode::ShapeMismatch, "target must be 0 or 1");
  const Matrix input = embed(tokens, model);
  return integrated_gradients(input, baseline,
                              [&](const Matrix& e) { return grad_wrt_embeddings(e, model, target); }, steps);
}

Eigen::VectorXd per_position_scores(const Matrix& attribution) { return attribution.rowwise().mean(); }

Matrix attribute_split(const DataSplit& split, const Matrix& baseline, const Model& model, int target, int steps) {
  std::vector<std::vector<TokenId>> sequences(split.size());
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto s = split.sequence(i);
    sequences[i].assign(s.begin(), s.end());
  }
  Matrix scores(static_cast<Eigen::Index>(split.size()), model.config().seq_len);
  std::vector<std::exception_ptr> failures(split.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(split.size()); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    try {
      scores.row(i) = per_position_scores(layer_integrated_gradients(sequences[ui], baseline, model, target, steps))
                          .transpose();
    } catch (...) {
      failures[ui] = std::current_exception();
    }
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  return scores;
}

AttributionTable aggregate_carriers(const Matrix& scores, const DataSplit& split) {
  const auto& meta = split.dataset().variant_meta;
  const std::size_t width = meta.size() + 1;
  if (static_cast<std::size_t>(scores.rows()) != split.size() || static_cast<std::size_t>(scores.cols()) != width)
    throw Error(ErrorCode::ShapeMismatch, "score matrix does not match the split");

  struct Sum {
    double total = 0.0;
    std::size_t count = 0;
  };
  std::map<Key, Sum> groups;
  for (std::size_t i = 0; i < split.size(); ++i) {
    const auto seq = split.sequence(i);
    for (std::size_t p = 1; p < width; ++p) {
      auto& g = groups[{meta[p - 1].chromosome, meta[p - 1].position, seq[p]}];
      g.total += scores(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p));
      ++g.count;
    }
  }
  AttributionTable table;
  table.reserve(groups.size());
  for (const auto& [key, g] : groups) {
    table.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), g.total / static_cast<double>(g.count),
                     g.count, 1});
  }
  return table;
}

AttributionTable aggregate_folds(std::span<const AttributionTable> tables) {
  struct Sum {
    double total = 0.0;
    std::size_t carriers = 0;
    std::size_t folds = 0;
  };
  std::map<Key, Sum> groups;
  for (const auto& table : tables) {
    for (const auto& r : table) {
      auto& g = groups[key_of(r)];
      g.total += r.mean_attribution;
      g.carriers += r.carrier_count;
      g.folds += 1;
    }
  }
  AttributionTable out;
  out.reserve(groups.size());
  for (const auto& [key, g] : groups)
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), g.total / static_cast<double>(g.folds),
                   g.carriers, g.folds});
  return out;
}

void write_attribution_table(const AttributionTable& table, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "chrom\tpos\ttoken_id\tmean_attr\tcarrier_count\tfold_count\n";
  char number[32];
  for (const auto& r : table) {
    std::snprintf(number, sizeof number, "%.17g", r.mean_attribution);
    out << r.chromosome << '\t' << r.position << '\t' << static_cast<int>(r.token) << '\t' << number << '\t'
        << r.carrier_count << '\t' << r.fold_count << '\n';
  }
  detail::check_written(out, path);
}

AttributionTable read_attribution_table(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  detail::LineReader reader(in);
  std::string line;
  AttributionTable table;
  while (reader.next(line)) {
    if (line.rfind("chrom\t", 0) == 0) continue;
    const auto f = detail::split_tabs(line);
    auto bad = [&]() {
      return Error(ErrorCode::MalformedLine, path.string() + " line " + std::to_string(reader.number()));
    };
    if (f.size() != 6) throw bad();
    AttributionRecord r;
    r.chromosome = parse_chromosome(std::string(f[0]));
    const auto pos = detail::parse_int<std::int64_t>(f[1]);
    const auto tok = detail::parse_int<int>(f[2]);
    const auto carriers = detail::parse_int<std::size_t>(f[4]);
    const auto folds = detail::parse_int<std::size_t>(f[5]);
    if (r.chromosome == 0 || !pos || *pos < 1 || !tok || *tok < 0 || *tok >= kVocabSize || !carriers ||
        *carriers < 1 || !folds || *folds < 1)
      throw bad();
    try {
      r.mean_attribution = std::stod(std::string(f[3]));
    } catch (const std::exception&) {
      throw bad();
    }
    r.position = *pos;
    r.token = static_cast<TokenId>(*tok);
    r.carrier_count = *carriers;
    r.fold_count = *folds;
    table.push_back(r);
  }
  std::sort(table.begin(), table.end(), [](const auto& a, const auto& b) { return key_of(a) < key_of(b); });
  return table;
}

}  // namespace hemera
