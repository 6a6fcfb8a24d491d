#include <bit>
#include <cstring>
#include <fstream>

#include "hemera/error.hpp"
#include "hemera/model.hpp"
#include "text_util.hpp"

namespace hemera {

namespace {

constexpr char kMagic[4] = {'H', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorCode::IoFailure, "truncated checkpoint");
  return value;
}

void write_config(std::ostream& out, const ModelConfig& c) {
  for (int v : {c.vocab_size, c.embed_dim, c.n_layers, c.n_heads, c.linformer_k, c.seq_len, c.ffn_dim})
    put<std::uint64_t>(out, static_cast<std::uint64_t>(v));
  put<double>(out, c.init_scale);
}

ModelConfig read_config(std::istream& in) {
  ModelConfig c;
  for (int* v : {&c.vocab_size, &c.embed_dim, &c.n_layers, &c.n_heads, &c.linformer_k, &c.seq_len, &c.ffn_dim})
    *v = static_cast<int>(get<std::uint64_t>(in));
  c.init_scale = get<double>(in);
  return c;
}

// Shapes are a function of the config alone, so a zero-seeded model gives
// the tensor layout to read into.
ModelParameters layout_for(const ModelConfig& config) { return init_model(config, 0).params().zeros_like(); }

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  auto out = detail::open_output(path, std::ios::binary);
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  write_config(out, model.config());
  for (const auto* m : model.params().tensors()) {
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m->rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m->cols()));
    out.write(reinterpret_cast<const char*>(m->data()), static_cast<std::streamsize>(m->size() * sizeof(double)));
  }
  detail::check_written(out, path);
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open checkpoint " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw Error(ErrorCode::IoFailure, path.string() + " is not a checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion)
    throw Error(ErrorCode::CheckpointMismatch, "unsupported checkpoint version " + std::to_string(version));
  const ModelConfig config = read_config(in);
  validate(config);
  ModelParameters params = layout_for(config);
  for (auto* m : params.tensors()) {
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    if (rows != static_cast<std::uint64_t>(m->rows()) || cols != static_cast<std::uint64_t>(m->cols()))
      throw Error(ErrorCode::CheckpointMismatch, "tensor shape does not match the stored config");
    in.read(reinterpret_cast<char*>(m->data()), static_cast<std::streamsize>(m->size() * sizeof(double)));
    if (!in) throw Error(ErrorCode::IoFailure, "truncated checkpoint");
  }
  return Model(config, std::move(params));
}

Model load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  Model model = load_checkpoint(path);
  if (!(model.config() == expected))
    throw Error(ErrorCode::CheckpointMismatch, "checkpoint config differs from the requested model config");
  return model;
}

}  // namespace hemera
