#ifndef FOFE_SERIALIZE_HPP
#define FOFE_SERIALIZE_HPP

#include <optional>
#include <string>

#include "fofe/models.hpp"

namespace fofe {

// NN model payload, after the shared container header:
//
//   f64 forgetting_factor, u32 context_n, u32 embed_dim, u32 hidden_dim,
//   u32 num_ff_layers, u32 vocab_size, u32 mixture_m, u8 strict_literal
//   u32 tensor count, then per tensor in ParamStore registration order:
//   string name, u32 rows, u32 cols, rows*cols little-endian f32 values
//   (row-major).
//
// Parameters are stored in 32-bit precision regardless of the in-memory
// scalar type.

struct LoadedModel {
  std::string arch;
  FofeConfig cfg;
  std::uint64_t vocab_hash = 0;
  ParamStore<float> params;
};

void save_model(const std::string& path, const std::string& arch, const FofeConfig& cfg,
                const ParamStore<float>& params, std::uint64_t vocab_hash);

// expected_vocab_hash, when given, must match the stored hash.
LoadedModel load_model(const std::string& path,
                       std::optional<std::uint64_t> expected_vocab_hash = std::nullopt);

// Copies loaded tensors into a freshly constructed model's store,
// verifying name/shape agreement in order.
template <typename Scalar>
void fill_params(ParamStore<Scalar>& dst, const ParamStore<float>& src) {
  if (dst.size() != src.size()) {
    fail(ErrorCode::InvalidConfig, "model file tensor count does not match architecture");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != src[i].name || dst[i].value.rows() != src[i].value.rows() ||
        dst[i].value.cols() != src[i].value.cols()) {
      fail(ErrorCode::InvalidConfig, "model file tensor '" + src[i].name +
                                         "' does not match architecture layout");
    }
    dst[i].value = src[i].value.template cast<Scalar>();
  }
}

template <typename Model>
void save_typed_model(const Model& model, const std::string& path, std::uint64_t vocab_hash) {
  const ParamStore<float> as_float = model.params().template cast<float>();
  save_model(path, Model::kArch, model.config(), as_float, vocab_hash);
}

template <typename Model>
Model model_from_loaded(const LoadedModel& loaded) {
  if (loaded.arch != Model::kArch) {
    fail(ErrorCode::InvalidConfig,
         "model file holds architecture '" + loaded.arch + "', expected '" + Model::kArch + "'");
  }
  Model model(loaded.cfg);
  fill_params(model.params(), loaded.params);
  return model;
}

std::uint64_t file_hash(const std::string& path);

}  // namespace fofe

#endif  // FOFE_SERIALIZE_HPP
