#include "fofe/serialize.hpp"

#include "fofe/container.hpp"
#include "fofe/text.hpp"

namespace fofe {

namespace {

void write_config(ContainerWriter& w, const FofeConfig& cfg) {
  w.f64(cfg.forgetting_factor);
  w.u32(static_cast<std::uint32_t>(cfg.context_n));
  w.u32(static_cast<std::uint32_t>(cfg.embed_dim));
  w.u32(static_cast<std::uint32_t>(cfg.hidden_dim));
  w.u32(static_cast<std::uint32_t>(cfg.num_ff_layers));
  w.u32(static_cast<std::uint32_t>(cfg.vocab_size));
  w.u32(static_cast<std::uint32_t>(cfg.mixture_m));
  w.u8(cfg.strict_literal_fofe ? 1 : 0);
}

FofeConfig read_config(ContainerReader& r) {
  FofeConfig cfg;
  cfg.forgetting_factor = r.f64();
  cfg.context_n = static_cast<int>(r.u32());
  cfg.embed_dim = static_cast<int>(r.u32());
  cfg.hidden_dim = static_cast<int>(r.u32());
  cfg.num_ff_layers = static_cast<int>(r.u32());
  cfg.vocab_size = static_cast<std::int32_t>(r.u32());
  cfg.mixture_m = static_cast<int>(r.u32());
  cfg.strict_literal_fofe = r.u8() != 0;
  return cfg;
}

}  // namespace

void save_model(const std::string& path, const std::string& arch, const FofeConfig& cfg,
                const ParamStore<float>& params, std::uint64_t vocab_hash) {
  ContainerWriter w(path);
  w.magic(arch, vocab_hash);
  write_config(w, cfg);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.value.rows()));
    w.u32(static_cast<std::uint32_t>(p.value.cols()));
    w.raw(p.value.data(), sizeof(float) * static_cast<std::size_t>(p.value.size()));
  }
  w.close();
}

LoadedModel load_model(const std::string& path,
                       std::optional<std::uint64_t> expected_vocab_hash) {
  ContainerReader r(path);
  LoadedModel model;
  model.arch = r.magic(&model.vocab_hash);
  if (expected_vocab_hash && *expected_vocab_hash != model.vocab_hash) {
    fail(ErrorCode::VocabHashMismatch,
         "'" + path + "' was trained against a different vocabulary");
  }
  model.cfg = read_config(r);
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::string name = r.str();
    const auto rows = static_cast<Eigen::Index>(r.u32());
    const auto cols = static_cast<Eigen::Index>(r.u32());
    Mat<float>& value = model.params.add(name, rows, cols);
    r.raw(value.data(), sizeof(float) * static_cast<std::size_t>(value.size()),
          name.c_str());
  }
  return model;
}

std::uint64_t file_hash(const std::string& path) { return fnv1a64(read_file(path)); }

}  // namespace fofe
