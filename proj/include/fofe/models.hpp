#ifndef FOFE_MODELS_HPP
#define FOFE_MODELS_HPP

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "fofe/fofe_encoding.hpp"
#include "fofe/nn.hpp"
#include "fofe/rng.hpp"
#include "fofe/types.hpp"

namespace fofe {

using IdMat = Eigen::Matrix<WordId, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct FofeConfig {
  double forgetting_factor = 0.7;
  int context_n = 8;   // concatenated FOFE positions
  int embed_dim = 256;
  int hidden_dim = 768;  // 768 base, 512 mixture / application-dependent
  int num_ff_layers = 4;
  std::int32_t vocab_size = 0;
  int mixture_m = 2;  // mixture architecture only
  bool strict_literal_fofe = false;

  void validate() const {
    if (forgetting_factor <= 0.0 || forgetting_factor > 1.0) {
      fail(ErrorCode::InvalidConfig, "forgetting factor must be in (0,1]");
    }
    if (context_n < 1 || embed_dim < 1 || hidden_dim < 1 || num_ff_layers < 1 ||
        vocab_size < 1 || mixture_m < 1) {
      fail(ErrorCode::InvalidConfig, "model dimensions must be >= 1");
    }
  }
};

// One prediction event: the (possibly truncated) history and its target.
struct Example {
  std::vector<WordId> history;
  WordId target = 0;
  ApplicationId app = ApplicationId::VA;
};

// ---------------------------------------------------------------------------
// FOFE input layer: embedding gather + FOFE recurrence + n-position context.

// Builds the flattened [B x n*E] FOFE context for a batch.
template <typename Scalar>
Mat<Scalar> fofe_input(const Mat<Scalar>& embed, const FofeConfig& cfg,
                       std::span<const Example> batch) {
  const Eigen::Index e_dim = embed.cols();
  Mat<Scalar> x = Mat<Scalar>::Zero(static_cast<Eigen::Index>(batch.size()),
                                    static_cast<Eigen::Index>(cfg.context_n) * e_dim);
  Mat<Scalar> rows;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& hist = batch[b].history;
    if (hist.empty()) continue;
    rows.resize(static_cast<Eigen::Index>(hist.size()), e_dim);
    for (std::size_t t = 0; t < hist.size(); ++t) {
      if (hist[t] < 0 || hist[t] >= cfg.vocab_size) {
        fail(ErrorCode::InvalidArgument, "history word id out of range");
      }
      rows.row(static_cast<Eigen::Index>(t)) = embed.row(hist[t]);
    }
    const Mat<Scalar> z = fofe_encode(rows, cfg.forgetting_factor, cfg.strict_literal_fofe);
    x.row(static_cast<Eigen::Index>(b)) =
        fofe_context(z, cfg.context_n, z.rows() - 1).transpose();
  }
  ensure_finite(x, "fofe_input");
  return x;
}

// Adjoint of fofe_input; accumulates into d_embed.  The layer is linear
// in the gathered embedding rows, so only the history ids are needed.
template <typename Scalar>
void fofe_input_backward(Mat<Scalar>& d_embed, const FofeConfig& cfg,
                         std::span<const Example> batch, const Mat<Scalar>& dx) {
  const Eigen::Index e_dim = d_embed.cols();
  const auto alpha = static_cast<Scalar>(cfg.forgetting_factor);
  Vec<Scalar> acc(e_dim);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& hist = batch[b].history;
    const auto len = static_cast<Eigen::Index>(hist.size());
    acc.setZero();
    for (Eigen::Index p = len - 1; p >= 0; --p) {
      if (!cfg.strict_literal_fofe) acc *= alpha;
      const Eigen::Index slot = p - len + cfg.context_n;  // context slot of position p
      if (slot >= 0 && slot < cfg.context_n) {
        acc += dx.row(static_cast<Eigen::Index>(b)).segment(slot * e_dim, e_dim).transpose();
      }
      if (cfg.strict_literal_fofe) {
        d_embed.row(hist[static_cast<std::size_t>(p)]) += alpha * acc.transpose();
      } else {
        d_embed.row(hist[static_cast<std::size_t>(p)]) += acc.transpose();
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Feed-forward stack and expert tower.

template <typename Scalar>
struct FfStackCache {
  Mat<Scalar> input;
  std::vector<Mat<Scalar>> pre;  // pre-activation per layer
  std::vector<Mat<Scalar>> act;  // post-ReLU per layer
};

inline std::string layer_name(const std::string& prefix, int i, const char* part) {
  return prefix + "ff" + std::to_string(i) + "." + part;
}

// num_layers affine+ReLU layers; the first maps n*E -> H, the rest H -> H.
template <typename Scalar>
const Mat<Scalar>& ff_stack_forward(const ParamStore<Scalar>& params, const std::string& prefix,
                                    const Mat<Scalar>& x, int num_layers,
                                    FfStackCache<Scalar>& cache) {
  cache.input = x;
  cache.pre.resize(static_cast<std::size_t>(num_layers));
  cache.act.resize(static_cast<std::size_t>(num_layers));
  const Mat<Scalar>* cur = &cache.input;
  for (int i = 0; i < num_layers; ++i) {
    cache.pre[static_cast<std::size_t>(i)] =
        affine(*cur, params.value(layer_name(prefix, i, "W")),
               params.value(layer_name(prefix, i, "b")));
    cache.act[static_cast<std::size_t>(i)] = relu(cache.pre[static_cast<std::size_t>(i)]);
    cur = &cache.act[static_cast<std::size_t>(i)];
  }
  return *cur;
}

template <typename Scalar>
Mat<Scalar> ff_stack_backward(ParamStore<Scalar>& params, const std::string& prefix,
                              int num_layers, const FfStackCache<Scalar>& cache,
                              const Mat<Scalar>& d_top) {
  Mat<Scalar> d = d_top;
  for (int i = num_layers - 1; i >= 0; --i) {
    d = relu_backward(cache.pre[static_cast<std::size_t>(i)], d);
    const Mat<Scalar>& below = i == 0 ? cache.input : cache.act[static_cast<std::size_t>(i - 1)];
    d = affine_backward(below, params.value(layer_name(prefix, i, "W")), d,
                        params.grad(layer_name(prefix, i, "W")),
                        params.grad(layer_name(prefix, i, "b")));
  }
  return d;
}

template <typename Scalar>
struct TowerCache {
  FfStackCache<Scalar> ff;
  Mat<Scalar> out;  // projection output [B x E]
};

// Expert tower: FF stack followed by the dimension-reduction projection
// back to the embedding width (no activation after the projection).
template <typename Scalar>
const Mat<Scalar>& tower_forward(const ParamStore<Scalar>& params, const std::string& prefix,
                                 const Mat<Scalar>& x, int num_layers,
                                 TowerCache<Scalar>& cache) {
  const Mat<Scalar>& top = ff_stack_forward(params, prefix, x, num_layers, cache.ff);
  cache.out = affine(top, params.value(prefix + "proj.W"), params.value(prefix + "proj.b"));
  return cache.out;
}

template <typename Scalar>
Mat<Scalar> tower_backward(ParamStore<Scalar>& params, const std::string& prefix, int num_layers,
                           const TowerCache<Scalar>& cache, const Mat<Scalar>& d_out) {
  const Mat<Scalar>& top = cache.ff.act.back();
  const Mat<Scalar> d_top =
      affine_backward(top, params.value(prefix + "proj.W"), d_out,
                      params.grad(prefix + "proj.W"), params.grad(prefix + "proj.b"));
  return ff_stack_backward(params, prefix, num_layers, cache.ff, d_top);
}

inline void register_tower(auto& params, const std::string& prefix, int in_dim, int hidden,
                           int out_dim, int num_layers) {
  for (int i = 0; i < num_layers; ++i) {
    params.add(layer_name(prefix, i, "W"), i == 0 ? in_dim : hidden, hidden);
    params.add(layer_name(prefix, i, "b"), 1, hidden);
  }
  params.add(prefix + "proj.W", hidden, out_dim);
  params.add(prefix + "proj.b", 1, out_dim);
}

inline std::int64_t ff_stack_param_count(std::int64_t in, std::int64_t h, std::int64_t layers) {
  return in * h + h + (layers - 1) * (h * h + h);
}

inline std::int64_t tower_param_count(std::int64_t in, std::int64_t h, std::int64_t out,
                                      std::int64_t layers) {
  return ff_stack_param_count(in, h, layers) + h * out + out;
}

// ---------------------------------------------------------------------------
// Tied-embedding output head.

// logits = hidden * embed^T + bias.  hidden: [B x E], embed: [V x E],
// bias: [1 x V].
template <typename Scalar>
Mat<Scalar> output_logits(const Mat<Scalar>& hidden, const Mat<Scalar>& embed,
                          const Mat<Scalar>& bias) {
  Mat<Scalar> logits = hidden * embed.transpose();
  logits.rowwise() += bias.row(0);
  ensure_finite(logits, "output_logits");
  return logits;
}

template <typename Scalar>
Mat<Scalar> output_backward(const Mat<Scalar>& hidden, const Mat<Scalar>& embed,
                            const Mat<Scalar>& dlogits, Mat<Scalar>& d_embed,
                            Mat<Scalar>& d_bias) {
  d_embed.noalias() += dlogits.transpose() * hidden;
  d_bias.row(0) += dlogits.colwise().sum();
  return dlogits * embed;
}

// ---------------------------------------------------------------------------
// Noise contrastive estimation head.

class NceHead {
 public:
  NceHead() = default;
  NceHead(std::vector<double> probs, int k) : q_(std::move(probs)), k_(k) {
    if (k_ < 1) fail(ErrorCode::InvalidArgument, "nce k must be >= 1");
    cum_.reserve(q_.size());
    double c = 0.0;
    for (const double p : q_) {
      if (p < 0.0) fail(ErrorCode::InvalidArgument, "negative noise probability");
      c += p;
      cum_.push_back(c);
    }
    if (std::abs(c - 1.0) > 1e-6) {
      fail(ErrorCode::InvalidArgument, "noise distribution must sum to 1");
    }
  }

  // Unigram noise distribution with add-one smoothing, so q(w) > 0 for
  // every word in the vocabulary.
  static NceHead from_counts(const std::vector<std::int64_t>& counts, int k) {
    double total = 0.0;
    for (const auto c : counts) total += static_cast<double>(c) + 1.0;
    std::vector<double> q(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      q[i] = (static_cast<double>(counts[i]) + 1.0) / total;
    }
    return NceHead(std::move(q), k);
  }

  int k() const { return k_; }

  double q(WordId w) const { return q_[static_cast<std::size_t>(w)]; }

  double log_kq(WordId w) const {
    const double qw = q(w);
    if (qw <= 0.0) {
      fail(ErrorCode::InvalidArgument, "noise probability is zero for drawn word id " +
                                           std::to_string(w));
    }
    return std::log(static_cast<double>(k_) * qw);
  }

  // [B x k] noise word ids via cumulative inversion.
  IdMat draw_noise(Rng& rng, Eigen::Index batch) const {
    IdMat ids(batch, k_);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (int j = 0; j < k_; ++j) {
        const double u = rng.next_double();
        const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
        ids(b, j) = static_cast<WordId>(std::min<std::size_t>(
            static_cast<std::size_t>(it - cum_.begin()), q_.size() - 1));
      }
    }
    return ids;
  }

 private:
  std::vector<double> q_;
  std::vector<double> cum_;
  int k_ = 64;
};

namespace detail {

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace detail

template <typename Scalar>
struct NceLossResult {
  double loss = 0.0;
  Mat<Scalar> dscores;
};

// Binary-classification NCE on self-normalized scores (column 0 is the
// data word, columns 1..k the noise draws):
//   loss = -(1/B) sum_b [ ln sigma(s_b0) + sum_j ln(1 - sigma(s_bj)) ]
template <typename Scalar>
NceLossResult<Scalar> nce_loss(const Mat<Scalar>& scores) {
  NceLossResult<Scalar> res;
  res.dscores.resize(scores.rows(), scores.cols());
  const auto batch = static_cast<double>(scores.rows());
  double loss = 0.0;
  for (Eigen::Index b = 0; b < scores.rows(); ++b) {
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
      const double s = static_cast<double>(scores(b, j));
      if (j == 0) {
        loss += detail::softplus(-s);
        res.dscores(b, j) = static_cast<Scalar>((detail::sigmoid(s) - 1.0) / batch);
      } else {
        loss += detail::softplus(s);
        res.dscores(b, j) = static_cast<Scalar>(detail::sigmoid(s) / batch);
      }
    }
  }
  res.loss = loss / batch;
  ensure_finite_scalar(res.loss, "nce_loss");
  return res;
}

// Scores for the target and noise ids of each row:
//   s(w) = hidden . embed_w + bias_w - ln(k q(w))
template <typename Scalar>
Mat<Scalar> nce_scores(const Mat<Scalar>& hidden, const Mat<Scalar>& embed,
                       const Mat<Scalar>& bias, const IdMat& ids, const NceHead& head) {
  Mat<Scalar> scores(ids.rows(), ids.cols());
  for (Eigen::Index b = 0; b < ids.rows(); ++b) {
    for (Eigen::Index j = 0; j < ids.cols(); ++j) {
      const WordId w = ids(b, j);
      const Scalar dot = hidden.row(b).dot(embed.row(w));
      scores(b, j) = dot + bias(0, w) - static_cast<Scalar>(head.log_kq(w));
    }
  }
  ensure_finite(scores, "nce_scores");
  return scores;
}

template <typename Scalar>
Mat<Scalar> nce_scores_backward(const Mat<Scalar>& hidden, const Mat<Scalar>& embed,
                                const IdMat& ids, const Mat<Scalar>& dscores,
                                Mat<Scalar>& d_embed, Mat<Scalar>& d_bias) {
  Mat<Scalar> d_hidden = Mat<Scalar>::Zero(hidden.rows(), hidden.cols());
  for (Eigen::Index b = 0; b < ids.rows(); ++b) {
    for (Eigen::Index j = 0; j < ids.cols(); ++j) {
      const WordId w = ids(b, j);
      const Scalar ds = dscores(b, j);
      d_hidden.row(b) += ds * embed.row(w);
      d_embed.row(w) += ds * hidden.row(b);
      d_bias(0, w) += ds;
    }
  }
  return d_hidden;
}

// Target ids in column 0, noise draws after.
inline IdMat nce_ids(std::span<const Example> batch, const IdMat& noise) {
  IdMat ids(noise.rows(), noise.cols() + 1);
  for (Eigen::Index b = 0; b < noise.rows(); ++b) {
    ids(b, 0) = batch[static_cast<std::size_t>(b)].target;
    ids.row(b).tail(noise.cols()) = noise.row(b);
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Architectures.

inline constexpr const char* kArchBase = "base";
inline constexpr const char* kArchMixture = "mixture";
inline constexpr const char* kArchAppDependent = "appdep";

template <typename Scalar>
std::vector<double> logprobs_from_logits(const Mat<Scalar>& logits,
                                         std::span<const Example> batch) {
  std::vector<double> out(batch.size());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = static_cast<double>(logits.row(i).maxCoeff());
    double lse = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      lse += std::exp(static_cast<double>(logits(i, j)) - mx);
    }
    const WordId t = batch[static_cast<std::size_t>(i)].target;
    if (t < 0 || t >= logits.cols()) fail(ErrorCode::InvalidArgument, "target id out of range");
    out[static_cast<std::size_t>(i)] =
        static_cast<double>(logits(i, t)) - mx - std::log(lse);
  }
  return out;
}

// Base FOFE NNLM: embedding -> FOFE n-gram context -> FF stack ->
// projection -> tied-embedding softmax output.  Used for both the
// application-specific and the application-agnostic models.
template <typename Scalar>
class BaseFofeLM {
 public:
  static constexpr const char* kArch = kArchBase;
  using ScalarT = Scalar;

  explicit BaseFofeLM(const FofeConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    params_.add("embed", cfg.vocab_size, cfg.embed_dim);
    register_tower(params_, "", cfg.context_n * cfg.embed_dim, cfg.hidden_dim, cfg.embed_dim,
                   cfg.num_ff_layers);
    params_.add("out_bias", 1, cfg.vocab_size);
  }

  BaseFofeLM(const FofeConfig& cfg, std::uint64_t init_seed) : BaseFofeLM(cfg) {
    Rng rng(init_seed);
    for (auto& p : params_) init_uniform(p.value, rng);
  }

  const FofeConfig& config() const { return cfg_; }
  ParamStore<Scalar>& params() { return params_; }
  const ParamStore<Scalar>& params() const { return params_; }

  static std::int64_t parameter_count(const FofeConfig& cfg) {
    return static_cast<std::int64_t>(cfg.vocab_size) * cfg.embed_dim +
           tower_param_count(static_cast<std::int64_t>(cfg.context_n) * cfg.embed_dim,
                             cfg.hidden_dim, cfg.embed_dim, cfg.num_ff_layers) +
           cfg.vocab_size;
  }

  struct Cache {
    Mat<Scalar> x;
    TowerCache<Scalar> tower;
  };

  // [B x E] pre-output representation.
  const Mat<Scalar>& hidden_forward(std::span<const Example> batch, Cache& cache) const {
    cache.x = fofe_input(params_.value("embed"), cfg_, batch);
    return tower_forward(params_, "", cache.x, cfg_.num_ff_layers, cache.tower);
  }

  void hidden_backward(std::span<const Example> batch, const Cache& cache,
                       const Mat<Scalar>& d_hidden) {
    const Mat<Scalar> dx = tower_backward(params_, "", cfg_.num_ff_layers, cache.tower, d_hidden);
    fofe_input_backward(params_.grad("embed"), cfg_, batch, dx);
  }

  Mat<Scalar> logits(std::span<const Example> batch) const {
    Cache cache;
    const Mat<Scalar>& h = hidden_forward(batch, cache);
    return output_logits(h, params_.value("embed"), params_.value("out_bias"));
  }

  double loss_softmax(std::span<const Example> batch, bool do_backward) {
    Cache cache;
    const Mat<Scalar> h = hidden_forward(batch, cache);
    const Mat<Scalar> logits =
        output_logits(h, params_.value("embed"), params_.value("out_bias"));
    std::vector<WordId> targets(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) targets[i] = batch[i].target;
    auto sm = softmax_xent(logits, std::span<const WordId>(targets));
    if (do_backward) {
      const Mat<Scalar> d_hidden =
          output_backward(h, params_.value("embed"), sm.dlogits, params_.grad("embed"),
                          params_.grad("out_bias"));
      hidden_backward(batch, cache, d_hidden);
    }
    return sm.loss;
  }

  double loss_nce(std::span<const Example> batch, const NceHead& head, const IdMat& noise,
                  bool do_backward) {
    Cache cache;
    const Mat<Scalar> h = hidden_forward(batch, cache);
    const IdMat ids = nce_ids(batch, noise);
    const Mat<Scalar> scores =
        nce_scores(h, params_.value("embed"), params_.value("out_bias"), ids, head);
    auto res = nce_loss(scores);
    if (do_backward) {
      const Mat<Scalar> d_hidden =
          nce_scores_backward(h, params_.value("embed"), ids, res.dscores,
                              params_.grad("embed"), params_.grad("out_bias"));
      hidden_backward(batch, cache, d_hidden);
    }
    return res.loss;
  }

  std::vector<double> logprobs(std::span<const Example> batch, std::size_t chunk = 256) const {
    std::vector<double> out;
    out.reserve(batch.size());
    for (std::size_t off = 0; off < batch.size(); off += chunk) {
      const auto n = std::min(chunk, batch.size() - off);
      const auto part = batch.subspan(off, n);
      const auto lp = logprobs_from_logits(logits(part), part);
      out.insert(out.end(), lp.begin(), lp.end());
    }
    return out;
  }

 private:
  FofeConfig cfg_;
  ParamStore<Scalar> params_;
};

// Mixture FOFE NNLM: M parallel expert towers plus a mixture sub-network
// whose softmax output weights the experts' projections before the tied
// softmax layer.
template <typename Scalar>
class MixtureFofeLM {
 public:
  static constexpr const char* kArch = kArchMixture;
  using ScalarT = Scalar;

  explicit MixtureFofeLM(const FofeConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    params_.add("embed", cfg.vocab_size, cfg.embed_dim);
    for (int k = 0; k < cfg.mixture_m; ++k) {
      register_tower(params_, expert_prefix(k), cfg.context_n * cfg.embed_dim, cfg.hidden_dim,
                     cfg.embed_dim, cfg.num_ff_layers);
    }
    for (int i = 0; i < cfg.num_ff_layers; ++i) {
      params_.add(layer_name("gate.", i, "W"),
                  i == 0 ? cfg.context_n * cfg.embed_dim : cfg.hidden_dim, cfg.hidden_dim);
      params_.add(layer_name("gate.", i, "b"), 1, cfg.hidden_dim);
    }
    params_.add("gate.out.W", cfg.hidden_dim, cfg.mixture_m);
    params_.add("gate.out.b", 1, cfg.mixture_m);
    params_.add("out_bias", 1, cfg.vocab_size);
  }

  MixtureFofeLM(const FofeConfig& cfg, std::uint64_t init_seed) : MixtureFofeLM(cfg) {
    Rng rng(init_seed);
    for (auto& p : params_) init_uniform(p.value, rng);
  }

  static std::string expert_prefix(int k) { return "expert" + std::to_string(k) + "."; }

  const FofeConfig& config() const { return cfg_; }
  ParamStore<Scalar>& params() { return params_; }
  const ParamStore<Scalar>& params() const { return params_; }

  static std::int64_t parameter_count(const FofeConfig& cfg) {
    const std::int64_t in = static_cast<std::int64_t>(cfg.context_n) * cfg.embed_dim;
    return static_cast<std::int64_t>(cfg.vocab_size) * cfg.embed_dim +
           cfg.mixture_m * tower_param_count(in, cfg.hidden_dim, cfg.embed_dim,
                                             cfg.num_ff_layers) +
           ff_stack_param_count(in, cfg.hidden_dim, cfg.num_ff_layers) +
           static_cast<std::int64_t>(cfg.hidden_dim) * cfg.mixture_m + cfg.mixture_m +
           cfg.vocab_size;
  }

  struct Cache {
    Mat<Scalar> x;
    std::vector<TowerCache<Scalar>> experts;
    FfStackCache<Scalar> gate_ff;
    Mat<Scalar> gate_logits;
    Mat<Scalar> gate_weights;  // softmax rows, [B x M]
    Mat<Scalar> hidden;
  };

  const Mat<Scalar>& hidden_forward(std::span<const Example> batch, Cache& cache) const {
    cache.x = fofe_input(params_.value("embed"), cfg_, batch);
    cache.experts.resize(static_cast<std::size_t>(cfg_.mixture_m));
    for (int k = 0; k < cfg_.mixture_m; ++k) {
      tower_forward(params_, expert_prefix(k), cache.x, cfg_.num_ff_layers,
                    cache.experts[static_cast<std::size_t>(k)]);
    }
    const Mat<Scalar>& gate_top =
        ff_stack_forward(params_, "gate.", cache.x, cfg_.num_ff_layers, cache.gate_ff);
    cache.gate_logits = affine(gate_top, params_.value("gate.out.W"), params_.value("gate.out.b"));
    cache.gate_weights = softmax_rows(cache.gate_logits);

    cache.hidden = Mat<Scalar>::Zero(cache.x.rows(), cfg_.embed_dim);
    for (int k = 0; k < cfg_.mixture_m; ++k) {
      cache.hidden += (cache.experts[static_cast<std::size_t>(k)].out.array().colwise() *
                       cache.gate_weights.col(k).array())
                          .matrix();
    }
    ensure_finite(cache.hidden, "mixture_combine");
    return cache.hidden;
  }

  void hidden_backward(std::span<const Example> batch, const Cache& cache,
                       const Mat<Scalar>& d_hidden) {
    Mat<Scalar> dx = Mat<Scalar>::Zero(cache.x.rows(), cache.x.cols());
    Mat<Scalar> d_gate_w(cache.gate_weights.rows(), cache.gate_weights.cols());
    for (int k = 0; k < cfg_.mixture_m; ++k) {
      const auto& expert = cache.experts[static_cast<std::size_t>(k)];
      d_gate_w.col(k) = (d_hidden.array() * expert.out.array()).rowwise().sum().matrix();
      const Mat<Scalar> d_expert =
          (d_hidden.array().colwise() * cache.gate_weights.col(k).array()).matrix();
      dx += tower_backward(params_, expert_prefix(k), cfg_.num_ff_layers, expert, d_expert);
    }
    // softmax backward: dz = w .* (dw - rowwise_dot(dw, w))
    Mat<Scalar> d_gate_logits(d_gate_w.rows(), d_gate_w.cols());
    for (Eigen::Index i = 0; i < d_gate_w.rows(); ++i) {
      const Scalar dot = d_gate_w.row(i).dot(cache.gate_weights.row(i));
      d_gate_logits.row(i) =
          (cache.gate_weights.row(i).array() * (d_gate_w.row(i).array() - dot)).matrix();
    }
    const Mat<Scalar> d_gate_top = affine_backward(
        cache.gate_ff.act.back(), params_.value("gate.out.W"), d_gate_logits,
        params_.grad("gate.out.W"), params_.grad("gate.out.b"));
    dx += ff_stack_backward(params_, "gate.", cfg_.num_ff_layers, cache.gate_ff, d_gate_top);
    fofe_input_backward(params_.grad("embed"), cfg_, batch, dx);
  }

  Mat<Scalar> logits(std::span<const Example> batch) const {
    Cache cache;
    const Mat<Scalar>& h = hidden_forward(batch, cache);
    return output_logits(h, params_.value("embed"), params_.value("out_bias"));
  }

  // [B x M] gating weights, exposed for the mixture invariants.
  Mat<Scalar> mixture_weights(std::span<const Example> batch) const {
    Cache cache;
    hidden_forward(batch, cache);
    return cache.gate_weights;
  }

  double loss_softmax(std::span<const Example> batch, bool do_backward) {
    Cache cache;
    const Mat<Scalar> h = hidden_forward(batch, cache);
    const Mat<Scalar> logits =
        output_logits(h, params_.value("embed"), params_.value("out_bias"));
    std::vector<WordId> targets(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) targets[i] = batch[i].target;
    auto sm = softmax_xent(logits, std::span<const WordId>(targets));
    if (do_backward) {
      const Mat<Scalar> d_hidden =
          output_backward(h, params_.value("embed"), sm.dlogits, params_.grad("embed"),
                          params_.grad("out_bias"));
      hidden_backward(batch, cache, d_hidden);
    }
    return sm.loss;
  }

  double loss_nce(std::span<const Example> batch, const NceHead& head, const IdMat& noise,
                  bool do_backward) {
    Cache cache;
    const Mat<Scalar> h = hidden_forward(batch, cache);
    const IdMat ids = nce_ids(batch, noise);
    const Mat<Scalar> scores =
        nce_scores(h, params_.value("embed"), params_.value("out_bias"), ids, head);
    auto res = nce_loss(scores);
    if (do_backward) {
      const Mat<Scalar> d_hidden =
          nce_scores_backward(h, params_.value("embed"), ids, res.dscores,
                              params_.grad("embed"), params_.grad("out_bias"));
      hidden_backward(batch, cache, d_hidden);
    }
    return res.loss;
  }

  std::vector<double> logprobs(std::span<const Example> batch, std::size_t chunk = 256) const {
    std::vector<double> out;
    out.reserve(batch.size());
    for (std::size_t off = 0; off < batch.size(); off += chunk) {
      const auto n = std::min(chunk, batch.size() - off);
      const auto part = batch.subspan(off, n);
      const auto lp = logprobs_from_logits(logits(part), part);
      out.insert(out.end(), lp.begin(), lp.end());
    }
    return out;
  }

 private:
  FofeConfig cfg_;
  ParamStore<Scalar> params_;
};

// Application-Dependent FOFE NNLM: shared embedding and FOFE encoding,
// but a separate expert tower and output bias per application.  A batch
// must be single-application; only that application's parameters are
// touched in forward and backward.
template <typename Scalar>
class AppDependentFofeLM {
 public:
  static constexpr const char* kArch = kArchAppDependent;
  using ScalarT = Scalar;

  explicit AppDependentFofeLM(const FofeConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    params_.add("embed", cfg.vocab_size, cfg.embed_dim);
    register_tower(params_, "va.", cfg.context_n * cfg.embed_dim, cfg.hidden_dim, cfg.embed_dim,
                   cfg.num_ff_layers);
    register_tower(params_, "stt.", cfg.context_n * cfg.embed_dim, cfg.hidden_dim,
                   cfg.embed_dim, cfg.num_ff_layers);
    params_.add("out_bias.va", 1, cfg.vocab_size);
    params_.add("out_bias.stt", 1, cfg.vocab_size);
  }

  AppDependentFofeLM(const FofeConfig& cfg, std::uint64_t init_seed) : AppDependentFofeLM(cfg) {
    Rng rng(init_seed);
    for (auto& p : params_) init_uniform(p.value, rng);
  }

  const FofeConfig& config() const { return cfg_; }
  ParamStore<Scalar>& params() { return params_; }
  const ParamStore<Scalar>& params() const { return params_; }

  static std::int64_t parameter_count(const FofeConfig& cfg) {
    const std::int64_t in = static_cast<std::int64_t>(cfg.context_n) * cfg.embed_dim;
    return static_cast<std::int64_t>(cfg.vocab_size) * cfg.embed_dim +
           2 * tower_param_count(in, cfg.hidden_dim, cfg.embed_dim, cfg.num_ff_layers) +
           2 * static_cast<std::int64_t>(cfg.vocab_size);
  }

  static const char* tower_prefix(ApplicationId app) {
    return app == ApplicationId::VA ? "va." : "stt.";
  }
  static const char* bias_name(ApplicationId app) {
    return app == ApplicationId::VA ? "out_bias.va" : "out_bias.stt";
  }

  struct Cache {
    Mat<Scalar> x;
    TowerCache<Scalar> tower;
    ApplicationId app = ApplicationId::VA;
  };

  static ApplicationId batch_application(std::span<const Example> batch) {
    if (batch.empty()) fail(ErrorCode::InvalidArgument, "empty batch");
    const ApplicationId app = batch.front().app;
    for (const auto& ex : batch) {
      if (ex.app != app) {
        fail(ErrorCode::InvalidArgument,
             "mixed-application batch: application-dependent models require "
             "single-application batches");
      }
    }
    return app;
  }

  const Mat<Scalar>& hidden_forward(std::span<const Example> batch, Cache& cache) const {
    cache.app = batch_application(batch);
    cache.x = fofe_input(params_.value("embed"), cfg_, batch);
    return tower_forward(params_, tower_prefix(cache.app), cache.x, cfg_.num_ff_layers,
                         cache.tower);
  }

  void hidden_backward(std::span<const Example> batch, const Cache& cache,
                       const Mat<Scalar>& d_hidden) {
    const Mat<Scalar> dx = tower_backward(params_, tower_prefix(cache.app), cfg_.num_ff_layers,
                                          cache.tower, d_hidden);
    fofe_input_backward(params_.grad("embed"), cfg_, batch, dx);
  }

  Mat<Scalar> logits(std::span<const Example> batch) const {
    Cache cache;
    const Mat<Scalar>& h = hidden_forward(batch, cache);
    return output_logits(h, params_.value("embed"), params_.value(bias_name(cache.app)));
  }

  double loss_softmax(std::span<const Example> batch, bool do_backward) {
    Cache cache;
    const Mat<Scalar> h = hidden_forward(batch, cache);
    const Mat<Scalar> logits =
        output_logits(h, params_.value("embed"), params_.value(bias_name(cache.app)));
    std::vector<WordId> targets(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) targets[i] = batch[i].target;
    auto sm = softmax_xent(logits, std::span<const WordId>(targets));
    if (do_backward) {
      const Mat<Scalar> d_hidden =
          output_backward(h, params_.value("embed"), sm.dlogits, params_.grad("embed"),
                          params_.grad(bias_name(cache.app)));
      hidden_backward(batch, cache, d_hidden);
    }
    return sm.loss;
  }

  double loss_nce(std::span<const Example> batch, const NceHead& head, const IdMat& noise,
                  bool do_backward) {
    Cache cache;
    const Mat<Scalar> h = hidden_forward(batch, cache);
    const IdMat ids = nce_ids(batch, noise);
    const Mat<Scalar> scores =
        nce_scores(h, params_.value("embed"), params_.value(bias_name(cache.app)), ids, head);
    auto res = nce_loss(scores);
    if (do_backward) {
      const Mat<Scalar> d_hidden =
          nce_scores_backward(h, params_.value("embed"), ids, res.dscores,
                              params_.grad("embed"), params_.grad(bias_name(cache.app)));
      hidden_backward(batch, cache, d_hidden);
    }
    return res.loss;
  }

  // Routes each example through its own application path; result order
  // matches the input order.
  std::vector<double> logprobs(std::span<const Example> batch, std::size_t chunk = 256) const {
    std::vector<double> out(batch.size());
    for (const ApplicationId app : {ApplicationId::VA, ApplicationId::STT}) {
      std::vector<Example> group;
      std::vector<std::size_t> positions;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i].app == app) {
          group.push_back(batch[i]);
          positions.push_back(i);
        }
      }
      for (std::size_t off = 0; off < group.size(); off += chunk) {
        const auto n = std::min(chunk, group.size() - off);
        const std::span<const Example> part(group.data() + off, n);
        const auto lp = logprobs_from_logits(logits(part), part);
        for (std::size_t j = 0; j < n; ++j) out[positions[off + j]] = lp[j];
      }
    }
    return out;
  }

 private:
  FofeConfig cfg_;
  ParamStore<Scalar> params_;
};

}  // namespace fofe

#endif  // FOFE_MODELS_HPP
