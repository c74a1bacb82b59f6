#ifndef FOFE_TRAIN_HPP
#define FOFE_TRAIN_HPP

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "fofe/dataset.hpp"
#include "fofe/models.hpp"
#include "fofe/nn.hpp"

namespace fofe {

struct TrainConfig {
  double initial_lr = 0.256;
  int lr_hold_epochs = 16;
  double decay_factor = 0.7;
  int patience = 4;
  double clip_norm = 6.0;
  int max_epochs = 64;
  int nce_k = 4096;
  int batch_size = 256;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  bool use_nce = true;
  int history_limit = 8;

  void validate() const {
    if (initial_lr <= 0.0) fail(ErrorCode::InvalidConfig, "initial lr must be > 0");
    if (decay_factor <= 0.0 || decay_factor >= 1.0) {
      fail(ErrorCode::InvalidConfig, "decay factor must be in (0,1)");
    }
    if (patience < 1) fail(ErrorCode::InvalidConfig, "patience must be >= 1");
    if (lr_hold_epochs < 0) fail(ErrorCode::InvalidConfig, "hold epochs must be >= 0");
    if (max_epochs < 1) fail(ErrorCode::InvalidConfig, "max epochs must be >= 1");
    if (nce_k < 1) fail(ErrorCode::InvalidConfig, "nce k must be >= 1");
    if (batch_size < 1) fail(ErrorCode::InvalidConfig, "batch size must be >= 1");
    if (momentum < 0.0 || momentum >= 1.0) {
      fail(ErrorCode::InvalidConfig, "momentum must be in [0,1)");
    }
  }
};

struct TrainPreset {
  std::string arch;
  TrainConfig train;
  FofeConfig model;
};

// Named presets carrying the published training recipe; model vocab size
// is filled in from the actual vocabulary.
inline TrainPreset train_preset(const std::string& name) {
  TrainPreset p;
  p.model.embed_dim = 256;
  p.model.num_ff_layers = 4;
  p.model.context_n = 8;
  if (name == "as-fofe") {
    p.arch = kArchBase;
    p.model.hidden_dim = 768;
    p.train.initial_lr = 0.256;
    p.train.lr_hold_epochs = 16;
    p.train.max_epochs = 64;
  } else if (name == "aa-fofe") {
    p.arch = kArchBase;
    p.model.hidden_dim = 768;
    p.train.initial_lr = 0.256;
    p.train.lr_hold_epochs = 64;
    p.train.max_epochs = 128;
  } else if (name == "aa-mixture") {
    p.arch = kArchMixture;
    p.model.hidden_dim = 512;
    p.model.mixture_m = 2;
    p.train.initial_lr = 1.024;
    p.train.lr_hold_epochs = 64;
    p.train.max_epochs = 128;
  } else if (name == "ad-fofe") {
    p.arch = kArchAppDependent;
    p.model.hidden_dim = 512;
    p.train.initial_lr = 0.256;
    p.train.lr_hold_epochs = 64;
    p.train.max_epochs = 128;
  } else {
    fail(ErrorCode::InvalidConfig, "unknown preset '" + name +
                                       "' (expected as-fofe, aa-fofe, aa-mixture or ad-fofe)");
  }
  return p;
}

// Learning-rate schedule: the initial rate is held for lr_hold_epochs;
// afterwards each run of `patience` consecutive heldout-perplexity
// increases multiplies the rate by decay_factor once.
class LrSchedule {
 public:
  LrSchedule(double initial_lr, int hold_epochs, double decay_factor, int patience)
      : lr_(initial_lr), hold_(hold_epochs), decay_(decay_factor), patience_(patience) {
    if (patience < 1) fail(ErrorCode::InvalidArgument, "patience must be >= 1");
  }

  // Reports the heldout perplexity measured after an epoch; returns the
  // rate to use for the next epoch.
  double observe(double heldout_ppl) {
    ++epoch_;
    if (epoch_ > 1 && heldout_ppl > prev_ppl_) {
      ++streak_;
    } else {
      streak_ = 0;
    }
    prev_ppl_ = heldout_ppl;
    if (epoch_ >= hold_ && streak_ >= patience_) {
      lr_ *= decay_;
      streak_ = 0;
      ++decays_;
    }
    return lr_;
  }

  double lr() const { return lr_; }
  int decay_count() const { return decays_; }

 private:
  double lr_;
  int hold_;
  double decay_;
  int patience_;
  int epoch_ = 0;
  double prev_ppl_ = std::numeric_limits<double>::quiet_NaN();
  int streak_ = 0;
  int decays_ = 0;
};

// v <- momentum * v + g;  p <- p - lr * v
template <typename Scalar>
void sgd_momentum_step(ParamStore<Scalar>& params, double lr, double momentum) {
  for (auto& p : params) {
    p.momentum = static_cast<Scalar>(momentum) * p.momentum + p.grad;
    p.value -= static_cast<Scalar>(lr) * p.momentum;
    ensure_finite(p.value, "sgd_momentum_step");
  }
}

struct EpochRecord {
  int epoch = 0;
  double heldout_ppl = 0.0;
  double train_loss = 0.0;  // mean batch loss
  double lr = 0.0;          // rate in effect during the epoch
  std::int64_t clip_events = 0;
  double wall_seconds = 0.0;  // excluded from determinism comparisons
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_heldout_ppl = std::numeric_limits<double>::infinity();
};

template <typename Model>
struct TrainOutcome {
  TrainHistory history;
  // Parameter values of the best-heldout epoch (the retained checkpoint);
  // the model itself is left at the final epoch.
  std::vector<Mat<float>> best_values;
};

template <typename Model>
void apply_values(Model& model, const std::vector<Mat<float>>& values) {
  auto& params = model.params();
  if (values.size() != params.size()) fail(ErrorCode::InvalidArgument, "checkpoint mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    params[i].value = values[i].template cast<typename Model::ScalarT>();
  }
}

// Epoch-based minibatch training with momentum SGD, global-norm clipping
// and the LR schedule above.  NCE is the training objective by default;
// heldout perplexity always uses the full softmax.  Deterministic for a
// given (model init, corpus, config) triple.
template <typename Model>
TrainOutcome<Model> train_model(Model& model, const std::vector<Query>& train_queries,
                                const std::vector<Query>& heldout_queries,
                                const TrainConfig& cfg,
                                const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (train_queries.empty()) fail(ErrorCode::EmptyInput, "empty training corpus");
  if (heldout_queries.empty()) fail(ErrorCode::EmptyInput, "empty heldout corpus");
  constexpr bool kAppRouted = std::is_same_v<Model, AppDependentFofeLM<typename Model::ScalarT>>;

  const std::vector<Example> examples = make_examples(train_queries, cfg.history_limit);
  const std::vector<Example> heldout = make_examples(heldout_queries, cfg.history_limit);
  const NceHead nce_head =
      cfg.use_nce
          ? NceHead::from_counts(unigram_counts(train_queries, model.config().vocab_size),
                                 cfg.nce_k)
          : NceHead();

  Rng rng(cfg.seed);
  LrSchedule schedule(cfg.initial_lr, cfg.lr_hold_epochs, cfg.decay_factor, cfg.patience);

  TrainOutcome<Model> outcome;
  auto snapshot = [&model] {
    std::vector<Mat<float>> values;
    values.reserve(model.params().size());
    for (const auto& p : model.params()) values.push_back(p.value.template cast<float>());
    return values;
  };
  outcome.best_values = snapshot();

  double lr = cfg.initial_lr;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto batches = make_batches(examples, cfg.batch_size, kAppRouted, rng);
    double loss_sum = 0.0;
    std::int64_t clip_events = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const std::vector<Example> batch = gather_examples(examples, batches[bi]);
      model.params().zero_grads();
      double loss = 0.0;
      try {
        if (cfg.use_nce) {
          const IdMat noise = nce_head.draw_noise(rng, static_cast<Eigen::Index>(batch.size()));
          loss = model.loss_nce(batch, nce_head, noise, true);
        } else {
          loss = model.loss_softmax(batch, true);
        }
      } catch (const FofeError& e) {
        if (e.code() == ErrorCode::NonFinite) {
          fail(ErrorCode::NonFinite, "training aborted at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(bi) + ": " + e.what());
        }
        throw;
      }
      loss_sum += loss;
      if (clip_global_norm(model.params(), cfg.clip_norm) < 1.0) ++clip_events;
      sgd_momentum_step(model.params(), lr, cfg.momentum);
    }

    const std::vector<double> lp = model.logprobs(heldout);
    double lp_sum = 0.0;
    for (const double v : lp) lp_sum += v;
    const double heldout_ppl = std::exp(-lp_sum / static_cast<double>(lp.size()));
    ensure_finite_scalar(heldout_ppl, "heldout perplexity");

    EpochRecord rec;
    rec.epoch = epoch;
    rec.heldout_ppl = heldout_ppl;
    rec.train_loss = loss_sum / static_cast<double>(batches.size());
    rec.lr = lr;
    rec.clip_events = clip_events;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    outcome.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (heldout_ppl < outcome.history.best_heldout_ppl) {
      outcome.history.best_heldout_ppl = heldout_ppl;
      outcome.history.best_epoch = epoch;
      outcome.best_values = snapshot();
    }
    lr = schedule.observe(heldout_ppl);
  }
  return outcome;
}

}  // namespace fofe

#endif  // FOFE_TRAIN_HPP
