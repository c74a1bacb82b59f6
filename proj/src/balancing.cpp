#include "fofe/balancing.hpp"

#include <cmath>

#include "fofe/error.hpp"
#include "fofe/rng.hpp"
#include "fofe/text.hpp"

namespace fofe {

ApplicationMasses application_masses(const std::vector<SourceSpec>& sources) {
  ApplicationMasses m;
  for (const auto& s : sources) {
    (s.application == ApplicationId::VA ? m.va : m.stt) += s.alpha;
  }
  return m;
}

InterpolationResult optimize_interpolation(const NGramLM& lm_va, const NGramLM& lm_stt,
                                           const std::vector<Query>& dev) {
  if (dev.empty()) fail(ErrorCode::EmptyInput, "empty dev set for interpolation");

  const std::vector<double> p_va = lm_va.event_probs(dev);
  const std::vector<double> p_stt = lm_stt.event_probs(dev);
  const auto n = static_cast<double>(p_va.size());

  InterpolationResult res;
  double beta = 0.5;
  for (int it = 0; it < 200; ++it) {
    double loglik = 0.0;
    double resp_sum = 0.0;
    for (std::size_t t = 0; t < p_va.size(); ++t) {
      const double mix = beta * p_va[t] + (1.0 - beta) * p_stt[t];
      loglik += std::log(mix);
      resp_sum += beta * p_va[t] / mix;
    }
    res.loglik_trace.push_back(loglik);
    res.iterations = it + 1;
    const double next = resp_sum / n;
    const bool converged = std::abs(next - beta) < 1e-6;
    beta = next;
    if (converged) break;
  }
  res.beta_va = beta;
  res.beta_stt = 1.0 - beta;
  res.dev_perplexity = mixture_perplexity(lm_va, lm_stt, dev, beta);
  return res;
}

double mixture_perplexity(const NGramLM& lm_va, const NGramLM& lm_stt,
                          const std::vector<Query>& dev, double beta_va) {
  if (dev.empty()) fail(ErrorCode::EmptyInput, "empty dev set");
  const std::vector<double> p_va = lm_va.event_probs(dev);
  const std::vector<double> p_stt = lm_stt.event_probs(dev);
  double sum = 0.0;
  for (std::size_t t = 0; t < p_va.size(); ++t) {
    sum += std::log(beta_va * p_va[t] + (1.0 - beta_va) * p_stt[t]);
  }
  return std::exp(-sum / static_cast<double>(p_va.size()));
}

BalanceSolution balanced_weights(const std::vector<SourceSpec>& sources, double beta_va,
                                 double beta_stt) {
  if (std::abs(beta_va + beta_stt - 1.0) > 1e-9 || beta_va < 0.0 || beta_stt < 0.0) {
    fail(ErrorCode::InvalidArgument, "betas must be non-negative and sum to 1");
  }
  const ApplicationMasses masses = application_masses(sources);

  BalanceSolution sol;
  sol.alpha_bar_va = masses.va;
  sol.alpha_bar_stt = masses.stt;
  sol.beta_va = beta_va;
  sol.beta_stt = beta_stt;

  auto ratio = [](double beta, double alpha_bar, const char* app) {
    if (alpha_bar == 0.0) {
      if (beta == 0.0) return 0.0;
      fail(ErrorCode::InvalidArgument,
           std::string("cannot redistribute mass to empty application ") + app);
    }
    return beta / alpha_bar;
  };
  sol.gamma_va = ratio(beta_va, masses.va, "VA");
  sol.gamma_stt = ratio(beta_stt, masses.stt, "STT");

  double denom = 0.0;
  std::vector<double> scaled(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const double gamma =
        sources[i].application == ApplicationId::VA ? sol.gamma_va : sol.gamma_stt;
    scaled[i] = gamma * sources[i].alpha;
    denom += scaled[i];
  }
  sol.lambda.resize(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) sol.lambda[i] = scaled[i] / denom;
  return sol;
}

std::vector<Query> make_balanced_dev(const std::vector<Query>& dev_va,
                                     const std::vector<Query>& dev_stt) {
  auto total_words = [](const std::vector<Query>& qs) {
    std::int64_t n = 0;
    for (const auto& q : qs) n += static_cast<std::int64_t>(q.ids.size());
    return n;
  };
  const std::int64_t va_words = total_words(dev_va);
  const std::int64_t stt_words = total_words(dev_stt);
  const std::int64_t target = std::min(va_words, stt_words);

  auto take = [target](const std::vector<Query>& qs) {
    std::vector<Query> out;
    std::int64_t n = 0;
    for (const auto& q : qs) {
      if (n >= target) break;
      out.push_back(q);
      n += static_cast<std::int64_t>(q.ids.size());
    }
    return out;
  };
  std::vector<Query> dev = take(dev_va);
  const std::vector<Query> stt_part = take(dev_stt);
  dev.insert(dev.end(), stt_part.begin(), stt_part.end());
  return dev;
}

SampleResult sample_corpus(const std::vector<SourceSpec>& sources,
                           const std::vector<double>& lambda, std::int64_t total_tokens,
                           double heldout_fraction, std::uint64_t seed) {
  if (lambda.size() != sources.size()) {
    fail(ErrorCode::InvalidArgument, "lambda size does not match manifest");
  }
  double sum = 0.0;
  for (const double l : lambda) {
    if (l < 0.0) fail(ErrorCode::InvalidArgument, "negative sampling weight");
    sum += l;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail(ErrorCode::InvalidArgument, "lambda must sum to 1");
  if (total_tokens < 1) fail(ErrorCode::InvalidArgument, "total_tokens must be >= 1");
  if (heldout_fraction < 0.0 || heldout_fraction >= 1.0) {
    fail(ErrorCode::InvalidArgument, "heldout_fraction must be in [0,1)");
  }

  std::vector<std::vector<std::string>> lines(sources.size());
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (lambda[i] == 0.0) continue;
    lines[i] = load_lines(sources[i].path);
    if (lines[i].empty()) {
      fail(ErrorCode::InvalidConfig, "source '" + sources[i].id + "' has no usable lines");
    }
  }

  // Fallback index for the (rounding-only) case where u lands past the
  // cumulative sum; must be a source with positive weight.
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    if (lambda[i] > 0.0) last_positive = i;
  }

  Rng rng(seed);
  SampleResult res;
  res.draws_per_source.assign(sources.size(), 0);
  res.tokens_per_source.assign(sources.size(), 0);
  std::int64_t tokens = 0;
  std::int64_t draw = 0;
  while (tokens < total_tokens) {
    const double u = rng.next_double();
    std::size_t src = last_positive;
    double cum = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i) {
      cum += lambda[i];
      if (u < cum) { src = i; break; }
    }
    if (lines[src].empty()) src = last_positive;
    const std::string& line = lines[src][rng.next_index(lines[src].size())];
    const auto n_words = static_cast<std::int64_t>(tokenize(line).size());

    // Heldout membership is a pure function of the draw index.
    const bool heldout = std::floor(static_cast<double>(draw + 1) * heldout_fraction) >
                         std::floor(static_cast<double>(draw) * heldout_fraction);
    SampledLine sampled{sources[src].application, line};
    if (heldout) {
      res.heldout.push_back(std::move(sampled));
      res.heldout_tokens += n_words;
    } else {
      res.train.push_back(std::move(sampled));
      res.train_tokens += n_words;
    }
    ++res.draws_per_source[src];
    res.tokens_per_source[src] += n_words;
    tokens += n_words;
    ++draw;
  }
  return res;
}

}  // namespace fofe
