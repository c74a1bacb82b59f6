#ifndef FOFE_BALANCING_HPP
#define FOFE_BALANCING_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fofe/manifest.hpp"
#include "fofe/ngram.hpp"
#include "fofe/types.hpp"

namespace fofe {

struct ApplicationMasses {
  double va = 0.0;
  double stt = 0.0;
};

// Per-application sums of the manifest sampling weights.
ApplicationMasses application_masses(const std::vector<SourceSpec>& sources);

struct InterpolationResult {
  double beta_va = 0.5;
  double beta_stt = 0.5;
  int iterations = 0;
  std::vector<double> loglik_trace;  // per-iteration dev log-likelihood
  double dev_perplexity = 0.0;       // at the returned betas
};

// EM for the two-component mixture p = beta_va*p_va + beta_stt*p_stt,
// maximizing dev likelihood.  Starts at (0.5, 0.5); stops when
// |delta beta| < 1e-6 or after 200 iterations.
InterpolationResult optimize_interpolation(const NGramLM& lm_va, const NGramLM& lm_stt,
                                           const std::vector<Query>& dev);

// Mixture perplexity at fixed weights, for before/after reporting and
// the grid-search oracle.
double mixture_perplexity(const NGramLM& lm_va, const NGramLM& lm_stt,
                          const std::vector<Query>& dev, double beta_va);

struct BalanceSolution {
  double alpha_bar_va = 0.0;
  double alpha_bar_stt = 0.0;
  double beta_va = 0.0;
  double beta_stt = 0.0;
  double gamma_va = 0.0;
  double gamma_stt = 0.0;
  std::vector<double> lambda;  // per source, manifest order
};

// Closed-form balanced sampling weights:
//   gamma_x  = beta_x / alpha_bar_x
//   lambda_i = gamma_rho(i) * alpha_i / sum_j gamma_rho(j) * alpha_j
BalanceSolution balanced_weights(const std::vector<SourceSpec>& sources, double beta_va,
                                 double beta_stt);

// Equal token counts of both dev sides; the larger side is truncated to
// the smaller side's word total, to within one query.
std::vector<Query> make_balanced_dev(const std::vector<Query>& dev_va,
                                     const std::vector<Query>& dev_stt);

struct SampledLine {
  ApplicationId app;
  std::string text;
};

struct SampleResult {
  std::vector<SampledLine> train;
  std::vector<SampledLine> heldout;
  std::vector<std::int64_t> draws_per_source;
  std::vector<std::int64_t> tokens_per_source;
  std::int64_t train_tokens = 0;
  std::int64_t heldout_tokens = 0;
};

// Draws lines with replacement: source i with probability lambda[i],
// then a uniform line of that source, until the word budget is reached.
// Draw index determines the train/heldout split, so the two sets are
// disjoint by construction.
SampleResult sample_corpus(const std::vector<SourceSpec>& sources,
                           const std::vector<double>& lambda, std::int64_t total_tokens,
                           double heldout_fraction, std::uint64_t seed);

}  // namespace fofe

#endif  // FOFE_BALANCING_HPP
