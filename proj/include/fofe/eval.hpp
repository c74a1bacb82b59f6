#ifndef FOFE_EVAL_HPP
#define FOFE_EVAL_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ratio>
#include <string>
#include <thread>
#include <vector>

#include "fofe/dataset.hpp"
#include "fofe/models.hpp"

namespace fofe {

struct EvalReport {
  std::int64_t word_tokens = 0;
  std::int64_t events = 0;  // predicted tokens including </s>
  double perplexity = 0.0;
  double oov_rate = 0.0;
  int context_limit = 8;
};

// Perplexity under the decode-time context limit: per-token log-probs
// with the history truncated to the last context_limit words.
// Application-dependent models route each query by its tag.
template <typename Model>
EvalReport model_perplexity(const Model& model, const std::vector<Query>& queries,
                            int context_limit, const CorpusStats* stats = nullptr) {
  if (queries.empty()) fail(ErrorCode::EmptyInput, "empty test set");
  const std::vector<Example> examples = make_examples(queries, context_limit);
  const std::vector<double> lp = model.logprobs(examples);
  double sum = 0.0;
  for (const double v : lp) sum += v;

  EvalReport report;
  report.context_limit = context_limit;
  report.events = static_cast<std::int64_t>(lp.size());
  for (const auto& q : queries) report.word_tokens += static_cast<std::int64_t>(q.ids.size());
  report.perplexity = std::exp(-sum / static_cast<double>(lp.size()));
  ensure_finite_scalar(report.perplexity, "perplexity");
  if (stats) report.oov_rate = stats->oov_rate();
  return report;
}

// Nearest-rank percentile: the ceil(p/100 * N)-th smallest sample.
inline double nearest_rank_percentile(std::vector<double> samples, double pct) {
  if (samples.empty()) fail(ErrorCode::EmptyInput, "no samples");
  if (pct <= 0.0 || pct > 100.0) fail(ErrorCode::InvalidArgument, "percentile must be in (0,100]");
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * n));
  rank = std::max<std::size_t>(rank, 1);
  return samples[rank - 1];
}

// Relative latency delta in percent, positive = candidate faster,
// matching the reporting convention for P95 reductions vs a baseline.
inline double relative_delta_pct(double baseline, double candidate) {
  return (baseline - candidate) / baseline * 100.0;
}

struct BenchRepeat {
  std::vector<double> latencies_ms;  // per query, in repeat order
  double p50_ms = 0.0;
  double p95_ms = 0.0;
};

struct BenchReport {
  std::vector<BenchRepeat> repeats;
  double p50_avg_ms = 0.0;
  double p95_avg_ms = 0.0;
  std::int64_t query_count = 0;
  int warmup = 0;
  int context_limit = 8;
  bool timer_warning = false;  // set when the clock is coarser than 1us
  std::string machine;
  std::string model_id;
};

inline std::string machine_descriptor() {
  std::string s = "cxx=";
#if defined(__VERSION__)
  s += __VERSION__;
#else
  s += "unknown";
#endif
  s += ", hw_threads=" + std::to_string(std::thread::hardware_concurrency());
  s += ", bench_threads=1";
  return s;
}

// Wall time of full-query scoring (all positions through the softmax
// head), repeated `repeats` times over the query list.  Single-threaded;
// warmup iterations are excluded from the samples.
template <typename Model>
BenchReport bench_latency(const Model& model, const std::vector<Query>& queries, int repeats = 3,
                          int warmup = 50, int context_limit = 8) {
  if (queries.empty()) fail(ErrorCode::EmptyInput, "no benchmark queries");
  if (repeats < 1) fail(ErrorCode::InvalidArgument, "repeats must be >= 1");
  using Clock = std::chrono::steady_clock;

  auto score_query = [&](const Query& q) {
    const std::vector<Query> one = {q};
    const std::vector<Example> examples = make_examples(one, context_limit);
    const std::vector<double> lp = model.logprobs(examples);
    double sum = 0.0;
    for (const double v : lp) sum += v;
    return sum;
  };

  volatile double sink = 0.0;
  for (int i = 0; i < warmup; ++i) {
    sink = sink + score_query(queries[static_cast<std::size_t>(i) % queries.size()]);
  }

  BenchReport report;
  report.query_count = static_cast<std::int64_t>(queries.size());
  report.warmup = warmup;
  report.context_limit = context_limit;
  report.timer_warning = !std::ratio_less_equal<Clock::period, std::micro>::value;
  report.machine = machine_descriptor();

  double p50_sum = 0.0;
  double p95_sum = 0.0;
  for (int r = 0; r < repeats; ++r) {
    BenchRepeat rep;
    rep.latencies_ms.reserve(queries.size());
    for (const auto& q : queries) {
      const auto t0 = Clock::now();
      sink = sink + score_query(q);
      const auto t1 = Clock::now();
      rep.latencies_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    rep.p50_ms = nearest_rank_percentile(rep.latencies_ms, 50.0);
    rep.p95_ms = nearest_rank_percentile(rep.latencies_ms, 95.0);
    p50_sum += rep.p50_ms;
    p95_sum += rep.p95_ms;
    report.repeats.push_back(std::move(rep));
  }
  report.p50_avg_ms = p50_sum / repeats;
  report.p95_avg_ms = p95_sum / repeats;
  return report;
}

}  // namespace fofe

#endif  // FOFE_EVAL_HPP
