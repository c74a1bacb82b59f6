#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fofe/eval.hpp"
#include "fofe/rng.hpp"

using namespace fofe;

namespace {

FofeConfig eval_config(std::int32_t vocab, int n = 3) {
  FofeConfig cfg;
  cfg.forgetting_factor = 0.7;
  cfg.context_n = n;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 12;
  cfg.num_ff_layers = 2;
  cfg.vocab_size = vocab;
  return cfg;
}

std::vector<Query> random_queries(std::int32_t vocab, std::size_t count, std::size_t max_len,
                                  std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Query> out;
  for (std::size_t i = 0; i < count; ++i) {
    Query q;
    q.app = rng.next_double() < 0.5 ? ApplicationId::VA : ApplicationId::STT;
    const std::size_t len = 1 + rng.next_index(max_len);
    for (std::size_t t = 0; t < len; ++t) {
      q.ids.push_back(static_cast<WordId>(3 + rng.next_index(static_cast<std::size_t>(vocab - 3))));
    }
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace

TEST_CASE("degenerate model evaluates to uniform perplexity V") {
  const FofeConfig cfg = eval_config(23);
  BaseFofeLM<float> model(cfg);  // zero-initialized parameters
  const auto queries = random_queries(23, 30, 6, 5);
  const EvalReport report = model_perplexity(model, queries, 8);
  CHECK(report.perplexity == doctest::Approx(23.0).epsilon(1e-5));
  CHECK(report.events == report.word_tokens + 30);
}

TEST_CASE("known 0.5 probabilities give perplexity 2") {
  // V=2 zero model: logits are identically zero, so every event has
  // probability exactly 1/2; two such events mean exp(-mean log 1/2) = 2.
  const FofeConfig cfg = eval_config(2);
  BaseFofeLM<double> model(cfg);
  std::vector<Example> events(2);
  events[0].history = {0};
  events[0].target = 1;
  events[1].history = {0, 1};
  events[1].target = 0;
  const auto lp = model.logprobs(events);
  const double ppl = std::exp(-(lp[0] + lp[1]) / 2.0);
  CHECK(ppl == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("context limit is a no-op for queries within the limit") {
  const FofeConfig cfg = eval_config(40);
  BaseFofeLM<float> model(cfg, 77);
  const auto queries = random_queries(40, 25, 8, 6);  // lengths 1..8
  const EvalReport limited = model_perplexity(model, queries, 8);
  const EvalReport unlimited = model_perplexity(model, queries, 1000);
  CHECK(limited.perplexity == unlimited.perplexity);
}

TEST_CASE("a shorter context limit changes scores for long queries") {
  const FofeConfig cfg = eval_config(40, 4);
  BaseFofeLM<float> model(cfg, 78);
  const auto queries = random_queries(40, 20, 14, 7);
  const EvalReport narrow = model_perplexity(model, queries, 2);
  const EvalReport wide = model_perplexity(model, queries, 10);
  CHECK(narrow.perplexity != wide.perplexity);
}

TEST_CASE("perplexity is invariant to query order") {
  const FofeConfig cfg = eval_config(31);
  MixtureFofeLM<float> model(cfg, 81);
  auto queries = random_queries(31, 40, 7, 8);
  const EvalReport a = model_perplexity(model, queries, 8);
  std::reverse(queries.begin(), queries.end());
  const EvalReport b = model_perplexity(model, queries, 8);
  // reordering regroups the float32 batches; agreement is up to GEMM
  // rounding, not bitwise
  CHECK(a.perplexity == doctest::Approx(b.perplexity).epsilon(1e-9));
}

TEST_CASE("ad evaluation routes each query by its tag") {
  const FofeConfig cfg = eval_config(29);
  AppDependentFofeLM<float> model(cfg, 91);
  auto queries = random_queries(29, 30, 6, 9);
  const EvalReport mixed = model_perplexity(model, queries, 8);
  CHECK(mixed.perplexity > 1.0);

  // flipping every tag changes the result (different sub-networks)
  for (auto& q : queries) {
    q.app = q.app == ApplicationId::VA ? ApplicationId::STT : ApplicationId::VA;
  }
  const EvalReport flipped = model_perplexity(model, queries, 8);
  CHECK(mixed.perplexity != flipped.perplexity);
}

TEST_CASE("nearest-rank percentile hand oracle") {
  std::vector<double> samples;
  for (int i = 100; i >= 1; --i) samples.push_back(i);
  CHECK(nearest_rank_percentile(samples, 95.0) == 95.0);
  CHECK(nearest_rank_percentile(samples, 50.0) == 50.0);
  CHECK(nearest_rank_percentile(samples, 100.0) == 100.0);
  CHECK(nearest_rank_percentile(samples, 1.0) == 1.0);
  CHECK(nearest_rank_percentile({7.0}, 95.0) == 7.0);
  CHECK(nearest_rank_percentile({3.0, 1.0, 2.0}, 50.0) == 2.0);
  CHECK_THROWS_AS(nearest_rank_percentile({}, 95.0), FofeError);
  CHECK_THROWS_AS(nearest_rank_percentile({1.0}, 0.0), FofeError);
}

TEST_CASE("relative delta convention: slower candidate is negative") {
  CHECK(relative_delta_pct(10.0, 12.0) == doctest::Approx(-20.0).epsilon(1e-12));
  CHECK(relative_delta_pct(10.0, 8.0) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(relative_delta_pct(10.0, 10.0) == 0.0);
}

TEST_CASE("bench produces repeats x queries samples with ordered percentiles") {
  const FofeConfig cfg = eval_config(25);
  BaseFofeLM<float> model(cfg, 99);
  const auto queries = random_queries(25, 12, 6, 10);
  const BenchReport report = bench_latency(model, queries, 3, 4, 8);
  CHECK(report.repeats.size() == 3);
  std::size_t samples = 0;
  for (const auto& rep : report.repeats) {
    samples += rep.latencies_ms.size();
    CHECK(rep.p95_ms >= rep.p50_ms);
    CHECK(rep.p50_ms >= 0.0);
  }
  CHECK(samples == 3 * queries.size());
  CHECK(report.p95_avg_ms > 0.0);
  CHECK(!report.machine.empty());
  CHECK(!report.timer_warning);  // steady_clock is nanosecond-resolution here
}
