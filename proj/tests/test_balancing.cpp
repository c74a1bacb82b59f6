#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fofe/balancing.hpp"
#include "fofe/rng.hpp"
#include "fofe/synthetic.hpp"
#include "fofe/text.hpp"
#include "test_util.hpp"

using namespace fofe;

namespace {

std::vector<SourceSpec> manifest3() {
  return {{"va1", "", ApplicationId::VA, 0.3},
          {"va2", "", ApplicationId::VA, 0.3},
          {"stt1", "", ApplicationId::STT, 0.4}};
}

// Random valid manifest: 1..6 sources per application, alphas normalized.
std::vector<SourceSpec> random_manifest(Rng& rng) {
  std::vector<SourceSpec> sources;
  const std::size_t n_va = 1 + rng.next_index(6);
  const std::size_t n_stt = 1 + rng.next_index(6);
  double sum = 0.0;
  for (std::size_t i = 0; i < n_va + n_stt; ++i) {
    SourceSpec s;
    s.id = "s" + std::to_string(i);
    s.application = i < n_va ? ApplicationId::VA : ApplicationId::STT;
    s.alpha = rng.next_double(0.05, 1.0);
    sum += s.alpha;
    sources.push_back(s);
  }
  for (auto& s : sources) s.alpha /= sum;
  return sources;
}

struct LmFixture {
  Vocab vocab;
  NGramLM lm_va;
  NGramLM lm_stt;
  std::vector<std::string> va_lines;
  std::vector<std::string> stt_lines;
};

LmFixture make_lm_fixture(std::uint64_t seed) {
  TempDir dir;
  SyntheticSpec spec;
  spec.va_queries = 800;
  spec.stt_queries = 500;
  const SyntheticCorpus corpus = generate_synthetic(spec, seed);
  std::ostringstream va_os, stt_os;
  for (const auto& l : corpus.va_lines) va_os << l << '\n';
  for (const auto& l : corpus.stt_lines) stt_os << l << '\n';
  const auto va_path = write_text(dir, "va.txt", va_os.str());
  const auto stt_path = write_text(dir, "stt.txt", stt_os.str());

  LmFixture fx{build_vocab({va_path, stt_path}, 800), NGramLM(), NGramLM(),
               corpus.va_lines, corpus.stt_lines};
  const auto va_q = load_queries(va_path, fx.vocab, ApplicationId::VA);
  const auto stt_q = load_queries(stt_path, fx.vocab, ApplicationId::STT);
  fx.lm_va = train_ngram(va_q, 3, fx.vocab.size());
  fx.lm_stt = train_ngram(stt_q, 3, fx.vocab.size());
  return fx;
}

std::vector<Query> to_queries(const std::vector<std::string>& lines, const Vocab& vocab,
                              ApplicationId app) {
  std::vector<Query> out;
  for (const auto& l : lines) {
    Query q;
    q.app = app;
    for (const auto& tok : tokenize(l)) q.ids.push_back(vocab.id_of(tok));
    if (!q.ids.empty()) out.push_back(std::move(q));
  }
  return out;
}

struct GridResult {
  double best_beta = 0.0;
  double best_ppl = 0.0;
};

GridResult grid_search(const NGramLM& lm_va, const NGramLM& lm_stt,
                       const std::vector<Query>& dev) {
  GridResult g{0.0, mixture_perplexity(lm_va, lm_stt, dev, 0.0)};
  for (int i = 1; i <= 100; ++i) {
    const double beta = i / 100.0;
    const double ppl = mixture_perplexity(lm_va, lm_stt, dev, beta);
    if (ppl < g.best_ppl) {
      g.best_ppl = ppl;
      g.best_beta = beta;
    }
  }
  return g;
}

}  // namespace

TEST_CASE("application_masses sums per application") {
  SUBCASE("two sources") {
    const std::vector<SourceSpec> s = {{"v", "", ApplicationId::VA, 0.6},
                                       {"d", "", ApplicationId::STT, 0.4}};
    const auto m = application_masses(s);
    CHECK(m.va == doctest::Approx(0.6));
    CHECK(m.stt == doctest::Approx(0.4));
  }
  SUBCASE("grouping") {
    const auto m = application_masses(manifest3());
    CHECK(m.va == doctest::Approx(0.6));
    CHECK(m.stt == doctest::Approx(0.4));
  }
  SUBCASE("degenerate single application") {
    const std::vector<SourceSpec> s = {{"v1", "", ApplicationId::VA, 0.5},
                                       {"v2", "", ApplicationId::VA, 0.5}};
    const auto m = application_masses(s);
    CHECK(m.va == doctest::Approx(1.0));
    CHECK(m.stt == 0.0);
  }
}

TEST_CASE("balanced_weights hand fixtures") {
  SUBCASE("0.6/0.4 with equal betas") {
    const std::vector<SourceSpec> s = {{"v", "", ApplicationId::VA, 0.6},
                                       {"d", "", ApplicationId::STT, 0.4}};
    const auto sol = balanced_weights(s, 0.5, 0.5);
    CHECK(sol.gamma_va == doctest::Approx(5.0 / 6.0).epsilon(1e-12));
    CHECK(sol.gamma_stt == doctest::Approx(1.25).epsilon(1e-12));
    CHECK(sol.lambda[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(sol.lambda[1] == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("beta equal to the application masses is the identity") {
    const auto sources = manifest3();
    const auto sol = balanced_weights(sources, 0.6, 0.4);
    CHECK(sol.gamma_va == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sol.gamma_stt == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t i = 0; i < sources.size(); ++i) {
      CHECK(sol.lambda[i] == doctest::Approx(sources[i].alpha).epsilon(1e-12));
    }
  }
  SUBCASE("three sources") {
    const auto sol = balanced_weights(manifest3(), 0.4, 0.6);
    CHECK(sol.gamma_va == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(sol.gamma_stt == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(sol.lambda[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(sol.lambda[1] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(sol.lambda[2] == doctest::Approx(0.6).epsilon(1e-12));
  }
  SUBCASE("redistribution to an empty application fails") {
    const std::vector<SourceSpec> s = {{"v1", "", ApplicationId::VA, 0.5},
                                       {"v2", "", ApplicationId::VA, 0.5}};
    CHECK_THROWS_AS(balanced_weights(s, 0.7, 0.3), FofeError);
    const auto sol = balanced_weights(s, 1.0, 0.0);
    CHECK(sol.gamma_stt == 0.0);
    CHECK(sol.lambda[0] == doctest::Approx(0.5));
  }
  SUBCASE("betas must sum to one") {
    CHECK_THROWS_AS(balanced_weights(manifest3(), 0.5, 0.6), FofeError);
  }
}

TEST_CASE("balanced_weights closed-form properties over random manifests") {
  Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const auto sources = random_manifest(rng);
    const double beta_va = rng.next_double(0.01, 0.99);
    const auto sol = balanced_weights(sources, beta_va, 1.0 - beta_va);
    const auto masses = application_masses(sources);

    // gamma is exactly the ratio beta / alpha_bar
    CHECK(sol.gamma_va == beta_va / masses.va);
    CHECK(sol.gamma_stt == (1.0 - beta_va) / masses.stt);

    double lambda_sum = 0.0;
    for (const double l : sol.lambda) {
      CHECK(l >= 0.0);
      lambda_sum += l;
    }
    CHECK(std::abs(lambda_sum - 1.0) <= 1e-12);

    // within an application the original ratios are preserved
    for (std::size_t i = 0; i < sources.size(); ++i) {
      for (std::size_t j = i + 1; j < sources.size(); ++j) {
        if (sources[i].application != sources[j].application) continue;
        CHECK(sol.lambda[i] / sol.lambda[j] ==
              doctest::Approx(sources[i].alpha / sources[j].alpha).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("identical component models are an EM fixed point") {
  const auto fx = make_lm_fixture(21);
  const auto dev = to_queries(generate_synthetic({200, 200, 0.5}, 99).va_lines, fx.vocab,
                              ApplicationId::VA);
  const auto res = optimize_interpolation(fx.lm_va, fx.lm_va, dev);
  CHECK(res.beta_va == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(res.iterations == 1);
}

TEST_CASE("dev drawn from the VA distribution pushes beta toward VA") {
  const auto fx = make_lm_fixture(22);
  const SyntheticCorpus dev_corpus = generate_synthetic({400, 1, 0.5}, 1234);
  const auto dev = to_queries(dev_corpus.va_lines, fx.vocab, ApplicationId::VA);

  const auto res = optimize_interpolation(fx.lm_va, fx.lm_stt, dev);
  CHECK(res.beta_va > 0.9);
  const auto grid = grid_search(fx.lm_va, fx.lm_stt, dev);
  CHECK(std::abs(res.beta_va - grid.best_beta) <= 0.02);
}

TEST_CASE("EM matches the grid oracle on a 50/50 dev mix") {
  const auto fx = make_lm_fixture(23);
  const SyntheticCorpus dev_corpus = generate_synthetic({150, 100, 0.5}, 777);
  auto dev = to_queries(dev_corpus.va_lines, fx.vocab, ApplicationId::VA);
  const auto stt_dev = to_queries(dev_corpus.stt_lines, fx.vocab, ApplicationId::STT);
  dev.insert(dev.end(), stt_dev.begin(), stt_dev.end());

  const auto res = optimize_interpolation(fx.lm_va, fx.lm_stt, dev);
  const auto grid = grid_search(fx.lm_va, fx.lm_stt, dev);
  CHECK(std::abs(res.beta_va - grid.best_beta) <= 0.02);
  CHECK(res.dev_perplexity <= grid.best_ppl + 1e-6);

  // EM monotonicity, per iteration
  for (std::size_t i = 1; i < res.loglik_trace.size(); ++i) {
    CHECK(res.loglik_trace[i] >= res.loglik_trace[i - 1] - 1e-9);
  }
}

TEST_CASE("optimize_interpolation rejects an empty dev set") {
  const auto fx = make_lm_fixture(24);
  CHECK_THROWS_AS(optimize_interpolation(fx.lm_va, fx.lm_stt, {}), FofeError);
}

TEST_CASE("balanced dev matches token counts within one query") {
  std::vector<Query> va, stt;
  for (int i = 0; i < 50; ++i) va.push_back({{3, 4, 5}, ApplicationId::VA});   // 150 words
  for (int i = 0; i < 10; ++i) stt.push_back({{3, 4, 5, 3, 4, 5, 3}, ApplicationId::STT});  // 70
  const auto dev = make_balanced_dev(va, stt);
  std::int64_t va_words = 0, stt_words = 0;
  for (const auto& q : dev) {
    (q.app == ApplicationId::VA ? va_words : stt_words) +=
        static_cast<std::int64_t>(q.ids.size());
  }
  CHECK(stt_words == 70);
  CHECK(va_words >= 70);
  CHECK(va_words <= 70 + 3);  // within one query
}

TEST_CASE("sample_corpus degenerate weights draw only from the weighted source") {
  TempDir dir;
  const auto p1 = write_text(dir, "s1.txt", "only from one\nsampled line two\n");
  const auto p2 = write_text(dir, "s2.txt", "never this\n");
  const std::vector<SourceSpec> sources = {{"s1", p1, ApplicationId::VA, 0.5},
                                           {"s2", p2, ApplicationId::STT, 0.5}};
  const auto res = sample_corpus(sources, {1.0, 0.0}, 200, 0.1, 5);
  CHECK(res.draws_per_source[1] == 0);
  for (const auto& line : res.train) CHECK(line.app == ApplicationId::VA);
  CHECK(res.train_tokens + res.heldout_tokens >= 200);
}

TEST_CASE("sample_corpus determinism and provenance counts") {
  TempDir dir;
  SyntheticSpec spec;
  spec.va_queries = 300;
  spec.stt_queries = 200;
  const auto sources = write_synthetic(spec, 3, dir.path());
  const auto r1 = sample_corpus(sources, {0.5, 0.5}, 5000, 0.2, 42);
  const auto r2 = sample_corpus(sources, {0.5, 0.5}, 5000, 0.2, 42);
  CHECK(r1.train.size() == r2.train.size());
  CHECK(r1.heldout.size() == r2.heldout.size());
  for (std::size_t i = 0; i < r1.train.size(); ++i) {
    CHECK(r1.train[i].text == r2.train[i].text);
  }
  CHECK(r1.draws_per_source == r2.draws_per_source);

  const auto r3 = sample_corpus(sources, {0.5, 0.5}, 5000, 0.2, 43);
  CHECK(r1.train.size() != r3.train.size());  // different draw sequence
}

TEST_CASE("sampled token shares follow lambda and the mean line lengths") {
  TempDir dir;
  SyntheticSpec spec;
  spec.va_queries = 2000;
  spec.stt_queries = 1500;
  const auto sources = write_synthetic(spec, 9, dir.path());

  auto mean_words = [](const std::string& path) {
    const auto lines = load_lines(path);
    double total = 0.0;
    for (const auto& l : lines) total += static_cast<double>(tokenize(l).size());
    return total / static_cast<double>(lines.size());
  };
  const double mva = mean_words(sources[0].path);
  const double mstt = mean_words(sources[1].path);

  const std::vector<double> lambda = {0.5, 0.5};
  const auto res = sample_corpus(sources, lambda, 100000, 0.1, 77);
  const double expected_va_share = lambda[0] * mva / (lambda[0] * mva + lambda[1] * mstt);
  const double actual_va_share =
      static_cast<double>(res.tokens_per_source[0]) /
      static_cast<double>(res.tokens_per_source[0] + res.tokens_per_source[1]);
  CHECK(actual_va_share == doctest::Approx(expected_va_share).epsilon(0.03));
}

TEST_CASE("sampling from an empty weighted source names the source") {
  TempDir dir;
  const auto p1 = write_text(dir, "s1.txt", "a line\n");
  const auto p2 = write_text(dir, "empty.txt", "\n");
  const std::vector<SourceSpec> sources = {{"good", p1, ApplicationId::VA, 0.5},
                                           {"bad", p2, ApplicationId::STT, 0.5}};
  CHECK_THROWS_WITH_AS(sample_corpus(sources, {0.5, 0.5}, 100, 0.0, 1),
                       doctest::Contains("bad"), FofeError);
}
