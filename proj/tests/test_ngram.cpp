#include <cmath>

#include "doctest.h"
#include "fofe/ngram.hpp"
#include "fofe/rng.hpp"
#include "fofe/text.hpp"
#include "test_util.hpp"

using namespace fofe;

namespace {

// Word ids for a tiny fixed vocab: <unk>=0 <s>=1 </s>=2 a=3 b=4 c=5.
constexpr WordId A = 3, B = 4, C = 5;

std::vector<Query> queries_from(const std::vector<std::vector<WordId>>& seqs) {
  std::vector<Query> out;
  for (const auto& s : seqs) out.push_back({s, ApplicationId::VA});
  return out;
}

double prob_sum_over_vocab(const NGramLM& lm, const std::vector<WordId>& ctx) {
  double sum = 0.0;
  for (WordId w = 0; w < lm.vocab_size(); ++w) sum += lm.prob(ctx, w);
  return sum;
}

}  // namespace

TEST_CASE("train_ngram validates inputs") {
  CHECK_THROWS_AS(train_ngram({}, 3, 6), FofeError);
  CHECK_THROWS_AS(NGramLM(0, 6, 0.75), FofeError);
  CHECK_THROWS_AS(NGramLM(2, 6, 0.0), FofeError);
  CHECK_THROWS_AS(NGramLM(2, 6, 1.0), FofeError);
}

TEST_CASE("unigram model on 'a a a' normalizes and is dominated by a") {
  const auto corpus = queries_from({{A, A, A}});
  for (const double d : {0.25, 0.5, 0.75, 0.9}) {
    const NGramLM lm = train_ngram(corpus, 1, 6, d);
    CHECK(prob_sum_over_vocab(lm, {}) == doctest::Approx(1.0).epsilon(1e-9));
    for (WordId w = 0; w < 6; ++w) {
      if (w != A) CHECK(lm.prob({}, A) > lm.prob({}, w));
      CHECK(lm.prob({}, w) > 0.0);
    }
  }
}

TEST_CASE("unigram trained on 'a' matches the hand-computed discounted mass") {
  // counts: a:1 </s>:1, total 2, 2 distinct types, V=6
  // p(a) = (1-D)/2 + D * (2/2) * (1/6)
  const double d = 0.75;
  const NGramLM lm = train_ngram(queries_from({{A}}), 1, 6, d);
  const double expected = (1.0 - d) / 2.0 + d * (1.0 / 6.0);
  CHECK(std::exp(lm.logprob({}, A)) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("bigram counts on 'a b a b' follow the discounted ratios") {
  const double d = 0.75;
  const NGramLM lm = train_ngram(queries_from({{A, B, A, B}}), 2, 6, d);

  // unigram: a:2 b:2 </s>:1, total 5, 3 types
  const double p1_a = (2.0 - d) / 5.0 + d * (3.0 / 5.0) / 6.0;
  const double p1_b = p1_a;
  // context [a]: {b:2}, total 2, 1 type
  const double p_b_given_a = (2.0 - d) / 2.0 + d * (1.0 / 2.0) * p1_b;
  CHECK(lm.prob({A}, B) == doctest::Approx(p_b_given_a).epsilon(1e-12));
  CHECK(lm.prob({A}, B) > lm.prob({A}, A));

  // unseen word in a seen context: exactly back-off weight times the
  // lower-order probability
  const double backoff_a = d * (1.0 / 2.0);
  CHECK(lm.prob({A}, A) == doctest::Approx(backoff_a * p1_a).epsilon(1e-12));
  CHECK(lm.prob({A}, C) == doctest::Approx(backoff_a * lm.prob({}, C)).epsilon(1e-12));
}

TEST_CASE("order truncation: long contexts equal their last order-1 words") {
  const NGramLM lm = train_ngram(queries_from({{A, B, A, B}, {B, C, A}}), 2, 6, 0.75);
  const std::vector<WordId> long_ctx = {C, C, B, A, B};
  const std::vector<WordId> short_ctx = {B};
  for (WordId w = 0; w < 6; ++w) {
    CHECK(lm.logprob(long_ctx, w) == lm.logprob(short_ctx, w));
  }
}

TEST_CASE("normalization holds for random contexts at every order") {
  const auto corpus = queries_from({{A, B, A}, {B, C}, {C, C, A, B}, {A}, {B, A, C, C}});
  Rng rng(11);
  for (const int order : {1, 2, 3, 4}) {
    const NGramLM lm = train_ngram(corpus, order, 6, 0.75);
    for (int trial = 0; trial < 40; ++trial) {
      std::vector<WordId> ctx(rng.next_index(5));
      for (auto& w : ctx) w = static_cast<WordId>(rng.next_index(6));
      CHECK(prob_sum_over_vocab(lm, ctx) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("order-1 model ignores context") {
  const NGramLM lm = train_ngram(queries_from({{A, B}, {C}}), 1, 6, 0.75);
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<WordId> ctx(rng.next_index(4));
    for (auto& w : ctx) w = static_cast<WordId>(rng.next_index(6));
    for (WordId w = 0; w < 6; ++w) CHECK(lm.prob(ctx, w) == lm.prob({}, w));
  }
}

TEST_CASE("uniform model (no counts) has perplexity V on any text") {
  const NGramLM lm(1, 7, 0.75);
  const auto dev = queries_from({{A, B, C}, {C}});
  CHECK(lm.perplexity(dev) == doctest::Approx(7.0).epsilon(1e-12));
}

TEST_CASE("single-query perplexity: p=0.5 per event gives exactly 2") {
  // With corpus "a", discount sqrt(3)-1 makes p(a|<s>) = p(</s>|a) = 1/2
  // at V=4:   1 - D/2 - D^2/4 = 1/2  <=>  D^2 + 2D - 2 = 0.
  const double d = std::sqrt(3.0) - 1.0;
  const NGramLM lm = train_ngram(queries_from({{A}}), 2, 4, d);
  CHECK(lm.prob({Vocab::kBos}, A) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(lm.prob({A}, Vocab::kEos) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(lm.perplexity(queries_from({{A}})) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("training on the dev set itself does not raise dev perplexity") {
  const auto base = queries_from({{A, B, C}, {B, B}, {C, A}});
  const auto dev = queries_from({{A, C, B}, {B, A}});
  auto augmented = base;
  for (int rep = 0; rep < 3; ++rep) {
    augmented.insert(augmented.end(), dev.begin(), dev.end());
  }
  for (const int order : {1, 2, 3}) {
    const NGramLM plain = train_ngram(base, order, 6, 0.75);
    const NGramLM with_dev = train_ngram(augmented, order, 6, 0.75);
    CHECK(with_dev.perplexity(dev) <= plain.perplexity(dev));
  }
}

TEST_CASE("ngram save/load round trips probabilities and bytes") {
  TempDir dir;
  const auto corpus = queries_from({{A, B, A}, {B, C}, {C, C, A, B}});
  const NGramLM lm = train_ngram(corpus, 3, 6, 0.75);
  const auto p1 = dir.path("lm.bin");
  const auto p2 = dir.path("lm2.bin");
  lm.save(p1, 0xabcdef);

  std::uint64_t hash = 0;
  const NGramLM loaded = NGramLM::load(p1, &hash);
  CHECK(hash == 0xabcdef);
  CHECK(loaded.order() == 3);
  const std::vector<WordId> ctx = {A, B};
  for (WordId w = 0; w < 6; ++w) {
    CHECK(loaded.logprob(ctx, w) == lm.logprob(ctx, w));
  }
  loaded.save(p2, hash);
  CHECK(read_file(p1) == read_file(p2));
}

TEST_CASE("loading a truncated model reports the blob error") {
  TempDir dir;
  const NGramLM lm = train_ngram(queries_from({{A, B}}), 2, 6, 0.75);
  const auto p = dir.path("lm.bin");
  lm.save(p, 1);
  const std::string full = read_file(p);
  write_file(p, full.substr(0, full.size() - 7));
  CHECK_THROWS_AS(NGramLM::load(p), FofeError);
  try {
    NGramLM::load(p);
  } catch (const FofeError& e) {
    CHECK(e.code() == ErrorCode::TruncatedBlob);
  }
}
