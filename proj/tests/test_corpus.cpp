#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "fofe/manifest.hpp"
#include "fofe/synthetic.hpp"
#include "fofe/text.hpp"
#include "test_util.hpp"

using namespace fofe;

TEST_CASE("tokenize splits on whitespace and keeps punctuation") {
  CHECK(tokenize("call mom") == std::vector<std::string>{"call", "mom"});
  CHECK(tokenize("i miss you .") == std::vector<std::string>{"i", "miss", "you", "."});
  CHECK(tokenize("  a   b ") == std::vector<std::string>{"a", "b"});
  CHECK(tokenize("").empty());
  CHECK(tokenize(" \t\n ").empty());
  CHECK(tokenize("Don't FOLD case") == std::vector<std::string>{"Don't", "FOLD", "case"});
}

TEST_CASE("tokenize treats unicode spaces as separators") {
  // U+00A0 no-break space, U+3000 ideographic space
  CHECK(tokenize("a\xc2\xa0m") == std::vector<std::string>{"a", "m"});
  CHECK(tokenize("\xe4\xbd\xa0\xe3\x80\x80\xe5\xa5\xbd") ==
        std::vector<std::string>{"\xe4\xbd\xa0", "\xe5\xa5\xbd"});
}

TEST_CASE("build_vocab keeps top-k with lexicographic tie break") {
  TempDir dir;
  SUBCASE("single most frequent") {
    const auto p = write_text(dir, "c.txt", "a a b\n");
    const Vocab v = build_vocab({p}, 1);
    CHECK(v.size() == 4);
    CHECK(v.contains("a"));
    CHECK(!v.contains("b"));
    CHECK(v.id_of("b") == Vocab::kUnk);
  }
  SUBCASE("tie broken lexicographically") {
    const auto p = write_text(dir, "c.txt", "b a b a\n");
    const Vocab v = build_vocab({p}, 2);
    CHECK(v.word_of(3) == "a");
    CHECK(v.word_of(4) == "b");
  }
  SUBCASE("empty corpus errors") {
    const auto p = write_text(dir, "c.txt", "\n\n");
    CHECK_THROWS_WITH_AS(build_vocab({p}, 10), "no tokens", FofeError);
  }
}

TEST_CASE("build_vocab truncation matches a brute-force frequency sort") {
  // 500 distinct words with Zipf-ish counts; the oracle sorts the exact
  // count table and takes the top 100.
  TempDir dir;
  std::ostringstream corpus;
  std::map<std::string, int> truth;
  for (int w = 0; w < 500; ++w) {
    const std::string word = "w" + std::to_string(w);
    const int count = std::max(1, 1000 / (w + 1));
    truth[word] = count;
    for (int c = 0; c < count; ++c) corpus << word << ' ';
    corpus << '\n';
  }
  const auto p = write_text(dir, "zipf.txt", corpus.str());
  const Vocab v = build_vocab({p}, 100);
  CHECK(v.size() == 103);

  std::vector<std::pair<std::string, int>> sorted(truth.begin(), truth.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  int in_vocab = 0;
  int mapped_to_unk = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const bool kept = v.contains(sorted[i].first);
    if (i < 100) {
      CHECK(kept);
    } else {
      CHECK(!kept);
    }
    kept ? ++in_vocab : ++mapped_to_unk;
  }
  CHECK(in_vocab == 100);
  CHECK(mapped_to_unk == 400);
}

TEST_CASE("build_vocab is invariant to input file order") {
  TempDir dir;
  const auto p1 = write_text(dir, "a.txt", "x y z x\n");
  const auto p2 = write_text(dir, "b.txt", "y q r y\n");
  const Vocab v1 = build_vocab({p1, p2}, 4);
  const Vocab v2 = build_vocab({p2, p1}, 4);
  CHECK(v1.hash() == v2.hash());
}

TEST_CASE("vocab round trips words and survives save/load") {
  TempDir dir;
  const Vocab v({"alpha", "beta", "gamma"});
  CHECK(v.size() == 6);
  for (WordId id = 0; id < v.size(); ++id) {
    CHECK(v.id_of(v.word_of(id)) == id);
  }
  const auto p = dir.path("vocab.txt");
  v.save(p);
  const Vocab loaded = Vocab::load(p);
  CHECK(loaded.hash() == v.hash());
  CHECK(loaded.id_of("gamma") == v.id_of("gamma"));
}

TEST_CASE("manifest parsing validates the alpha sum") {
  TempDir dir;
  const auto va = write_text(dir, "va.txt", "call mom\n");
  const auto stt = write_text(dir, "stt.txt", "i miss you .\n");
  SUBCASE("valid manifest round trips") {
    std::vector<SourceSpec> sources = {
        {"va_user", va, ApplicationId::VA, 0.6},
        {"stt_user", stt, ApplicationId::STT, 0.4},
    };
    const auto mp = dir.path("m.txt");
    save_manifest(sources, mp);
    const auto loaded = load_manifest(mp);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].id == "va_user");
    CHECK(loaded[0].application == ApplicationId::VA);
    CHECK(loaded[1].alpha == doctest::Approx(0.4));
  }
  SUBCASE("alphas not summing to one are rejected") {
    const auto mp = write_text(dir, "bad.txt",
                               "[a]\npath = " + va +
                                   "\napplication = VA\nalpha = 0.6\n"
                                   "[b]\npath = " +
                                   stt + "\napplication = STT\nalpha = 0.3\n");
    CHECK_THROWS_AS(load_manifest(mp), FofeError);
  }
  SUBCASE("missing file is rejected") {
    const auto mp = write_text(dir, "bad2.txt",
                               "[a]\npath = /nonexistent/x.txt\napplication = VA\nalpha = 1\n");
    CHECK_THROWS_AS(load_manifest(mp), FofeError);
  }
  SUBCASE("unknown application is rejected") {
    const auto mp = write_text(
        dir, "bad3.txt", "[a]\npath = " + va + "\napplication = FOO\nalpha = 1\n");
    CHECK_THROWS_AS(load_manifest(mp), FofeError);
  }
}

TEST_CASE("tagged corpus lines carry their application") {
  TempDir dir;
  const Vocab v({"call", "mom", "i", "miss", "you", "."});
  const auto p = write_text(dir, "c.txt", "VA\tcall mom\nSTT\ti miss you .\nmiss call\n");
  CorpusStats stats;
  const auto queries = load_queries(p, v, ApplicationId::VA, &stats);
  REQUIRE(queries.size() == 3);
  CHECK(queries[0].app == ApplicationId::VA);
  CHECK(queries[1].app == ApplicationId::STT);
  CHECK(queries[2].app == ApplicationId::VA);  // default
  CHECK(queries[1].ids.size() == 4);
  CHECK(stats.tokens == 8);
  CHECK(stats.oov_tokens == 0);
}

static double mean_len(const std::vector<std::string>& lines) {
  double total = 0.0;
  for (const auto& l : lines) total += static_cast<double>(tokenize(l).size());
  return total / static_cast<double>(lines.size());
}

static std::map<std::string, double> unigram_dist(const std::vector<std::string>& lines) {
  std::map<std::string, double> counts;
  double total = 0.0;
  for (const auto& l : lines) {
    for (const auto& t : tokenize(l)) {
      counts[t] += 1.0;
      total += 1.0;
    }
  }
  for (auto& [w, c] : counts) c /= total;
  return counts;
}

TEST_CASE("synthetic corpus: determinism, length gap, distribution gap") {
  const SyntheticSpec spec;
  const SyntheticCorpus c1 = generate_synthetic(spec, 1);
  const SyntheticCorpus c2 = generate_synthetic(spec, 1);
  CHECK(c1.va_lines == c2.va_lines);
  CHECK(c1.stt_lines == c2.stt_lines);
  const SyntheticCorpus c3 = generate_synthetic(spec, 2);
  CHECK(c1.va_lines != c3.va_lines);

  CHECK(mean_len(c1.va_lines) < mean_len(c1.stt_lines));

  // total-variation distance between the two unigram distributions
  const auto pva = unigram_dist(c1.va_lines);
  const auto pstt = unigram_dist(c1.stt_lines);
  std::map<std::string, double> all;
  for (const auto& [w, p] : pva) all[w] += 0;
  for (const auto& [w, p] : pstt) all[w] += 0;
  double tv = 0.0;
  for (const auto& [w, unused] : all) {
    const double a = pva.count(w) ? pva.at(w) : 0.0;
    const double b = pstt.count(w) ? pstt.at(w) : 0.0;
    tv += std::abs(a - b);
  }
  tv /= 2.0;
  CHECK(tv > 0.1);
}

TEST_CASE("write_synthetic emits byte-identical files for equal seeds") {
  TempDir d1, d2;
  SyntheticSpec spec;
  spec.va_queries = 200;
  spec.stt_queries = 150;
  write_synthetic(spec, 7, d1.path());
  write_synthetic(spec, 7, d2.path());
  CHECK(read_file(d1.path("va.txt")) == read_file(d2.path("va.txt")));
  CHECK(read_file(d1.path("stt.txt")) == read_file(d2.path("stt.txt")));
  const auto sources = load_manifest(d1.path("manifest.txt"));
  REQUIRE(sources.size() == 2);
  CHECK(sources[0].alpha + sources[1].alpha == doctest::Approx(1.0));
}
