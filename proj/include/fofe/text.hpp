#ifndef FOFE_TEXT_HPP
#define FOFE_TEXT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fofe/types.hpp"

namespace fofe {

// Splits on Unicode whitespace.  No case folding, no punctuation
// stripping: dictated punctuation marks are ordinary words.
std::vector<std::string> tokenize(std::string_view line);

// Word/id mapping with dense ids 0..size-1.  Ids 0..2 are reserved for
// <unk>, <s>, </s>; the remaining ids are assigned by descending corpus
// frequency with lexicographic tie-breaking.
class Vocab {
 public:
  static constexpr WordId kUnk = 0;
  static constexpr WordId kBos = 1;
  static constexpr WordId kEos = 2;

  Vocab() = default;
  // words must not contain duplicates or reserved tokens.
  explicit Vocab(const std::vector<std::string>& words);

  WordId id_of(std::string_view word) const;  // OOV -> kUnk
  const std::string& word_of(WordId id) const;
  std::int32_t size() const { return static_cast<std::int32_t>(words_.size()); }
  bool contains(std::string_view word) const;

  // FNV-1a over the id-ordered word list; embedded in model files so a
  // model is never evaluated against the wrong vocabulary.
  std::uint64_t hash() const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, WordId> id_of_;
};

// Top-k most frequent tokens across all files plus the reserved tokens.
// Ties are broken by lexicographic word order so the result does not
// depend on file order or hash iteration order.
Vocab build_vocab(const std::vector<std::string>& corpus_paths, std::int64_t top_k);

struct CorpusStats {
  std::int64_t tokens = 0;  // word tokens, excluding </s> events
  std::int64_t oov_tokens = 0;
  double oov_rate() const { return tokens == 0 ? 0.0 : static_cast<double>(oov_tokens) / tokens; }
};

// Reads a corpus file (one query per line; empty lines skipped).  Lines
// may carry a leading "VA\t" or "STT\t" application tag, as written by
// the sample and gen-synthetic commands; untagged lines get default_app.
std::vector<Query> load_queries(const std::string& path, const Vocab& vocab,
                                ApplicationId default_app, CorpusStats* stats = nullptr);

// Raw lines of a corpus file with any application tag stripped.
std::vector<std::string> load_lines(const std::string& path);

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace fofe

#endif  // FOFE_TEXT_HPP
