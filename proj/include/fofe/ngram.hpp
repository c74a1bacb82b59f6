#ifndef FOFE_NGRAM_HPP
#define FOFE_NGRAM_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fofe/types.hpp"

namespace fofe {

// Back-off n-gram LM smoothed with interpolated absolute discounting:
//
//   p_j(w | c) = max(c(c,w) - D, 0) / c(c)  +  D * N1+(c) / c(c) * p_{j-1}(w | c')
//
// with the uniform distribution 1/V as the order-0 base, so every
// in-vocab word has positive probability and each context distribution
// sums to exactly 1.
class NGramLM {
 public:
  NGramLM() = default;
  NGramLM(int order, std::int32_t vocab_size, double discount);

  // Adds the events of one query (every word plus </s>, with <s>-padded
  // left context) to all count levels.
  void add_query(std::span<const WordId> ids);

  double prob(std::span<const WordId> context, WordId word) const;
  double logprob(std::span<const WordId> context, WordId word) const;

  double prob(std::initializer_list<WordId> context, WordId word) const {
    return prob(std::span<const WordId>(context.begin(), context.size()), word);
  }
  double logprob(std::initializer_list<WordId> context, WordId word) const {
    return logprob(std::span<const WordId>(context.begin(), context.size()), word);
  }

  // exp(-(1/T) * sum log p) over every predicted token including </s>.
  double perplexity(const std::vector<Query>& dev) const;

  // Per-event probabilities in dev order; the mixture optimizer consumes
  // these so each component is scored exactly once.
  std::vector<double> event_probs(const std::vector<Query>& dev) const;

  int order() const { return order_; }
  double discount() const { return discount_; }
  std::int32_t vocab_size() const { return vocab_size_; }
  std::int64_t total_events() const { return total_events_; }

  void save(const std::string& path, std::uint64_t vocab_hash) const;
  static NGramLM load(const std::string& path, std::uint64_t* vocab_hash_out = nullptr);

 private:
  struct ContextCounts {
    std::int64_t total = 0;
    std::map<WordId, std::int64_t> words;  // ordered, so serialization is canonical
  };

  double prob_level(int level, std::span<const WordId> context, WordId word) const;

  int order_ = 0;
  std::int32_t vocab_size_ = 0;
  double discount_ = 0.75;
  std::int64_t total_events_ = 0;
  // levels_[j]: context length j -> counts.
  std::vector<std::map<std::vector<WordId>, ContextCounts>> levels_;
};

// Counts every n-gram level of the corpus.  order >= 1, corpus non-empty.
NGramLM train_ngram(const std::vector<Query>& corpus, int order, std::int32_t vocab_size,
                    double discount = 0.75);

}  // namespace fofe

#endif  // FOFE_NGRAM_HPP
