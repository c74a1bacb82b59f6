#include "fofe/ngram.hpp"

#include <algorithm>
#include <cmath>

#include "fofe/container.hpp"
#include "fofe/error.hpp"
#include "fofe/text.hpp"

namespace fofe {

NGramLM::NGramLM(int order, std::int32_t vocab_size, double discount)
    : order_(order), vocab_size_(vocab_size), discount_(discount) {
  if (order < 1) fail(ErrorCode::InvalidArgument, "n-gram order must be >= 1");
  if (vocab_size < 1) fail(ErrorCode::InvalidArgument, "vocab size must be >= 1");
  if (discount <= 0.0 || discount >= 1.0) {
    fail(ErrorCode::InvalidArgument, "discount must be in (0,1)");
  }
  levels_.resize(static_cast<std::size_t>(order));
}

void NGramLM::add_query(std::span<const WordId> ids) {
  // One event per word plus the closing </s>; left context is the
  // preceding words with a single <s> pad.
  std::vector<WordId> context = {Vocab::kBos};
  context.insert(context.end(), ids.begin(), ids.end());
  const std::size_t n_events = ids.size() + 1;
  for (std::size_t t = 0; t < n_events; ++t) {
    const WordId target = t < ids.size() ? ids[t] : Vocab::kEos;
    const std::size_t ctx_len = t + 1;  // [<s>, w_0..w_{t-1}]
    const int max_level = std::min<int>(order_ - 1, static_cast<int>(ctx_len));
    for (int j = 0; j <= max_level; ++j) {
      std::vector<WordId> key(context.begin() + static_cast<std::ptrdiff_t>(ctx_len - j),
                              context.begin() + static_cast<std::ptrdiff_t>(ctx_len));
      ContextCounts& node = levels_[static_cast<std::size_t>(j)][key];
      ++node.total;
      ++node.words[target];
    }
    ++total_events_;
  }
}

double NGramLM::prob_level(int level, std::span<const WordId> context, WordId word) const {
  if (level < 0) return 1.0 / static_cast<double>(vocab_size_);
  const auto& table = levels_[static_cast<std::size_t>(level)];
  const std::vector<WordId> key(context.end() - level, context.end());
  const auto it = table.find(key);
  if (it == table.end() || it->second.total == 0) {
    return prob_level(level - 1, context, word);
  }
  const ContextCounts& node = it->second;
  const double total = static_cast<double>(node.total);
  double discounted = 0.0;
  if (const auto wit = node.words.find(word); wit != node.words.end()) {
    discounted = std::max(static_cast<double>(wit->second) - discount_, 0.0) / total;
  }
  const double backoff = discount_ * static_cast<double>(node.words.size()) / total;
  return discounted + backoff * prob_level(level - 1, context, word);
}

double NGramLM::prob(std::span<const WordId> context, WordId word) const {
  if (word < 0 || word >= vocab_size_) fail(ErrorCode::InvalidArgument, "word id out of range");
  const int level = std::min<int>(order_ - 1, static_cast<int>(context.size()));
  return prob_level(level, context, word);
}

double NGramLM::logprob(std::span<const WordId> context, WordId word) const {
  return std::log(prob(context, word));
}

std::vector<double> NGramLM::event_probs(const std::vector<Query>& dev) const {
  std::vector<double> probs;
  for (const auto& q : dev) {
    std::vector<WordId> context = {Vocab::kBos};
    context.insert(context.end(), q.ids.begin(), q.ids.end());
    for (std::size_t t = 0; t <= q.ids.size(); ++t) {
      const WordId target = t < q.ids.size() ? q.ids[t] : Vocab::kEos;
      probs.push_back(prob({context.data(), t + 1}, target));
    }
  }
  return probs;
}

double NGramLM::perplexity(const std::vector<Query>& dev) const {
  if (dev.empty()) fail(ErrorCode::EmptyInput, "empty dev set");
  const std::vector<double> probs = event_probs(dev);
  double sum = 0.0;
  for (const double p : probs) sum += std::log(p);
  return std::exp(-sum / static_cast<double>(probs.size()));
}

NGramLM train_ngram(const std::vector<Query>& corpus, int order, std::int32_t vocab_size,
                    double discount) {
  if (corpus.empty()) fail(ErrorCode::EmptyInput, "empty training corpus");
  NGramLM lm(order, vocab_size, discount);
  for (const auto& q : corpus) lm.add_query(q.ids);
  return lm;
}

void NGramLM::save(const std::string& path, std::uint64_t vocab_hash) const {
  ContainerWriter w(path);
  w.magic("ngram", vocab_hash);
  w.u32(static_cast<std::uint32_t>(order_));
  w.u32(static_cast<std::uint32_t>(vocab_size_));
  w.f64(discount_);
  w.i64(total_events_);
  for (const auto& table : levels_) {
    w.u64(table.size());
    for (const auto& [key, node] : table) {
      w.u32(static_cast<std::uint32_t>(key.size()));
      for (const WordId id : key) w.u32(static_cast<std::uint32_t>(id));
      w.i64(node.total);
      w.u64(node.words.size());
      for (const auto& [word, count] : node.words) {
        w.u32(static_cast<std::uint32_t>(word));
        w.i64(count);
      }
    }
  }
  w.close();
}

NGramLM NGramLM::load(const std::string& path, std::uint64_t* vocab_hash_out) {
  ContainerReader r(path);
  std::uint64_t hash = 0;
  const std::string tag = r.magic(&hash);
  if (tag != "ngram") {
    fail(ErrorCode::InvalidConfig, "'" + path + "' holds a '" + tag + "' model, expected ngram");
  }
  if (vocab_hash_out) *vocab_hash_out = hash;
  const int order = static_cast<int>(r.u32());
  const auto vocab_size = static_cast<std::int32_t>(r.u32());
  const double discount = r.f64();
  NGramLM lm(order, vocab_size, discount);
  lm.total_events_ = r.i64();
  for (auto& table : lm.levels_) {
    const std::uint64_t n_contexts = r.u64();
    for (std::uint64_t c = 0; c < n_contexts; ++c) {
      const std::uint32_t key_len = r.u32();
      std::vector<WordId> key(key_len);
      for (auto& id : key) id = static_cast<WordId>(r.u32());
      ContextCounts node;
      node.total = r.i64();
      const std::uint64_t n_words = r.u64();
      for (std::uint64_t k = 0; k < n_words; ++k) {
        const auto word = static_cast<WordId>(r.u32());
        node.words[word] = r.i64();
      }
      table.emplace(std::move(key), std::move(node));
    }
  }
  return lm;
}

}  // namespace fofe
