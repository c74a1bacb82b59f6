#ifndef FOFE_DATASET_HPP
#define FOFE_DATASET_HPP

#include <vector>

#include "fofe/models.hpp"
#include "fofe/rng.hpp"
#include "fofe/text.hpp"

namespace fofe {

// One prediction event per word plus one for </s>.  The encoded history
// is <s> followed by the last `history_limit` preceding words; the
// decode-time context limit applies to real words, with <s> marking the
// (possibly elided) sentence start.
inline std::vector<Example> make_examples(const std::vector<Query>& queries, int history_limit) {
  if (history_limit < 1) fail(ErrorCode::InvalidArgument, "history limit must be >= 1");
  std::vector<Example> out;
  for (const auto& q : queries) {
    const auto len = q.ids.size();
    for (std::size_t t = 0; t <= len; ++t) {
      Example ex;
      ex.app = q.app;
      ex.target = t < len ? q.ids[t] : Vocab::kEos;
      const std::size_t take = std::min<std::size_t>(t, static_cast<std::size_t>(history_limit));
      ex.history.reserve(take + 1);
      ex.history.push_back(Vocab::kBos);
      ex.history.insert(ex.history.end(), q.ids.begin() + static_cast<std::ptrdiff_t>(t - take),
                        q.ids.begin() + static_cast<std::ptrdiff_t>(t));
      out.push_back(std::move(ex));
    }
  }
  return out;
}

// Index batches in seeded shuffle order.  With single_app_batches, each
// batch holds one application only and the batch sequence interleaves
// the applications in shuffled order (the multi-task training contract).
inline std::vector<std::vector<std::size_t>> make_batches(const std::vector<Example>& examples,
                                                          int batch_size,
                                                          bool single_app_batches, Rng& rng) {
  if (batch_size < 1) fail(ErrorCode::InvalidArgument, "batch size must be >= 1");
  std::vector<std::vector<std::size_t>> batches;
  auto cut = [&](std::vector<std::size_t>& idx) {
    for (std::size_t off = 0; off < idx.size(); off += static_cast<std::size_t>(batch_size)) {
      const auto n = std::min<std::size_t>(static_cast<std::size_t>(batch_size),
                                           idx.size() - off);
      batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(off),
                           idx.begin() + static_cast<std::ptrdiff_t>(off + n));
    }
  };
  if (single_app_batches) {
    std::vector<std::size_t> va, stt;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      (examples[i].app == ApplicationId::VA ? va : stt).push_back(i);
    }
    rng.shuffle(va);
    rng.shuffle(stt);
    cut(va);
    cut(stt);
    rng.shuffle(batches);
  } else {
    std::vector<std::size_t> idx(examples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    cut(idx);
  }
  return batches;
}

inline std::vector<Example> gather_examples(const std::vector<Example>& examples,
                                            const std::vector<std::size_t>& idx) {
  std::vector<Example> out;
  out.reserve(idx.size());
  for (const auto i : idx) out.push_back(examples[i]);
  return out;
}

// Unigram event counts (words plus one </s> per query); the NCE noise
// distribution is built from these.
inline std::vector<std::int64_t> unigram_counts(const std::vector<Query>& queries,
                                                std::int32_t vocab_size) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(vocab_size), 0);
  for (const auto& q : queries) {
    for (const WordId id : q.ids) {
      if (id < 0 || id >= vocab_size) fail(ErrorCode::InvalidArgument, "word id out of range");
      ++counts[static_cast<std::size_t>(id)];
    }
    ++counts[static_cast<std::size_t>(Vocab::kEos)];
  }
  return counts;
}

}  // namespace fofe

#endif  // FOFE_DATASET_HPP
