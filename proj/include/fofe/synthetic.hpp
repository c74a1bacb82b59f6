#ifndef FOFE_SYNTHETIC_HPP
#define FOFE_SYNTHETIC_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fofe/manifest.hpp"

namespace fofe {

// Two-application test corpus: short command/question style VA queries
// and longer first-person STT dictation with spoken punctuation.
struct SyntheticSpec {
  std::int64_t va_queries = 4000;
  std::int64_t stt_queries = 2500;
  double alpha_va = 0.5;  // manifest weight of the VA source
};

struct SyntheticCorpus {
  std::vector<std::string> va_lines;
  std::vector<std::string> stt_lines;
};

// Pure function of (spec, seed).
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Writes va.txt, stt.txt and manifest.txt under out_dir and returns the
// manifest sources.
std::vector<SourceSpec> write_synthetic(const SyntheticSpec& spec, std::uint64_t seed,
                                        const std::string& out_dir);

}  // namespace fofe

#endif  // FOFE_SYNTHETIC_HPP
