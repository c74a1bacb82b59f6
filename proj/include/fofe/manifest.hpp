#ifndef FOFE_MANIFEST_HPP
#define FOFE_MANIFEST_HPP

#include <string>
#include <vector>

#include "fofe/types.hpp"

namespace fofe {

struct SourceSpec {
  std::string id;
  std::string path;
  ApplicationId application = ApplicationId::VA;
  double alpha = 0.0;  // sampling weight in [0,1]
};

constexpr double kAlphaSumTolerance = 1e-9;

// Validates ids unique, alphas in [0,1] summing to 1 +- 1e-9, and that
// every referenced file exists and is non-empty.
void validate_manifest(const std::vector<SourceSpec>& sources, bool check_paths = true);

// Manifest file: INI-style key-value text, one [section] per source:
//
//   [va_user]
//   path = va.txt
//   application = VA
//   alpha = 0.6
//
// Lines starting with '#' are comments.
std::vector<SourceSpec> load_manifest(const std::string& path, bool check_paths = true);
void save_manifest(const std::vector<SourceSpec>& sources, const std::string& path);

}  // namespace fofe

#endif  // FOFE_MANIFEST_HPP
