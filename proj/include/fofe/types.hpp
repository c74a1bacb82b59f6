#ifndef FOFE_TYPES_HPP
#define FOFE_TYPES_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fofe/error.hpp"

namespace fofe {

// Dense types are row-major so that serialized parameter blobs match the
// in-memory layout byte for byte.
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using WordId = std::int32_t;

enum class ApplicationId : std::uint8_t { VA = 0, STT = 1 };

inline const char* app_name(ApplicationId app) {
  return app == ApplicationId::VA ? "VA" : "STT";
}

inline ApplicationId app_from_name(const std::string& name) {
  if (name == "VA") return ApplicationId::VA;
  if (name == "STT") return ApplicationId::STT;
  fail(ErrorCode::InvalidArgument, "unknown application '" + name + "' (expected VA or STT)");
}

constexpr int kNumApplications = 2;

// A single query: token ids plus the application it belongs to.
struct Query {
  std::vector<WordId> ids;
  ApplicationId app = ApplicationId::VA;
};

template <typename Scalar>
bool all_finite(const Mat<Scalar>& m) {
  return m.allFinite();
}

// NaN/Inf anywhere aborts the computation; silent propagation would
// corrupt every perplexity comparison downstream.
template <typename Scalar>
void ensure_finite(const Mat<Scalar>& m, const char* op) {
  if (!m.allFinite()) {
    fail(ErrorCode::NonFinite, std::string("non-finite value produced by op '") + op + "'");
  }
}

template <typename Scalar>
void ensure_finite(const Vec<Scalar>& v, const char* op) {
  if (!v.allFinite()) {
    fail(ErrorCode::NonFinite, std::string("non-finite value produced by op '") + op + "'");
  }
}

inline void ensure_finite_scalar(double x, const char* op) {
  if (!std::isfinite(x)) {
    fail(ErrorCode::NonFinite, std::string("non-finite value produced by op '") + op + "'");
  }
}

}  // namespace fofe

#endif  // FOFE_TYPES_HPP
