#ifndef FOFE_FOFE_ENCODING_HPP
#define FOFE_FOFE_ENCODING_HPP

#include <cmath>

#include "fofe/types.hpp"

namespace fofe {

// Fixed-size Ordinally-Forgetting Encoding of an embedded sequence.
// embeddings: [m x E], one row per position.  Returns [m x E] with
// row t = z_{t+1}.
//
// Default recurrence (the original FOFE definition):
//   z_t = alpha * z_{t-1} + e_t          closed form  z_m = sum_t alpha^(m-t) e_t
// strict_literal flips the roles:
//   z_t = z_{t-1} + alpha * e_t          (= alpha * bag of words; order-blind)
// The literal variant is kept behind a flag for comparison only.
template <typename Scalar>
Mat<Scalar> fofe_encode(const Mat<Scalar>& embeddings, double alpha,
                        bool strict_literal = false) {
  Mat<Scalar> z(embeddings.rows(), embeddings.cols());
  if (embeddings.rows() == 0) return z;
  const auto a = static_cast<Scalar>(alpha);
  if (strict_literal) {
    z.row(0) = a * embeddings.row(0);
    for (Eigen::Index t = 1; t < embeddings.rows(); ++t) {
      z.row(t) = z.row(t - 1) + a * embeddings.row(t);
    }
  } else {
    z.row(0) = embeddings.row(0);
    for (Eigen::Index t = 1; t < embeddings.rows(); ++t) {
      z.row(t) = a * z.row(t - 1) + embeddings.row(t);
    }
  }
  return z;
}

// Closed-form z_m = sum_{t<=m} alpha^(m-t) e_t; the oracle the recursive
// encoder is verified against.
template <typename Scalar>
Vec<Scalar> fofe_closed_form(const Mat<Scalar>& embeddings, double alpha, Eigen::Index m) {
  Vec<Scalar> z = Vec<Scalar>::Zero(embeddings.cols());
  for (Eigen::Index t = 0; t <= m; ++t) {
    z += static_cast<Scalar>(std::pow(alpha, static_cast<double>(m - t))) *
         embeddings.row(t).transpose();
  }
  return z;
}

// n-gram context of the encoding: the flattened concatenation
// [z_{pos-n+1}, ..., z_{pos}] (0-based pos).  Positions before the
// sequence start contribute zero vectors; pos = -1 yields all zeros.
template <typename Scalar>
Vec<Scalar> fofe_context(const Mat<Scalar>& z, int n, Eigen::Index pos) {
  if (n < 1) fail(ErrorCode::InvalidArgument, "fofe context width must be >= 1");
  const Eigen::Index dim = z.cols();
  Vec<Scalar> out = Vec<Scalar>::Zero(static_cast<Eigen::Index>(n) * dim);
  for (int s = 0; s < n; ++s) {
    const Eigen::Index p = pos - (n - 1) + s;
    if (p >= 0 && p < z.rows()) {
      out.segment(static_cast<Eigen::Index>(s) * dim, dim) = z.row(p).transpose();
    }
  }
  return out;
}

}  // namespace fofe

#endif  // FOFE_FOFE_ENCODING_HPP
