#ifndef FOFE_NN_HPP
#define FOFE_NN_HPP

#include <cmath>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "fofe/rng.hpp"
#include "fofe/types.hpp"

namespace fofe {

template <typename Scalar>
struct Param {
  std::string name;
  Mat<Scalar> value;
  Mat<Scalar> grad;
  Mat<Scalar> momentum;
};

// Named parameter tensors with matching gradient and momentum buffers.
// Insertion order is the serialization order, so it must be identical
// across runs for a given architecture.
template <typename Scalar>
class ParamStore {
 public:
  Mat<Scalar>& add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (index_.count(name)) fail(ErrorCode::InvalidArgument, "duplicate parameter '" + name + "'");
    index_[name] = params_.size();
    Param<Scalar> p;
    p.name = name;
    p.value = Mat<Scalar>::Zero(rows, cols);
    p.grad = Mat<Scalar>::Zero(rows, cols);
    p.momentum = Mat<Scalar>::Zero(rows, cols);
    params_.push_back(std::move(p));
    return params_.back().value;
  }

  Param<Scalar>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorCode::InvalidArgument, "unknown parameter '" + name + "'");
    return params_[it->second];
  }
  const Param<Scalar>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) fail(ErrorCode::InvalidArgument, "unknown parameter '" + name + "'");
    return params_[it->second];
  }

  Mat<Scalar>& value(const std::string& name) { return at(name).value; }
  const Mat<Scalar>& value(const std::string& name) const { return at(name).value; }
  Mat<Scalar>& grad(const std::string& name) { return at(name).grad; }

  std::size_t size() const { return params_.size(); }
  Param<Scalar>& operator[](std::size_t i) { return params_[i]; }
  const Param<Scalar>& operator[](std::size_t i) const { return params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grads() {
    for (auto& p : params_) p.grad.setZero();
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  template <typename S2>
  ParamStore<S2> cast() const {
    ParamStore<S2> out;
    for (const auto& p : params_) {
      out.add(p.name, p.value.rows(), p.value.cols()) = p.value.template cast<S2>();
      out.at(p.name).momentum = p.momentum.template cast<S2>();
    }
    return out;
  }

 private:
  std::vector<Param<Scalar>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Uniform init in +-sqrt(6 / (fan_in + fan_out)).
template <typename Scalar>
void init_uniform(Mat<Scalar>& w, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      w(i, j) = static_cast<Scalar>(rng.next_double(-bound, bound));
    }
  }
}

// y = x W + b.  x: [B x in], W: [in x out], b: [1 x out].
template <typename Scalar>
Mat<Scalar> affine(const Mat<Scalar>& x, const Mat<Scalar>& w, const Mat<Scalar>& b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    fail(ErrorCode::InvalidArgument, "affine: shape mismatch");
  }
  Mat<Scalar> y = x * w;
  y.rowwise() += b.row(0);
  ensure_finite(y, "affine");
  return y;
}

// Accumulates dW and db, returns dx.
template <typename Scalar>
Mat<Scalar> affine_backward(const Mat<Scalar>& x, const Mat<Scalar>& w, const Mat<Scalar>& dy,
                            Mat<Scalar>& dw, Mat<Scalar>& db) {
  if (dy.rows() != x.rows() || dy.cols() != w.cols()) {
    fail(ErrorCode::InvalidArgument, "affine_backward: shape mismatch");
  }
  dw.noalias() += x.transpose() * dy;
  db.row(0) += dy.colwise().sum();
  Mat<Scalar> dx = dy * w.transpose();
  ensure_finite(dx, "affine_backward");
  return dx;
}

template <typename Scalar>
Mat<Scalar> relu(const Mat<Scalar>& x) {
  return x.cwiseMax(Scalar(0));
}

// Subgradient 0 at the kink.
template <typename Scalar>
Mat<Scalar> relu_backward(const Mat<Scalar>& x, const Mat<Scalar>& dy) {
  return (x.array() > Scalar(0)).select(dy, Mat<Scalar>::Zero(dy.rows(), dy.cols()));
}

template <typename Scalar>
Mat<Scalar> softmax_rows(const Mat<Scalar>& logits) {
  Mat<Scalar> p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    p.row(i).array() -= p.row(i).maxCoeff();
    p.row(i) = p.row(i).array().exp();
    p.row(i) /= p.row(i).sum();
  }
  ensure_finite(p, "softmax");
  return p;
}

template <typename Scalar>
struct SoftmaxXentResult {
  double loss = 0.0;       // mean negative log-likelihood per target
  Mat<Scalar> dlogits;     // (softmax - onehot) / B
  Mat<Scalar> probs;
};

template <typename Scalar>
SoftmaxXentResult<Scalar> softmax_xent(const Mat<Scalar>& logits, std::span<const WordId> targets) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size()) {
    fail(ErrorCode::InvalidArgument, "softmax_xent: batch size mismatch");
  }
  SoftmaxXentResult<Scalar> res;
  res.probs = softmax_rows(logits);
  const auto batch = static_cast<double>(logits.rows());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const WordId t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= logits.cols()) fail(ErrorCode::InvalidArgument, "softmax_xent: target out of range");
    // log p computed from shifted logits for stability
    const Scalar mx = logits.row(i).maxCoeff();
    double lse = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      lse += std::exp(static_cast<double>(logits(i, j) - mx));
    }
    loss -= static_cast<double>(logits(i, t) - mx) - std::log(lse);
  }
  res.loss = loss / batch;
  ensure_finite_scalar(res.loss, "softmax_xent");
  res.dlogits = res.probs / static_cast<Scalar>(batch);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    res.dlogits(i, targets[static_cast<std::size_t>(i)]) -= Scalar(1) / static_cast<Scalar>(batch);
  }
  return res;
}

// L2 norm over all gradient buffers, accumulated in double.
template <typename Scalar>
double grad_global_norm(const ParamStore<Scalar>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    sq += p.grad.template cast<double>().squaredNorm();
  }
  return std::sqrt(sq);
}

// Scales all gradients by max_norm/g when the global norm g exceeds
// max_norm; returns the scale applied (1.0 when under the threshold).
template <typename Scalar>
double clip_global_norm(ParamStore<Scalar>& params, double max_norm) {
  if (max_norm <= 0.0) fail(ErrorCode::InvalidArgument, "clip norm must be > 0");
  const double norm = grad_global_norm(params);
  ensure_finite_scalar(norm, "clip_global_norm");
  if (norm <= max_norm) return 1.0;
  const double scale = max_norm / norm;
  for (auto& p : params) p.grad *= static_cast<Scalar>(scale);
  return scale;
}

}  // namespace fofe

#endif  // FOFE_NN_HPP
