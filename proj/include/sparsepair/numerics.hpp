#pragma once

#include <algorithm>
#include <cmath>

#include "sparsepair/types.hpp"

namespace sparsepair {

/// log(1 + e^x) without overflow: max(x,0) + log1p(e^{-|x|}).
template <typename Scalar>
Scalar stable_softplus(Scalar x) {
  return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
}

/// Logistic function, evaluated on the non-overflowing branch.
template <typename Scalar>
Scalar stable_sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// scale * log(sum_i exp(v_i / scale)), max-shifted. Bounds:
/// max(v) <= result <= max(v) + scale*log(n).
template <typename Derived>
typename Derived::Scalar logsumexp(const Eigen::DenseBase<Derived>& v,
                                   typename Derived::Scalar scale) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) throw EmptyInputError("logsumexp: empty input");
  const Scalar m = v.maxCoeff();
  const Scalar s = ((v.derived().array() - m) / scale).exp().sum();
  return m + scale * std::log(s);
}

/// Smooth minimum: -scale*log(sum exp(-v/scale)); lower-bounds min(v) and the
/// gap to the true minimum is at most scale*log(n).
template <typename Derived>
typename Derived::Scalar softmin(const Eigen::DenseBase<Derived>& v,
                                 typename Derived::Scalar scale) {
  return -logsumexp(-v.derived().array(), scale);
}

/// Rows scaled to unit Euclidean norm. Throws ZeroRowError when a row norm is
/// at or below 1e-12 (direction undefined).
inline RealMatrix l2_normalize(const RealMatrix& m) {
  RealMatrix out(m.rows(), m.cols());
  for (Index r = 0; r < m.rows(); ++r) {
    const double norm = m.row(r).norm();
    if (norm <= 1e-12)
      throw ZeroRowError("l2_normalize: row " + std::to_string(r) +
                         " has vanishing norm");
    out.row(r) = m.row(r) / norm;
  }
  return out;
}

/// Gram matrix of unit-norm rows: S = Z Z^T, symmetrized so S(a,b) == S(b,a)
/// bit-exactly regardless of the GEMM kernel's summation order.
inline RealMatrix pairwise_similarity(const RealMatrix& z) {
  RealMatrix s = z * z.transpose();
  s = ((s + s.transpose()) * 0.5).eval();
  return s;
}

/// Similarities are clamped to [-1,1] before any division by tau so the
/// exponent bound |s|/tau stays provable under rounding drift.
inline double clamp_sim(double s) { return std::clamp(s, -1.0, 1.0); }

inline bool all_finite(const RealMatrix& m) { return m.allFinite(); }

}  // namespace sparsepair
