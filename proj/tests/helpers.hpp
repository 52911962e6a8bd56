#pragma once

#include "bqsl/bqd.hpp"
#include "bqsl/rng.hpp"

#include <Eigen/Core>

namespace bqsl::test {

// Dense random symmetric couplings, zero diagonal, entries U(-scale, scale).
inline BqdModel random_model(Index n, std::uint64_t seed, double beta = 1.0, double scale = 1.0,
                             double field = 1.0) {
  CounterRng rng(seed, 0x7e57);
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) w(i, j) = w(j, i) = scale * (2.0 * rng.uniform() - 1.0);
  Eigen::VectorXd b(n);
  for (Index i = 0; i < n; ++i) b[i] = field * (2.0 * rng.uniform() - 1.0);
  return BqdModel::from_dense(w, b, beta);
}

inline Spins random_spins(Index n, CounterRng& rng) {
  Spins x(n);
  for (Index i = 0; i < n; ++i) x[i] = rng.uniform() < 0.5 ? -1 : 1;
  return x;
}

inline BqdModel two_site() {
  Eigen::MatrixXd w(2, 2);
  w << 0, 1, 1, 0;
  return BqdModel::from_dense(w, Eigen::VectorXd::Zero(2), 1.0);
}

}  // namespace bqsl::test
