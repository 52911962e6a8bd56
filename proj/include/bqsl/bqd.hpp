#pragma once

#include "bqsl/errors.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace bqsl {

using Index = Eigen::Index;
using Couplings = Eigen::SparseMatrix<double>;
using Pair = Eigen::Triplet<double>;
using Spins = Eigen::VectorXi;

// nu(x) ~ exp(-beta/2 <x, W x> + <x, b>) on {-1, +1}^n.
// W is symmetric with zero diagonal and shared between models that differ only
// in (b, beta), which is how posteriors and annealed targets are built.
class BqdModel {
 public:
  // Symmetrizes W as (W + W^T)/2 (with a warning when needed) and drops the diagonal.
  BqdModel(const Couplings& w, Eigen::VectorXd b, double beta);
  static BqdModel from_dense(const Eigen::MatrixXd& w, Eigen::VectorXd b, double beta);
  // Each (i, j, w) sets W_ij = W_ji = w; repeated pairs accumulate and i == j is ignored.
  static BqdModel from_pairs(Index n, const std::vector<Pair>& pairs,
                             Eigen::VectorXd b, double beta);

  Index n() const { return b_.size(); }
  double beta() const { return beta_; }
  const Eigen::VectorXd& field() const { return b_; }
  const Couplings& couplings() const { return *w_; }
  Eigen::MatrixXd dense_couplings() const { return Eigen::MatrixXd(*w_); }

  // max_i sum_k |W_ik|
  double max_abs_row_sum() const { return max_row_sum_; }

  BqdModel with_field(Eigen::VectorXd b) const;
  BqdModel with_beta_field(double beta, Eigen::VectorXd b) const;
  bool shares_couplings(const BqdModel& other) const { return w_ == other.w_; }

  // Canonical text hash of (n, beta, b, W) for report records.
  std::uint64_t hash() const;

 private:
  BqdModel(std::shared_ptr<const Couplings> w, Eigen::VectorXd b, double beta);

  std::shared_ptr<const Couplings> w_;
  Eigen::VectorXd b_;
  double beta_ = 0.0;
  double max_row_sum_ = 0.0;
};

// A configuration together with cache = W * spins.
class SpinState {
 public:
  SpinState(const BqdModel& model, Spins spins);
  static SpinState all_up(const BqdModel& model);

  Index n() const { return spins_.size(); }
  int spin(Index i) const { return spins_[i]; }
  const Spins& spins() const { return spins_; }
  const Eigen::VectorXd& cache() const { return cache_; }

  // Number of flips applied since construction.
  std::uint64_t flips() const { return flips_; }

  // Recompute the cache from scratch (drops accumulated rounding).
  void refresh(const BqdModel& model);

  // While set, apply_flip appends each flipped site. Copies start without one.
  void set_journal(std::vector<Index>* journal) { journal_.ptr = journal; }

  bool operator==(const SpinState& other) const {
    return spins_ == other.spins_ && cache_ == other.cache_;
  }

 private:
  friend void apply_flip(const BqdModel&, SpinState&, Index);

  struct Journal {
    std::vector<Index>* ptr = nullptr;
    Journal() = default;
    Journal(const Journal&) {}
    Journal& operator=(const Journal&) { return *this; }
  };

  Spins spins_;
  Eigen::VectorXd cache_;
  std::uint64_t flips_ = 0;
  Journal journal_;
};

// -(beta/2) <x, W x> + <x, b>
double log_density_unnormalized(const BqdModel& model, const SpinState& state);
// Same quantity without a cache, O(nnz).
double log_density_unnormalized(const BqdModel& model, const Spins& spins);

// -beta * W x + b, read from the cache.
Eigen::VectorXd pseudo_gradient(const BqdModel& model, const SpinState& state);

// l(x^i) - l(x) = 2 beta x_i (W x)_i - 2 b_i x_i
double flip_delta(const BqdModel& model, const SpinState& state, Index i);

// All n flip deltas at once.
Eigen::VectorXd flip_deltas(const BqdModel& model, const SpinState& state);

// Negates x_i and updates the cache along column i, O(deg(i)).
void apply_flip(const BqdModel& model, SpinState& state, Index i);

void check_dimension(const BqdModel& model, const SpinState& state);
void check_spins(const Spins& spins);

// Text format: "N", "beta", "b v0 .. v(N-1)", then "i j w" per upper-triangle entry.
BqdModel read_model(std::istream& in, const std::string& source = "<model>");
BqdModel load_model(const std::string& path);
void write_model(std::ostream& out, const BqdModel& model);

}  // namespace bqsl
