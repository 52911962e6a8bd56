#pragma once

#include "bqsl/bqd.hpp"
#include "bqsl/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

namespace bqsl {

enum class SamplerTag { Glauber, Metropolis, GradientMH, Dula, Dmala };
enum class SiteSelection { SoftmaxOverSites, UniformSite };
// g(t) = sqrt(t); the only balancing function offered.
enum class Balancing { Sqrt };

struct SamplerKind {
  SamplerTag tag = SamplerTag::Glauber;
  SiteSelection site_selection = SiteSelection::SoftmaxOverSites;
  Balancing balancing = Balancing::Sqrt;
  // DULA / DMALA damping scale alpha; +inf switches the damping off.
  double step_size = 0.2;
  // DMALA only: retune step_size every adapt_every steps.
  bool adapt = true;
  std::uint64_t adapt_every = 100;
  // Glauber only: visit sites in index order instead of uniformly at random.
  bool systematic_scan = false;

  static SamplerKind glauber() { return {}; }
  static SamplerKind metropolis() { return {SamplerTag::Metropolis}; }
  static SamplerKind gradient_mh(SiteSelection s = SiteSelection::SoftmaxOverSites) {
    return {SamplerTag::GradientMH, s};
  }
  static SamplerKind dula(double step = 0.2) {
    SamplerKind k{SamplerTag::Dula};
    k.step_size = step;
    return k;
  }
  static SamplerKind dmala(double step = 0.2) {
    SamplerKind k{SamplerTag::Dmala};
    k.step_size = step;
    return k;
  }

  // glauber, metropolis, gradient-mh (also gwg, pas), gradient-mh-uniform, dula, dmala
  static SamplerKind parse(std::string_view name);
  std::string name() const;
  void validate() const;
};

struct ChainStats {
  std::uint64_t steps = 0;
  std::uint64_t accepted = 0;
  std::uint64_t window_steps = 0;
  std::uint64_t window_accepted = 0;
  std::uint64_t last_adapt_step = 0;

  double acceptance_rate() const { return steps ? double(accepted) / double(steps) : 0.0; }
  double window_rate() const {
    return window_steps ? double(window_accepted) / double(window_steps) : 0.0;
  }
  void record(bool accepted_move) {
    ++steps;
    ++window_steps;
    accepted += accepted_move;
    window_accepted += accepted_move;
  }
};

struct Chain {
  SpinState state;
  CounterRng rng;
  ChainStats stats;
  double step_size = 0.2;
};

// Uniformly random start, n draws from rng.
Chain make_chain(const BqdModel& model, const SamplerKind& kind, CounterRng rng);
Chain make_chain(const BqdModel& model, const SamplerKind& kind, SpinState start, CounterRng rng);

// Draw order per step is fixed so runs replay bit for bit:
//   glauber      site, coin
//   metropolis   site, coin
//   gradient-mh  softmax: site, coin; uniform: site, proposal coin, coin
//   dula         one coin per site in index order
//   dmala        dula coins, then coin
// Each returns whether the state changed.
bool step_glauber(const BqdModel& model, Chain& chain, const SamplerKind& kind = {});
bool step_metropolis(const BqdModel& model, Chain& chain);
bool step_gradient_mh(const BqdModel& model, Chain& chain, const SamplerKind& kind);

struct DulaProposal {
  std::vector<Index> flipped;  // ascending
  Eigen::VectorXd flip_probs;  // per site, at the pre-move state
  double log_forward = 0.0;    // log q(x'|x)
};

// Draws the factorized proposal and moves the chain to it unconditionally.
DulaProposal step_dula(const BqdModel& model, Chain& chain, const SamplerKind& kind);
bool step_dmala(const BqdModel& model, Chain& chain, const SamplerKind& kind);

// step_size * exp(eta * (rate - target))
double adapt_step_size(double step_size, double observed_rate, double eta = 0.1,
                       double target = 0.574);

// One kernel step plus DMALA adaptation bookkeeping.
bool step(const BqdModel& model, Chain& chain, const SamplerKind& kind);

// Transition ingredients shared with the exact kernels.
// P(x_i = +1 | rest) for heat bath.
double glauber_up_probability(const BqdModel& model, const SpinState& state, Index i);
double metropolis_acceptance(double delta);
// Uniform-site gradient MH: propose with sigma(delta/2), accept with min(1, e^{delta/2}).
double uniform_gradient_move_probability(double delta);
// sigma(delta/2 - 2/alpha)
double dula_flip_probability(double delta, double step_size);
double dula_flip_logit(double delta, double step_size);
// log q(x ^ S | x) for the factorized proposal given per-site flip logits.
double dula_log_proposal(const Eigen::VectorXd& logits, const std::vector<Index>& flipped);

// Site distribution of the softmax proposal, softmax(delta / 2).
Eigen::VectorXd gwg_site_probabilities(const BqdModel& model, const SpinState& state);
// Locally balanced weights g(nu(x^i)/nu(x)) with g = sqrt, first-order ratio from the
// pseudo-gradient, normalized. Coincides with the softmax proposal on quadratic models.
Eigen::VectorXd pas_site_probabilities(const BqdModel& model, const SpinState& state);

}  // namespace bqsl
