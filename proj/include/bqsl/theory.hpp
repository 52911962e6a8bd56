#pragma once

#include "bqsl/bqd.hpp"
#include "bqsl/rng.hpp"
#include "bqsl/samplers.hpp"
#include "bqsl/sl.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace bqsl {

inline constexpr Index kMaxEnumerationSites = 20;
inline constexpr Index kMaxKernelSites = 12;
inline constexpr Index kMaxDobrushinSites = 16;

// nu over all 2^n states. State s has spin +1 at site k iff bit k of s is set.
struct ExactEnsemble {
  Index n = 0;
  Eigen::VectorXd probs;
  Eigen::VectorXd log_probs;
  double log_z = 0.0;

  static Spins spins_of(std::uint64_t state, Index n);
  static std::uint64_t index_of(const Spins& spins);
  std::size_t size() const { return static_cast<std::size_t>(probs.size()); }
  // E[x_i]
  Eigen::VectorXd mean() const;
};

ExactEnsemble exact_distribution(const BqdModel& model);

// Row-stochastic 2^n x 2^n matrix of one kernel step, P(x -> y) at (x, y).
struct ExactKernel {
  Eigen::MatrixXd p;
  SamplerKind kind;
  // Sites updated per step on average: 1 for single-site kernels, n for product kernels.
  bool single_site = true;
};

// DULA and DMALA use kind.step_size (infinity switches the damping off). DMALA does not adapt.
ExactKernel exact_kernel(const BqdModel& model, const SamplerKind& kind);

double variance(const ExactEnsemble& ens, const Eigen::VectorXd& f);
// 1/2 sum_{x,y} nu(x) P(x,y) (f(x) - f(y))^2
double dirichlet_form(const ExactKernel& kernel, const ExactEnsemble& ens, const Eigen::VectorXd& f);

// sup over nonconstant f of Var(f) / E(f, f). Infinity when the kernel is reducible.
// Solved as a generalized eigenproblem on the symmetrized conductances with the
// most probable state grounded, which stays accurate when nu spans many decades.
double poincare_constant(const ExactKernel& kernel, const ExactEnsemble& ens);

struct DobrushinMatrix {
  Eigen::MatrixXd c;
  // Product kernels only: column coefficient c(j) shared by every row.
  Eigen::VectorXd column;

  // max_i sum_j c_ij
  double inf_norm() const;
  double spectral_radius() const;
};

// Heat-bath conditionals: c_ij = sup over x = y off j of |nu_i(+1 | x) - nu_i(+1 | y)|.
DobrushinMatrix dobrushin_matrix(const BqdModel& model);

// Same supremum taken over the local jump kernels of a dynamics. Single-site kinds use
// the per-site move probability; Dula uses the all-site flip probability prod_i Psi(x^i | x)
// with the damping switched off.
DobrushinMatrix kernel_interdependence(const BqdModel& model, const SamplerKind& kind);

// Spectral-gap lower bounds in terms of the scalar field strength.
double theorem_bound(SamplerTag kind, double h_eff, double beta, Index n);

struct FieldDominance {
  bool satisfied = false;
  double h_eff = 0.0;      // min_i |b_i|
  double threshold = 0.0;  // 2 beta max_i sum_{k != i} |W_ik|
};

FieldDominance check_field_dominance(const BqdModel& model);

enum class Verdict { Pass, Fail, Inapplicable };
std::string to_string(Verdict v);

struct PoincareReport {
  std::string model_hash;
  std::string kind;
  double h_eff = 0.0;
  double threshold = 0.0;
  double bound = 0.0;
  double exact_cp = 0.0;      // generator normalization (single-site kernels scaled by n)
  double exact_cp_step = 0.0; // per kernel step
  double inverse_bound = 0.0;
  double margin = 0.0;        // inverse_bound - exact_cp
  Verdict verdict = Verdict::Inapplicable;
  std::string note;
};

PoincareReport verify_poincare(const BqdModel& model, const SamplerKind& kind,
                               double tolerance = 1e-9);

struct DobrushinReport {
  std::string model_hash;
  std::string kind;
  double h_eff = 0.0;
  double threshold = 0.0;
  double max_entry = 0.0;
  double max_entry_excess = 0.0;  // max over entries of (brute force - bound), <= 0 passes
  double norm = 0.0;
  double norm_bound = 0.0;
  std::size_t violations = 0;
  Verdict verdict = Verdict::Inapplicable;
  std::string note;
};

DobrushinReport verify_dobrushin_chain(const BqdModel& model, const SamplerKind& kind,
                                       double tolerance = 1e-9);

// P(|Y_t| >= zeta) for Y_t = alpha(t) + sigma sqrt(t) Z.
double observation_tail_probability(double zeta, double t, const AlphaSchedule& schedule,
                                    double sigma);
// 1 - observation_tail_probability, evaluated without cancellation.
double observation_inner_probability(double zeta, double t, const AlphaSchedule& schedule,
                                     double sigma);

struct DecayProbe {
  std::vector<std::size_t> n;
  std::vector<double> rms;
  double slope = 0.0;
};

// Least-squares slope of log RMS error of the n-sample chain mean against log n.
DecayProbe mean_error_decay(const BqdModel& post, const SamplerKind& kind,
                            const std::vector<std::size_t>& n_grid, std::size_t replicas,
                            CounterRng& rng);

// Random sparse couplings with fields scaled to satisfy field dominance and a positive
// bound for `kind`. Sites: 4 + seed % (max_n - 3).
BqdModel admissible_model(std::uint64_t seed, SamplerTag kind, Index max_n = 8);
// Field-dominant but weakly coupled: beta in [0.1, 0.3] and |h| just above 2 beta max row
// sum, so every spin still fluctuates. Used by the decay probe, where a strong field
// leaves the error to rare flips that a few hundred replicas cannot resolve.
BqdModel decay_posterior(std::uint64_t seed, Index n = 6);
// Smallest field for which theorem_bound(kind, h, ., n) is positive, 0 if every h works.
double positive_bound_floor(SamplerTag kind, Index n);

struct SuiteOptions {
  std::size_t models = 50;
  Index max_n = 8;
  std::uint64_t seed = 0;
  bool poincare = true;
  bool dobrushin = true;
  bool tails = true;
  bool decay = true;
};

struct SuiteResult {
  std::vector<PoincareReport> poincare;
  std::vector<DobrushinReport> dobrushin;
  std::size_t tail_points = 0;
  std::size_t tail_failures = 0;
  std::vector<double> decay_slopes;
  std::size_t decay_failures = 0;
  std::size_t violations() const;
  std::vector<std::string> offending_models() const;
};

// The four dynamics of the verification suite.
std::vector<SamplerKind> suite_kinds();

SuiteResult run_verify_suite(const SuiteOptions& options, std::ostream* records = nullptr);

void write_record(std::ostream& out, const PoincareReport& r);
void write_record(std::ostream& out, const DobrushinReport& r);

}  // namespace bqsl
