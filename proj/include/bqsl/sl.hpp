#pragma once

#include "bqsl/bqd.hpp"
#include "bqsl/rng.hpp"
#include "bqsl/samplers.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

namespace bqsl {

struct AlphaSchedule {
  enum class Kind { Classic, Geom };
  Kind kind = Kind::Geom;
  double a1 = 2.0;
  double a2 = 1.0;

  static AlphaSchedule classic() { return {Kind::Classic, 1.0, 0.0}; }
  static AlphaSchedule geom(double a1, double a2) { return {Kind::Geom, a1, a2}; }
  // classic, geom11, geom21, or geom:<a1>,<a2>
  static AlphaSchedule parse(std::string_view name);
  std::string name() const;

  // End of the time domain: 1 for Geom, +inf for Classic.
  double horizon() const {
    return kind == Kind::Geom ? 1.0 : std::numeric_limits<double>::infinity();
  }
  void validate() const;
};

// Classic: t. Geom(a1, a2): t^{a1/2} (1 - t)^{-a2/2}.
double alpha_of(const AlphaSchedule& schedule, double t);

enum class TimeGrid { Uniform, LogSnr };

struct StepAllocation {
  enum class Kind { Identical, ExpDecay };
  Kind kind = Kind::ExpDecay;
  double r = 0.01;
  std::size_t n_min = 8;

  static StepAllocation identical() { return {Kind::Identical, 0.0, 1}; }
  static StepAllocation exp_decay(double r, std::size_t n_min) { return {Kind::ExpDecay, r, n_min}; }
};

struct SlConfig {
  AlphaSchedule schedule;
  TimeGrid grid = TimeGrid::Uniform;
  std::size_t k = 256;
  // Residual noise in Y_K / alpha(t_K) is about sigma * sqrt(eps_end); keep it well below 1.
  double sigma = 1.0;
  double eps = 1e-3;
  double eps_end = 1e-2;
  // Classic only: last grid point; 0 means 1 / eps_end.
  double classic_end = 0.0;
  std::size_t total_mcmc = 10000;
  StepAllocation allocation;
  double sample_ratio = 0.5;
  bool warm_start = true;
  // Keep Y_i and U_i in the trace.
  bool record_vectors = true;
  // Time the non-MCMC work of each iteration.
  bool measure_overhead = false;

  void validate() const;
  double first_time() const { return eps; }
  double last_time() const;
};

// t_0 < ... < t_K
std::vector<double> build_time_grid(const SlConfig& cfg);

std::vector<std::size_t> allocate_steps(std::size_t total, std::size_t k,
                                        const StepAllocation& allocation);

// Same W and beta, field b + alpha(t) y / (sigma^2 t).
BqdModel posterior_model(const BqdModel& target, const Eigen::VectorXd& y, double t,
                         const AlphaSchedule& schedule, double sigma);

// Runs n_steps kernel steps and averages the trailing ceil(sample_ratio * n_steps) states.
Eigen::VectorXd estimate_posterior_mean(const BqdModel& post, Chain& chain,
                                        const SamplerKind& kind, std::size_t n_steps,
                                        double sample_ratio);

struct SlTrace {
  std::vector<double> t;                // K + 1
  std::vector<double> alpha;            // K + 1
  std::vector<Eigen::VectorXd> y;       // K + 1 when recorded
  std::vector<Eigen::VectorXd> u;       // K when recorded
  std::vector<std::size_t> mcmc_steps;  // K
  std::vector<double> min_abs_field;    // K, min_i |h_{t_i}[i]|
  std::vector<bool> field_dominant;     // K, min_i |h| >= 2 beta max row sum
  double dominance_threshold = 0.0;
  Eigen::VectorXd output;               // Y_K / alpha(t_K) before rounding
  double overhead_seconds = 0.0;

  std::size_t total_mcmc() const;
};

struct SlHooks {
  // Target to localize at a given global MCMC step (0-based); nullptr keeps the
  // current one. Must share W with the original target. Used for beta annealing.
  std::function<const BqdModel*(std::uint64_t)> target_at;
  // After every MCMC step, with the global step count so far (1-based).
  std::function<void(const SpinState&, std::uint64_t)> on_sample;
};

struct SlResult {
  SpinState sample;
  SlTrace trace;
  Chain chain;  // inner chain after the last iteration
};

// Gaussian increments come from rng; the inner chain uses rng.split(1).
SlResult sl_run(const BqdModel& target, const SamplerKind& kind, const SlConfig& cfg,
                CounterRng& rng, const SlHooks& hooks = {});

// Coordinate-wise sign with 0 mapped to +1.
Spins sign_round(const Eigen::VectorXd& v);

// One JSON object per line, iterations 0..K; the last record has no u or steps.
void write_trace(std::ostream& out, const SlTrace& trace);

}  // namespace bqsl
