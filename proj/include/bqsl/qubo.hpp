#pragma once

#include "bqsl/bqd.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace bqsl {

struct Edge {
  Index u = 0;  // u < v
  Index v = 0;
  double w = 1.0;
  bool operator==(const Edge&) const = default;
};

struct Graph {
  Index n = 0;
  std::vector<Edge> edges;
  std::string tag;

  std::vector<std::vector<Index>> adjacency() const;
  // Throws on self-loops, duplicates, or out-of-range endpoints.
  void validate() const;
};

Graph gen_er(Index n, double p, std::uint64_t seed);
// Seed clique on vertices 0..m-1, then each new vertex attaches to m distinct existing
// vertices drawn proportionally to degree.
Graph gen_ba(Index n, Index m, std::uint64_t seed);

// "N M" then M lines "u v [w]"; the weight is written only when it differs from 1.
void write_graph(std::ostream& out, const Graph& g);
Graph read_graph(std::istream& in, const std::string& source = "<graph>");
Graph load_graph(const std::string& path);

enum class ProblemKind { Mis, MaxCut, MaxClique };
std::string to_string(ProblemKind k);
ProblemKind parse_problem(const std::string& name);

struct BetaSchedule {
  enum class Ramp { Linear, Geometric };
  double start = 0.1;
  double end = 5.0;
  Ramp ramp = Ramp::Linear;
};

double beta_ramp(const BetaSchedule& schedule, std::uint64_t step, std::uint64_t total);

struct QuboInstance {
  Graph graph;
  ProblemKind kind = ProblemKind::Mis;
  double lambda = 1.0001;
  double c = 1.0;
  BetaSchedule beta;

  void validate() const;
};

// Spin-space form of the {0,1} energy E(y), y = (x + 1) / 2:
//   E = energy_constant + sum_{i<j} W_ij x_i x_j + sum_i g_i x_i.
// model has couplings W, field -beta g and inverse temperature beta, so that
//   -beta E(y(x)) == log_density_unnormalized(model, x) + constant.
struct CompiledQubo {
  BqdModel model;
  Eigen::VectorXd g;
  double energy_constant = 0.0;
  double constant = 0.0;

  CompiledQubo at_beta(double beta) const;
};

CompiledQubo compile_to_bqd(const QuboInstance& instance, double beta);

// Selected set is {i : x_i = +1}. MIS and MaxClique report c * |S| and MaxCut the cut
// weight, read from the graph.
double objective_value(const QuboInstance& instance, const Spins& spins);
bool is_feasible(const QuboInstance& instance, const Spins& spins);
inline double objective_value(const QuboInstance& i, const SpinState& s) { return objective_value(i, s.spins()); }
inline bool is_feasible(const QuboInstance& i, const SpinState& s) { return is_feasible(i, s.spins()); }

// Reusable repair with preallocated scratch. Drops the selected vertex with the most
// conflicts (ties keep the lower index) until feasible, then adds vertices greedily in
// ascending order. MaxClique runs the same rule on the complement graph. MaxCut is a no-op.
class Repairer {
 public:
  explicit Repairer(const QuboInstance& instance);
  Spins operator()(const Spins& spins);
  // Objective of the repaired state.
  double repaired_objective(const Spins& spins);

 private:
  const QuboInstance& inst_;
  std::vector<std::vector<Index>> adj_;
  std::vector<char> dense_;  // MaxClique adjacency, n * n
  std::vector<int> conflicts_;
};

Spins repair(const QuboInstance& instance, const Spins& spins);
inline SpinState repair(const QuboInstance& i, const BqdModel& m, const SpinState& s) {
  return SpinState(m, repair(i, s.spins()));
}

// One JSON object per line: id, kind, graph, lambda, c, beta_start, beta_end, ramp, seed.
struct ManifestEntry {
  std::string id;
  ProblemKind kind = ProblemKind::Mis;
  std::string graph_path;
  double lambda = 1.0001;
  double c = 1.0;
  BetaSchedule beta;
  std::uint64_t seed = 0;
};

void write_manifest_entry(std::ostream& out, const ManifestEntry& e);
std::vector<ManifestEntry> read_manifest(const std::string& path);
// Loads the graph relative to the manifest directory when the path is relative.
QuboInstance load_instance(const ManifestEntry& e, const std::string& manifest_dir);

}  // namespace bqsl
