#pragma once

#include "bqsl/qubo.hpp"
#include "bqsl/samplers.hpp"
#include "bqsl/sl.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace bqsl {

struct RunRecord {
  std::string instance_id;
  std::string sampler;
  bool sl_enabled = false;
  std::uint64_t seed = 0;
  double best_objective = 0.0;
  std::uint64_t best_found_at_step = 0;
  std::uint64_t total_mcmc = 0;
  std::uint64_t wallclock_ms = 0;
  std::string config_hash;
};

inline constexpr const char* kCsvHeader =
    "instance_id,sampler,sl_enabled,seed,best_objective,best_found_at_step,total_mcmc,wallclock_ms,config_hash";
std::string csv_row(const RunRecord& r);

// Every knob that changes a run. The MCMC budget lives only in sl.total_mcmc and is
// shared by both arms of a pair.
inline SlConfig bench_sl_defaults() {
  SlConfig c;
  c.sigma = 5.0;  // optimization runs; sampling audits keep the SlConfig default
  return c;
}

struct BenchConfig {
  SlConfig sl = bench_sl_defaults();
  std::uint64_t anneal_every = 100;  // beta is held fixed within blocks of this many steps
  double dmala_step = 0.2;
  bool timing = false;               // wallclock_ms stays 0 unless set

  std::uint64_t budget() const { return sl.total_mcmc; }
  // Sorted "key = value" lines; the hash is taken over this text.
  std::string canonical() const;
  std::string hash() const;
  void set(const std::string& key, const std::string& value);
  void validate() const;
};

// "key = value" lines, '#' comments.
BenchConfig read_config(std::istream& in, const std::string& source = "<config>");
BenchConfig load_config(const std::string& path);

SamplerKind bench_sampler(const std::string& name, const BenchConfig& cfg);

// Plain annealed chain for budget() steps, tracking the best repaired objective.
RunRecord run_baseline(const QuboInstance& inst, const std::string& id, const std::string& sampler,
                       const BenchConfig& cfg, std::uint64_t seed);
// Algorithm-driven run with the same budget and ramp.
RunRecord run_sl(const QuboInstance& inst, const std::string& id, const std::string& sampler,
                 const BenchConfig& cfg, std::uint64_t seed);
// Baseline then SL; throws ProtocolError if the arms consumed different budgets.
std::pair<RunRecord, RunRecord> run_pair(const QuboInstance& inst, const std::string& id,
                                         const std::string& sampler, const BenchConfig& cfg,
                                         std::uint64_t seed);

// Append-only CSV writer. Blocks are written with one write(2) on an O_APPEND descriptor
// in submission-index order, so concurrent producers still give a deterministic file and
// an interrupted run leaves only whole rows behind.
class OrderedAppender {
 public:
  explicit OrderedAppender(const std::string& path, bool header = true);
  ~OrderedAppender();
  OrderedAppender(const OrderedAppender&) = delete;
  OrderedAppender& operator=(const OrderedAppender&) = delete;

  void submit(std::size_t index, std::string block);
  std::size_t written() const;

 private:
  void write_all(const std::string& s);

  int fd_ = -1;
  std::string path_;
  mutable std::mutex mu_;
  std::size_t next_ = 0;
  std::map<std::size_t, std::string> pending_;
};

struct RunJob {
  std::size_t instance = 0;
  std::string sampler;
  std::uint64_t seed = 0;
};

// Parses "a..b" and comma lists such as "0..3,7".
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

struct AblationCell {
  AlphaSchedule schedule;
  TimeGrid grid = TimeGrid::Uniform;
  StepAllocation allocation;
  std::size_t k = 256;
  double sigma = 5.0;
  std::string label() const;
};

struct AblationGrid {
  std::vector<AlphaSchedule> schedules;
  std::vector<TimeGrid> grids;
  std::vector<StepAllocation> allocations;
  std::vector<std::size_t> ks;
  std::vector<double> sigmas;
  std::vector<AblationCell> cells() const;
};

struct CellSummary {
  std::string label;
  std::string sampler;
  std::string config_hash;
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

std::vector<CellSummary> summarize(const std::vector<RunRecord>& rows,
                                   const std::map<std::string, std::string>& labels);

struct ComplexityReport {
  std::vector<Index> sizes;
  std::vector<double> overhead_seconds;
  double overhead_slope = 0.0;
  double runtime_ratio = 0.0;       // SL / baseline at equal budget
  double doubling_ratio = 0.0;      // overhead(2K) / overhead(K)
  Index ratio_size = 0;
};

struct ComplexityOptions {
  std::vector<Index> sizes = {256, 1024, 4096};
  std::size_t k = 256;
  std::size_t repeats = 5;
  Index ratio_size = 1000;
  std::uint64_t budget = 10000;
  std::string sampler = "gradient-mh";
  std::uint64_t seed = 0;
};

ComplexityReport measure_complexity(const ComplexityOptions& options);

}  // namespace bqsl
