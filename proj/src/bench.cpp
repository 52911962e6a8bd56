#include "bqsl/bench.hpp"
#include "bqsl/numeric.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace bqsl {

namespace {

std::string fmt_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::string grid_name(TimeGrid g) { return g == TimeGrid::Uniform ? "uniform" : "logsnr"; }

TimeGrid parse_grid(const std::string& s) {
  if (s == "uniform") return TimeGrid::Uniform;
  if (s == "logsnr") return TimeGrid::LogSnr;
  throw ConfigError("unknown time grid '" + s + "'");
}

std::string allocation_name(const StepAllocation& a) {
  return a.kind == StepAllocation::Kind::Identical ? "identical" : "exp";
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "on" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "off" || s == "no") return false;
  throw ConfigError("expected a boolean, got '" + s + "'");
}

double parse_real(const std::string& key, const std::string& s) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) throw ConfigError("key '" + key + "' expects a number, got '" + s + "'");
  return v;
}

std::uint64_t parse_count(const std::string& key, const std::string& s) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || s[0] == '-')
    throw ConfigError("key '" + key + "' expects a count, got '" + s + "'");
  return v;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Best repaired objective over observed states, re-evaluated only after a flip.
class BestTracker {
 public:
  explicit BestTracker(const QuboInstance& inst) : repair_(inst) {}

  void observe(const SpinState& s, std::uint64_t step) {
    if (seen_ && s.flips() == last_flips_ && &s == last_state_) return;
    seen_ = true;
    last_flips_ = s.flips();
    last_state_ = &s;
    consider(repair_.repaired_objective(s.spins()), step);
  }

  void consider(double value, std::uint64_t step) {
    if (!have_ || value > best_) {
      best_ = value;
      step_ = step;
      have_ = true;
    }
  }

  Repairer& repairer() { return repair_; }
  double best() const { return best_; }
  std::uint64_t step() const { return step_; }

 private:
  Repairer repair_;
  bool seen_ = false;
  bool have_ = false;
  std::uint64_t last_flips_ = 0;
  const SpinState* last_state_ = nullptr;
  double best_ = 0.0;
  std::uint64_t step_ = 0;
};

std::vector<BqdModel> annealed_targets(const QuboInstance& inst, const BenchConfig& cfg) {
  const std::uint64_t budget = cfg.budget();
  const CompiledQubo base = compile_to_bqd(inst, inst.beta.start);
  const std::uint64_t blocks = (budget + cfg.anneal_every - 1) / cfg.anneal_every;
  std::vector<BqdModel> out;
  out.reserve(blocks);
  for (std::uint64_t b = 0; b < blocks; ++b) {
    const double beta = beta_ramp(inst.beta, b * cfg.anneal_every, budget);
    out.push_back(base.model.with_beta_field(beta, -beta * base.g));
  }
  return out;
}

CounterRng run_stream(const std::string& id, std::uint64_t seed) { return CounterRng(seed, fnv1a64(id)); }

}  // namespace

std::string csv_row(const RunRecord& r) {
  std::ostringstream out;
  out << r.instance_id << ',' << r.sampler << ',' << (r.sl_enabled ? 1 : 0) << ',' << r.seed << ','
      << fmt_double(r.best_objective) << ',' << r.best_found_at_step << ',' << r.total_mcmc << ','
      << r.wallclock_ms << ',' << r.config_hash;
  return out.str();
}

std::string BenchConfig::canonical() const {
  std::map<std::string, std::string> kv;
  kv["allocation"] = allocation_name(sl.allocation);
  kv["anneal_every"] = std::to_string(anneal_every);
  kv["classic_end"] = fmt_double(sl.classic_end);
  kv["decay_r"] = fmt_double(sl.allocation.r);
  kv["dmala_step"] = fmt_double(dmala_step);
  kv["eps"] = fmt_double(sl.eps);
  kv["eps_end"] = fmt_double(sl.eps_end);
  kv["grid"] = grid_name(sl.grid);
  kv["k"] = std::to_string(sl.k);
  kv["n_min"] = std::to_string(sl.allocation.n_min);
  kv["sample_ratio"] = fmt_double(sl.sample_ratio);
  kv["schedule"] = sl.schedule.name();
  kv["sigma"] = fmt_double(sl.sigma);
  kv["steps"] = std::to_string(sl.total_mcmc);
  kv["warm_start"] = sl.warm_start ? "true" : "false";
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string BenchConfig::hash() const { return hex64(fnv1a64(canonical())); }

void BenchConfig::set(const std::string& key, const std::string& value) {
  if (key == "steps" || key == "total_mcmc") sl.total_mcmc = parse_count(key, value);
  else if (key == "k") sl.k = parse_count(key, value);
  else if (key == "sigma") sl.sigma = parse_real(key, value);
  else if (key == "eps") sl.eps = parse_real(key, value);
  else if (key == "eps_end") sl.eps_end = parse_real(key, value);
  else if (key == "classic_end") sl.classic_end = parse_real(key, value);
  else if (key == "schedule") sl.schedule = AlphaSchedule::parse(value);
  else if (key == "grid") sl.grid = parse_grid(value);
  else if (key == "allocation") {
    if (value == "identical") sl.allocation.kind = StepAllocation::Kind::Identical;
    else if (value == "exp") sl.allocation.kind = StepAllocation::Kind::ExpDecay;
    else throw ConfigError("unknown allocation '" + value + "'");
  } else if (key == "decay_r") sl.allocation.r = parse_real(key, value);
  else if (key == "n_min") sl.allocation.n_min = parse_count(key, value);
  else if (key == "sample_ratio") sl.sample_ratio = parse_real(key, value);
  else if (key == "warm_start") sl.warm_start = parse_bool(value);
  else if (key == "anneal_every") anneal_every = parse_count(key, value);
  else if (key == "dmala_step") dmala_step = parse_real(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

void BenchConfig::validate() const {
  sl.validate();
  if (anneal_every < 1) throw ConfigError("anneal_every must be >= 1");
  if (!(dmala_step > 0.0)) throw ConfigError("dmala_step must be > 0");
}

BenchConfig read_config(std::istream& in, const std::string& source) {
  BenchConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto p = line.find('#'); p != std::string::npos) line.erase(p);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, line_no, "expected 'key = value'");
    try {
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  cfg.validate();
  return cfg;
}

BenchConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  return read_config(in, path);
}

SamplerKind bench_sampler(const std::string& name, const BenchConfig& cfg) {
  SamplerKind k = SamplerKind::parse(name);
  if (k.tag == SamplerTag::Dmala || k.tag == SamplerTag::Dula) k.step_size = cfg.dmala_step;
  return k;
}

RunRecord run_baseline(const QuboInstance& inst, const std::string& id, const std::string& sampler,
                       const BenchConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const SamplerKind kind = bench_sampler(sampler, cfg);
  const std::vector<BqdModel> targets = annealed_targets(inst, cfg);
  CounterRng rng = run_stream(id, seed);
  Chain chain = make_chain(targets.front(), kind, rng.split(2));
  BestTracker best(inst);
  const std::uint64_t budget = cfg.budget();
  std::uint64_t used = 0;
  for (std::uint64_t s = 0; s < budget; ++s) {
    step(targets[s / cfg.anneal_every], chain, kind);
    ++used;
    best.observe(chain.state, s + 1);
  }
  RunRecord r{id, kind.name(), false, seed, best.best(), best.step(), used, 0, cfg.hash()};
  if (cfg.timing)
    r.wallclock_ms = static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                    std::chrono::steady_clock::now() - start)
                                                    .count());
  return r;
}

RunRecord run_sl(const QuboInstance& inst, const std::string& id, const std::string& sampler,
                 const BenchConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const SamplerKind kind = bench_sampler(sampler, cfg);
  const std::vector<BqdModel> targets = annealed_targets(inst, cfg);
  CounterRng rng = run_stream(id, seed);
  CounterRng sl_rng = rng.split(3);
  SlConfig sc = cfg.sl;
  sc.record_vectors = false;
  BestTracker best(inst);
  SlHooks hooks;
  const std::uint64_t blocks = targets.size();
  hooks.target_at = [&](std::uint64_t g) {
    return &targets[std::min<std::uint64_t>(g / cfg.anneal_every, blocks - 1)];
  };
  hooks.on_sample = [&](const SpinState& s, std::uint64_t g) { best.observe(s, g); };
  const SlResult res = sl_run(targets.front(), kind, sc, sl_rng, hooks);
  const std::uint64_t used = res.trace.total_mcmc();
  best.consider(best.repairer().repaired_objective(res.sample.spins()), used);
  RunRecord r{id, kind.name(), true, seed, best.best(), best.step(), used, 0, cfg.hash()};
  if (cfg.timing)
    r.wallclock_ms = static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                    std::chrono::steady_clock::now() - start)
                                                    .count());
  return r;
}

std::pair<RunRecord, RunRecord> run_pair(const QuboInstance& inst, const std::string& id,
                                         const std::string& sampler, const BenchConfig& cfg,
                                         std::uint64_t seed) {
  RunRecord base = run_baseline(inst, id, sampler, cfg, seed);
  RunRecord sl = run_sl(inst, id, sampler, cfg, seed);
  if (base.total_mcmc != sl.total_mcmc || base.total_mcmc != cfg.budget())
    throw ProtocolError("paired runs used different MCMC budgets: " + std::to_string(base.total_mcmc) +
                        " vs " + std::to_string(sl.total_mcmc));
  return {std::move(base), std::move(sl)};
}

OrderedAppender::OrderedAppender(const std::string& path, bool header) : path_(path) {
  fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw std::runtime_error("cannot open " + path + ": " + std::strerror(errno));
  struct stat st {};
  if (header && ::fstat(fd_, &st) == 0 && st.st_size == 0) write_all(std::string(kCsvHeader) + "\n");
}

OrderedAppender::~OrderedAppender() {
  if (fd_ >= 0) ::close(fd_);
}

void OrderedAppender::write_all(const std::string& s) {
  std::size_t off = 0;
  while (off < s.size()) {
    const ssize_t w = ::write(fd_, s.data() + off, s.size() - off);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw std::runtime_error("write to " + path_ + " failed: " + std::strerror(errno));
    }
    off += static_cast<std::size_t>(w);
  }
  ::fsync(fd_);
}

void OrderedAppender::submit(std::size_t index, std::string block) {
  std::lock_guard lock(mu_);
  pending_.emplace(index, std::move(block));
  for (auto it = pending_.find(next_); it != pending_.end(); it = pending_.find(next_)) {
    write_all(it->second);
    pending_.erase(it);
    ++next_;
  }
}

std::size_t OrderedAppender::written() const {
  std::lock_guard lock(mu_);
  return next_;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    part = trim(part);
    if (part.empty()) throw ConfigError("empty seed entry in '" + text + "'");
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_count("seeds", part));
      continue;
    }
    const std::uint64_t a = parse_count("seeds", part.substr(0, dots));
    const std::uint64_t b = parse_count("seeds", part.substr(dots + 2));
    if (b < a) throw ConfigError("seed range '" + part + "' is reversed");
    for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
  }
  if (out.empty()) throw ConfigError("no seeds given");
  return out;
}

std::string AblationCell::label() const {
  std::ostringstream out;
  out << "schedule=" << schedule.name() << " grid=" << grid_name(grid)
      << " allocation=" << allocation_name(allocation) << " k=" << k << " sigma=" << sigma;
  return out.str();
}

std::vector<AblationCell> AblationGrid::cells() const {
  std::vector<AblationCell> out;
  for (const auto& s : schedules)
    for (auto g : grids)
      for (const auto& a : allocations)
        for (auto k : ks)
          for (auto sigma : sigmas) out.push_back({s, g, a, k, sigma});
  return out;
}

std::vector<CellSummary> summarize(const std::vector<RunRecord>& rows,
                                   const std::map<std::string, std::string>& labels) {
  std::vector<CellSummary> out;
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const auto& r : rows) {
    auto key = std::make_pair(r.config_hash, r.sampler);
    if (!groups.count(key)) {
      CellSummary c;
      c.config_hash = r.config_hash;
      c.sampler = r.sampler;
      auto it = labels.find(r.config_hash);
      c.label = it == labels.end() ? r.config_hash : it->second;
      out.push_back(c);
    }
    groups[key].push_back(r.best_objective);
  }
  for (auto& c : out) {
    const auto& v = groups[{c.config_hash, c.sampler}];
    c.count = v.size();
    double m = 0.0;
    for (double x : v) m += x;
    m /= double(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    c.mean = m;
    c.stddev = v.size() > 1 ? std::sqrt(ss / double(v.size() - 1)) : 0.0;
  }
  return out;
}

namespace {

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= double(x.size());
  my /= double(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

BqdModel complexity_model(Index n, std::uint64_t seed) {
  QuboInstance inst;
  inst.graph = gen_ba(n, 4, seed);
  inst.kind = ProblemKind::MaxCut;
  return compile_to_bqd(inst, 1.0).model;
}

double sl_overhead(const BqdModel& model, std::size_t k, std::size_t repeats, std::uint64_t seed) {
  SlConfig cfg;
  cfg.k = k;
  cfg.total_mcmc = k;
  cfg.allocation = StepAllocation::identical();
  cfg.record_vectors = false;
  cfg.measure_overhead = true;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < repeats; ++r) {
    CounterRng rng(seed, r);
    best = std::min(best, sl_run(model, SamplerKind::glauber(), cfg, rng).trace.overhead_seconds);
  }
  return best;
}

}  // namespace

ComplexityReport measure_complexity(const ComplexityOptions& o) {
  ComplexityReport rep;
  std::vector<double> xs;
  for (Index n : o.sizes) {
    const BqdModel model = complexity_model(n, o.seed);
    rep.sizes.push_back(n);
    rep.overhead_seconds.push_back(sl_overhead(model, o.k, o.repeats, o.seed));
    xs.push_back(double(n));
  }
  if (xs.size() >= 2) rep.overhead_slope = log_log_slope(xs, rep.overhead_seconds);

  const Index mid = o.sizes.size() > 1 ? o.sizes[1] : o.sizes.front();
  const BqdModel mid_model = complexity_model(mid, o.seed);
  rep.doubling_ratio = sl_overhead(mid_model, 2 * o.k, o.repeats, o.seed) /
                       sl_overhead(mid_model, o.k, o.repeats, o.seed);

  rep.ratio_size = o.ratio_size;
  const BqdModel model = complexity_model(o.ratio_size, o.seed);
  const SamplerKind kind = SamplerKind::parse(o.sampler);
  using clock = std::chrono::steady_clock;
  double base_t = std::numeric_limits<double>::infinity(), sl_t = base_t;
  for (std::size_t r = 0; r < std::max<std::size_t>(3, o.repeats / 2); ++r) {
    CounterRng rng(o.seed, 100 + r);
    auto t0 = clock::now();
    Chain chain = make_chain(model, kind, rng.split(2));
    for (std::uint64_t s = 0; s < o.budget; ++s) step(model, chain, kind);
    base_t = std::min(base_t, std::chrono::duration<double>(clock::now() - t0).count());

    SlConfig cfg;
    cfg.k = o.k;
    cfg.total_mcmc = o.budget;
    cfg.record_vectors = false;
    CounterRng sl_rng = rng.split(3);
    t0 = clock::now();
    const SlResult res = sl_run(model, kind, cfg, sl_rng);
    sl_t = std::min(sl_t, std::chrono::duration<double>(clock::now() - t0).count());
    if (res.trace.total_mcmc() != o.budget) throw ProtocolError("SL run used a different budget");
  }
  rep.runtime_ratio = sl_t / base_t;
  return rep;
}

}  // namespace bqsl
