#include "bqsl/sl.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

namespace bqsl {

AlphaSchedule AlphaSchedule::parse(std::string_view name) {
  if (name == "classic") return classic();
  if (name == "geom11") return geom(1.0, 1.0);
  if (name == "geom21") return geom(2.0, 1.0);
  if (name.starts_with("geom:")) {
    std::string rest(name.substr(5));
    std::istringstream in(rest);
    double a1 = 0, a2 = 0;
    char comma = 0;
    if (in >> a1 >> comma >> a2 && comma == ',' && in.peek() == EOF) {
      AlphaSchedule s = geom(a1, a2);
      s.validate();
      return s;
    }
  }
  throw ConfigError("unknown schedule '" + std::string(name) + "'");
}

std::string AlphaSchedule::name() const {
  if (kind == Kind::Classic) return "classic";
  if (a1 == 1.0 && a2 == 1.0) return "geom11";
  if (a1 == 2.0 && a2 == 1.0) return "geom21";
  std::ostringstream out;
  out.precision(17);
  out << "geom:" << a1 << ',' << a2;
  return out.str();
}

void AlphaSchedule::validate() const {
  if (kind == Kind::Geom && !(a1 >= 1.0 && a2 > 0.0))
    throw ConfigError("geometric schedule needs a1 >= 1 and a2 > 0");
}

double alpha_of(const AlphaSchedule& schedule, double t) {
  if (!(t >= 0.0) || !(t < schedule.horizon()))
    throw RangeError("time " + std::to_string(t) + " outside the schedule domain");
  if (schedule.kind == AlphaSchedule::Kind::Classic) return t;
  if (t == 0.0) return 0.0;
  return std::pow(t, 0.5 * schedule.a1) * std::pow(1.0 - t, -0.5 * schedule.a2);
}

void SlConfig::validate() const {
  schedule.validate();
  if (k < 1) throw ConfigError("need at least one iteration");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0");
  if (!(eps > 0.0 && eps < 0.5) || !(eps_end > 0.0 && eps_end < 0.5))
    throw ConfigError("eps and eps_end must lie in (0, 0.5)");
  if (!(eps + eps_end < 1.0)) throw ConfigError("eps + eps_end must be < 1");
  if (!(sample_ratio > 0.0 && sample_ratio <= 1.0))
    throw ConfigError("sample ratio must lie in (0, 1]");
  if (!(last_time() > eps)) throw ConfigError("empty time interval");
  if (allocation.kind == StepAllocation::Kind::ExpDecay) {
    if (!(allocation.r > 0.0 && allocation.r < 1.0)) throw ConfigError("decay rate must lie in (0, 1)");
    if (allocation.n_min < 1) throw ConfigError("n_min must be >= 1");
    if (total_mcmc < k * allocation.n_min) throw ConfigError("budget below k * n_min");
  } else if (total_mcmc < k) {
    throw ConfigError("budget below one step per iteration");
  }
}

double SlConfig::last_time() const {
  if (schedule.kind == AlphaSchedule::Kind::Geom) return 1.0 - eps_end;
  return classic_end > 0.0 ? classic_end : 1.0 / eps_end;
}

std::vector<double> build_time_grid(const SlConfig& cfg) {
  cfg.validate();
  const std::size_t k = cfg.k;
  const double t0 = cfg.first_time();
  const double tk = cfg.last_time();
  std::vector<double> grid(k + 1);
  grid.front() = t0;
  grid.back() = tk;
  if (cfg.grid == TimeGrid::Uniform) {
    for (std::size_t i = 1; i < k; ++i) grid[i] = t0 + (tk - t0) * double(i) / double(k);
    return grid;
  }
  auto snr = [&](double t) { return std::log(alpha_of(cfg.schedule, t) / (cfg.sigma * std::sqrt(t))); };
  const double s0 = snr(t0);
  const double sk = snr(tk);
  if (!(sk > s0)) throw ConfigError("signal-to-noise ratio does not increase over the interval");
  for (std::size_t i = 1; i < k; ++i) {
    const double target = s0 + (sk - s0) * double(i) / double(k);
    double lo = grid[i - 1], hi = tk;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (snr(mid) < target ? lo : hi) = mid;
    }
    grid[i] = 0.5 * (lo + hi);
  }
  for (std::size_t i = 1; i <= k; ++i) {
    if (!(grid[i] > grid[i - 1]) || !(snr(grid[i]) > snr(grid[i - 1])))
      throw ConfigError("signal-to-noise ratio is not strictly monotone on the grid");
  }
  return grid;
}

std::vector<std::size_t> allocate_steps(std::size_t total, std::size_t k,
                                        const StepAllocation& allocation) {
  if (k < 1) throw ConfigError("need at least one iteration");
  std::vector<std::size_t> n(k);
  if (allocation.kind == StepAllocation::Kind::Identical) {
    if (total < k) throw ConfigError("budget below one step per iteration");
    for (std::size_t i = 0; i < k; ++i) n[i] = total / k + (i < total % k ? 1 : 0);
    return n;
  }
  if (!(allocation.r > 0.0 && allocation.r < 1.0)) throw ConfigError("decay rate must lie in (0, 1)");
  if (allocation.n_min < 1) throw ConfigError("n_min must be >= 1");
  if (total < k * allocation.n_min) throw ConfigError("budget below k * n_min");
  const std::size_t spare = total - k * allocation.n_min;
  std::vector<double> w(k);
  for (std::size_t i = 0; i < k; ++i) w[i] = std::pow(allocation.r, double(i) / double(k));
  const double c = double(spare) / std::accumulate(w.begin(), w.end(), 0.0);
  std::size_t used = 0;
  for (std::size_t i = 0; i < k; ++i) {
    n[i] = static_cast<std::size_t>(std::floor(c * w[i]));
    used += n[i];
  }
  // Rounding can push a floor one past an exact integer; take it back from the tail.
  for (std::size_t i = k; used > spare && i-- > 0;) {
    const std::size_t take = std::min(n[i], used - spare);
    n[i] -= take;
    used -= take;
  }
  for (std::size_t i = 0; used < spare; i = (i + 1) % k, ++used) ++n[i];
  for (auto& v : n) v += allocation.n_min;
  return n;
}

BqdModel posterior_model(const BqdModel& target, const Eigen::VectorXd& y, double t,
                         const AlphaSchedule& schedule, double sigma) {
  if (!(t > 0.0)) throw RangeError("posterior needs t > 0");
  if (y.size() != target.n()) throw ConfigError("observation size differs from model size");
  const double scale = alpha_of(schedule, t) / (sigma * sigma * t);
  return target.with_field(target.field() + scale * y);
}

namespace {

// Mean of the trailing `window` states, touching only the sites that flipped.
// `before(step)` may swap the model between steps; `after(step)` sees each new state.
template <typename Before, typename After>
Eigen::VectorXd run_average(const BqdModel*& model, Chain& chain, const SamplerKind& kind,
                            std::size_t n_steps, double sample_ratio, Before before, After after) {
  const auto window = std::max<std::size_t>(
      1, std::min(n_steps, static_cast<std::size_t>(std::ceil(sample_ratio * double(n_steps)))));
  const std::size_t burn = n_steps - window;
  for (std::size_t s = 0; s < burn; ++s) {
    before(s);
    step(*model, chain, kind);
    after(s);
  }
  const Index n = chain.state.n();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(n);
  Eigen::VectorXi tracked = chain.state.spins();
  std::vector<std::size_t> since(static_cast<std::size_t>(n), 1);
  std::vector<Index> journal;
  chain.state.set_journal(&journal);
  for (std::size_t s = 1; s <= window; ++s) {
    before(burn + s - 1);
    step(*model, chain, kind);
    for (Index i : journal) {
      const auto u = static_cast<std::size_t>(i);
      acc[i] += tracked[i] * double(s - since[u]);
      since[u] = s;
      tracked[i] = -tracked[i];
    }
    journal.clear();
    after(burn + s - 1);
  }
  chain.state.set_journal(nullptr);
  for (Index i = 0; i < n; ++i) acc[i] += tracked[i] * double(window + 1 - since[static_cast<std::size_t>(i)]);
  return acc / double(window);
}

}  // namespace

Eigen::VectorXd estimate_posterior_mean(const BqdModel& post, Chain& chain,
                                        const SamplerKind& kind, std::size_t n_steps,
                                        double sample_ratio) {
  if (n_steps < 1) throw ConfigError("need at least one MCMC step");
  if (!(sample_ratio > 0.0 && sample_ratio <= 1.0)) throw ConfigError("sample ratio must lie in (0, 1]");
  check_dimension(post, chain.state);
  const BqdModel* m = &post;
  return run_average(m, chain, kind, n_steps, sample_ratio, [](std::size_t) {}, [](std::size_t) {});
}

std::size_t SlTrace::total_mcmc() const {
  return std::accumulate(mcmc_steps.begin(), mcmc_steps.end(), std::size_t{0});
}

Spins sign_round(const Eigen::VectorXd& v) {
  return v.unaryExpr([](double z) { return z < 0.0 ? -1 : 1; });
}

SlResult sl_run(const BqdModel& target, const SamplerKind& kind, const SlConfig& cfg,
                CounterRng& rng, const SlHooks& hooks) {
  cfg.validate();
  kind.validate();
  const std::vector<double> grid = build_time_grid(cfg);
  const std::vector<std::size_t> steps = allocate_steps(cfg.total_mcmc, cfg.k, cfg.allocation);
  const Index n = target.n();
  const double sigma = cfg.sigma;
  using clock = std::chrono::steady_clock;
  clock::duration overhead{};
  auto now = [&] { return cfg.measure_overhead ? clock::now() : clock::time_point{}; };

  const BqdModel* tgt = &target;
  if (hooks.target_at)
    if (const BqdModel* p = hooks.target_at(0)) tgt = p;
  if (!tgt->shares_couplings(target) && tgt != &target)
    throw ConfigError("annealed targets must share couplings with the original target");

  SlTrace trace;
  trace.t = grid;
  trace.alpha.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) trace.alpha[i] = alpha_of(cfg.schedule, grid[i]);

  Eigen::VectorXd y(n);
  const double sd0 = sigma * std::sqrt(grid[0]);
  for (Index i = 0; i < n; ++i) y[i] = sd0 * rng.normal();

  CounterRng chain_rng = rng.split(1);
  Chain chain = make_chain(*tgt, kind, chain_rng);
  std::uint64_t global = 0;

  for (std::size_t it = 0; it < cfg.k; ++it) {
    const auto t_begin = now();
    const double t = grid[it];
    const double scale = trace.alpha[it] / (sigma * sigma * t);
    BqdModel post = tgt->with_field(tgt->field() + scale * y);
    const double threshold = 2.0 * tgt->beta() * tgt->max_abs_row_sum();
    const double min_field = post.field().cwiseAbs().minCoeff();
    trace.min_abs_field.push_back(min_field);
    trace.field_dominant.push_back(min_field >= threshold);
    if (it == 0) trace.dominance_threshold = threshold;
    if (cfg.record_vectors) trace.y.push_back(y);

    if (!cfg.warm_start && it > 0) {
      Spins s(n);
      for (Index i = 0; i < n; ++i) s[i] = chain.rng.uniform() < 0.5 ? -1 : 1;
      chain.state = SpinState(post, std::move(s));
    }

    const BqdModel* cur = &post;
    auto before = [&](std::size_t) {
      if (!hooks.target_at) return;
      const BqdModel* p = hooks.target_at(global);
      if (p == nullptr || p == tgt) return;
      if (!p->shares_couplings(target)) throw ConfigError("annealed targets must share couplings");
      tgt = p;
      post = tgt->with_field(tgt->field() + scale * y);
      cur = &post;
    };
    auto after = [&](std::size_t) {
      ++global;
      if (hooks.on_sample) hooks.on_sample(chain.state, global);
    };
    const auto t_mcmc = now();
    const Eigen::VectorXd u =
        run_average(cur, chain, kind, steps[it], cfg.sample_ratio, before, after);
    const auto t_resume = now();
    trace.mcmc_steps.push_back(steps[it]);
    if (cfg.record_vectors) trace.u.push_back(u);

    const double delta = grid[it + 1] - grid[it];
    const double w = trace.alpha[it + 1] - trace.alpha[it];
    const double sd = sigma * std::sqrt(delta);
    y += w * u;
    for (Index i = 0; i < n; ++i) y[i] += sd * rng.normal();
    overhead += (t_mcmc - t_begin) + (now() - t_resume);
  }
  if (cfg.record_vectors) trace.y.push_back(y);
  trace.output = y / trace.alpha.back();
  trace.overhead_seconds = std::chrono::duration<double>(overhead).count();
  SpinState sample(target, sign_round(trace.output));
  return SlResult{std::move(sample), std::move(trace), std::move(chain)};
}

void write_trace(std::ostream& out, const SlTrace& trace) {
  using nlohmann::json;
  const std::size_t k = trace.mcmc_steps.size();
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  for (std::size_t i = 0; i <= k; ++i) {
    json rec;
    rec["i"] = i;
    rec["t"] = trace.t[i];
    rec["alpha"] = trace.alpha[i];
    if (i < trace.y.size()) rec["y"] = vec(trace.y[i]);
    if (i < k) {
      if (i < trace.u.size()) rec["u"] = vec(trace.u[i]);
      rec["mcmc_steps"] = trace.mcmc_steps[i];
      rec["min_abs_field"] = trace.min_abs_field[i];
      rec["field_dominant"] = static_cast<bool>(trace.field_dominant[i]);
    } else {
      rec["output"] = vec(trace.output);
    }
    out << rec.dump() << '\n';
  }
}

}  // namespace bqsl
