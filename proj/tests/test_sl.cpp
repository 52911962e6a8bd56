#include "helpers.hpp"

#include "bqsl/numeric.hpp"
#include "bqsl/sl.hpp"
#include "bqsl/theory.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace bqsl;
using bqsl::test::random_model;

TEST_CASE("alpha schedules") {
  CHECK(alpha_of(AlphaSchedule::geom(2, 1), 0.75) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(alpha_of(AlphaSchedule::geom(1, 1), 0.5) == doctest::Approx(1.0).epsilon(1e-14));
  for (const auto& s : {AlphaSchedule::classic(), AlphaSchedule::geom(1, 1), AlphaSchedule::geom(2, 1)})
    CHECK(alpha_of(s, 0.0) == 0.0);
  CHECK(alpha_of(AlphaSchedule::classic(), 7.0) == 7.0);
  CHECK_THROWS_AS(alpha_of(AlphaSchedule::geom(2, 1), 1.0), RangeError);
  CHECK_THROWS_AS(alpha_of(AlphaSchedule::classic(), -0.1), RangeError);
  CHECK_THROWS_AS(AlphaSchedule::geom(0.5, 1).validate(), ConfigError);
  CHECK_THROWS_AS(AlphaSchedule::geom(1, 0).validate(), ConfigError);
  CHECK(AlphaSchedule::parse("geom21").a1 == 2.0);
  CHECK(AlphaSchedule::parse("geom:3,0.5").a2 == 0.5);
  CHECK(AlphaSchedule::parse("classic").kind == AlphaSchedule::Kind::Classic);
  CHECK_THROWS_AS(AlphaSchedule::parse("cosine"), ConfigError);
}

TEST_CASE("uniform time grid") {
  SlConfig c;
  c.k = 4;
  c.eps = 0.1;
  c.eps_end = 0.1;
  c.total_mcmc = 100;
  const auto g = build_time_grid(c);
  const std::vector<double> expect = {0.1, 0.3, 0.5, 0.7, 0.9};
  REQUIRE(g.size() == expect.size());
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(expect[i]).epsilon(1e-14));

  c.k = 1;
  const auto one = build_time_grid(c);
  REQUIRE(one.size() == 2);
  CHECK(one[0] == doctest::Approx(0.1));
  CHECK(one[1] == doctest::Approx(0.9));
}

TEST_CASE("log-SNR time grid") {
  SlConfig c;
  c.sigma = 1.0;
  c.k = 64;
  const auto g = build_time_grid(c);
  REQUIRE(g.size() == 65);
  CHECK(g.front() == doctest::Approx(c.eps));
  CHECK(g.back() == doctest::Approx(1.0 - c.eps_end));
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
  c.grid = TimeGrid::LogSnr;
  const auto l = build_time_grid(c);
  REQUIRE(l.size() == 65);
  CHECK(l.front() == doctest::Approx(c.eps));
  CHECK(l.back() == doctest::Approx(1.0 - c.eps_end));
  for (std::size_t i = 1; i < l.size(); ++i) CHECK(l[i] > l[i - 1]);
}

TEST_CASE("classic schedule uses an unbounded horizon") {
  SlConfig c;
  c.schedule = AlphaSchedule::classic();
  c.k = 8;
  c.total_mcmc = 64;
  const auto g = build_time_grid(c);
  CHECK(g.back() == doctest::Approx(1.0 / c.eps_end));
  c.classic_end = 40.0;
  CHECK(build_time_grid(c).back() == doctest::Approx(40.0));
}

TEST_CASE("step allocation examples") {
  CHECK(allocate_steps(100, 10, StepAllocation::identical()) == std::vector<std::size_t>(10, 10));
  CHECK(allocate_steps(100, 4, StepAllocation::exp_decay(0.25, 2)) == std::vector<std::size_t>{38, 28, 20, 14});
  CHECK(allocate_steps(40, 5, StepAllocation::exp_decay(0.1, 8)) == std::vector<std::size_t>(5, 8));
  CHECK_THROWS_AS(allocate_steps(30, 5, StepAllocation::exp_decay(0.1, 8)), ConfigError);
  CHECK_THROWS_AS(allocate_steps(3, 5, StepAllocation::identical()), ConfigError);
}

TEST_CASE("step allocation on random tuples") {
  CounterRng rng(17);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + rng.index(300);
    const std::size_t n_min = 1 + rng.index(20);
    const std::size_t total = k * n_min + rng.index(20000);
    const double r = 0.001 + 0.998 * rng.uniform();
    const auto e = allocate_steps(total, k, StepAllocation::exp_decay(r, n_min));
    REQUIRE(e.size() == k);
    REQUIRE(std::accumulate(e.begin(), e.end(), std::size_t{0}) == total);
    for (std::size_t i = 1; i < k; ++i) REQUIRE(e[i] <= e[i - 1]);
    REQUIRE(e.back() >= n_min);
    const auto u = allocate_steps(total, k, StepAllocation::identical());
    REQUIRE(std::accumulate(u.begin(), u.end(), std::size_t{0}) == total);
    REQUIRE(*std::max_element(u.begin(), u.end()) - *std::min_element(u.begin(), u.end()) <= 1);
  }
}

TEST_CASE("posterior field") {
  const BqdModel m = random_model(4, 3);
  const Eigen::VectorXd y0 = Eigen::VectorXd::Zero(4);
  CHECK(posterior_model(m, y0, 0.3, AlphaSchedule::geom(2, 1), 5.0).field() == m.field());

  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(4, -1.0, 2.0);
  for (double t : {0.2, 1.0, 3.5}) {
    const BqdModel p = posterior_model(m, y, t, AlphaSchedule::classic(), 1.0);
    CHECK((p.field() - (m.field() + y)).cwiseAbs().maxCoeff() < 1e-14);
  }
  const Eigen::VectorXd y4 = Eigen::VectorXd::Constant(4, 4.0);
  const BqdModel p = posterior_model(m, y4, 0.75, AlphaSchedule::geom(2, 1), 2.0);
  CHECK((p.field() - (m.field() + 0.5 * y4)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(p.shares_couplings(m));
  CHECK(p.beta() == m.beta());
}

TEST_CASE("posterior mean of a product measure") {
  Eigen::VectorXd h(3);
  h << 0.3, -1.2, 2.0;
  const BqdModel post = BqdModel::from_pairs(3, {}, h, 0.0);
  constexpr int replicas = 30;
  std::vector<Eigen::VectorXd> means;
  for (int r = 0; r < replicas; ++r) {
    Chain c = make_chain(post, SamplerKind::glauber(), CounterRng(5, r));
    means.push_back(estimate_posterior_mean(post, c, SamplerKind::glauber(), 100000, 0.5));
  }
  for (Index i = 0; i < 3; ++i) {
    double avg = 0.0;
    for (const auto& m : means) avg += m[i];
    avg /= replicas;
    double ss = 0.0;
    for (const auto& m : means) ss += (m[i] - avg) * (m[i] - avg);
    const double sd = std::sqrt(ss / (replicas - 1));
    CHECK(std::abs(means[0][i] - std::tanh(h[i])) < 5.0 * sd);
    CHECK(std::abs(avg - std::tanh(h[i])) < 5.0 * sd / std::sqrt(double(replicas)));
  }
}

TEST_CASE("posterior mean with one step is the post-step state") {
  const BqdModel m = random_model(5, 8);
  Chain c = make_chain(m, SamplerKind::metropolis(), CounterRng(2));
  Chain copy = c;
  const Eigen::VectorXd u = estimate_posterior_mean(m, c, SamplerKind::metropolis(), 1, 1.0);
  step(m, copy, SamplerKind::metropolis());
  CHECK(u == copy.state.spins().cast<double>());
  CHECK_THROWS_AS(estimate_posterior_mean(m, c, SamplerKind::metropolis(), 0, 0.5), ConfigError);
}

TEST_CASE("posterior mean agrees with enumeration") {
  const BqdModel m = random_model(4, 40, 0.8, 1.0, 1.0);
  const Eigen::VectorXd exact = exact_distribution(m).mean();
  constexpr int replicas = 10;
  std::vector<Eigen::VectorXd> means;
  for (int r = 0; r < replicas; ++r) {
    Chain c = make_chain(m, SamplerKind::glauber(), CounterRng(77, r));
    means.push_back(estimate_posterior_mean(m, c, SamplerKind::glauber(), 1000000, 0.5));
  }
  for (Index i = 0; i < 4; ++i) {
    double avg = 0.0;
    for (const auto& v : means) avg += v[i];
    avg /= replicas;
    double ss = 0.0;
    for (const auto& v : means) ss += (v[i] - avg) * (v[i] - avg);
    const double sd = std::sqrt(ss / (replicas - 1));
    CHECK(std::abs(means[0][i] - exact[i]) < 3.0 * sd);
  }
}

TEST_CASE("sl_run on a single spin") {
  Eigen::VectorXd b(1);
  b << 3.0;
  const BqdModel m = BqdModel::from_pairs(1, {}, b, 1.7);
  SlConfig c;
  // sigma = 1 keeps the residual noise in Y_K / alpha(t_K) near 0.1 so rounding is exact
  c.k = 64;
  c.sigma = 1.0;
  c.total_mcmc = 2000;
  c.record_vectors = false;
  const int runs = 2000;
  int up = 0;
  for (int r = 0; r < runs; ++r) {
    CounterRng rng(r, 1);
    up += sl_run(m, SamplerKind::glauber(), c, rng).sample.spin(0) == 1;
  }
  const double p = sigmoid(6.0);
  CHECK(p == doctest::Approx(0.99753).epsilon(1e-5));
  const double se = std::sqrt(p * (1 - p) / runs);
  CHECK(std::abs(double(up) / runs - p) <= 3.0 * se);
}

TEST_CASE("sl_run output is a spin vector") {
  const BqdModel m = random_model(5, 4);
  SlConfig c;
  c.k = 1;
  c.sigma = 1e3;
  c.total_mcmc = 5000;
  CounterRng rng(3);
  const SlResult r = sl_run(m, SamplerKind::glauber(), c, rng);
  for (Index i = 0; i < 5; ++i) CHECK(std::abs(r.sample.spin(i)) == 1);
  CHECK(sign_round(Eigen::VectorXd::Zero(2)) == Spins::Ones(2));
}

TEST_CASE("sl_run consumes the exact budget and reports it") {
  const BqdModel m = random_model(6, 10);
  for (const char* kind : {"glauber", "gradient-mh", "dmala"}) {
    for (auto alloc : {StepAllocation::identical(), StepAllocation::exp_decay(0.01, 8)}) {
      SlConfig c;
      c.k = 37;
      c.total_mcmc = 4321;
      c.allocation = alloc;
      std::uint64_t calls = 0, last = 0;
      SlHooks hooks;
      hooks.on_sample = [&](const SpinState&, std::uint64_t g) {
        ++calls;
        REQUIRE(g == last + 1);
        last = g;
      };
      CounterRng rng(8);
      const SlResult r = sl_run(m, SamplerKind::parse(kind), c, rng, hooks);
      CHECK(r.trace.total_mcmc() == 4321);
      CHECK(calls == 4321);
      CHECK(r.chain.stats.steps == 4321);
      CHECK(r.trace.t.size() == 38);
      CHECK(r.trace.y.size() == 38);
      CHECK(r.trace.u.size() == 37);
    }
  }
}

TEST_CASE("sl_run replays and warm start toggles") {
  const BqdModel m = random_model(6, 12);
  SlConfig c;
  c.k = 16;
  c.total_mcmc = 800;
  CounterRng a(5), b(5);
  const SlResult ra = sl_run(m, SamplerKind::gradient_mh(), c, a);
  const SlResult rb = sl_run(m, SamplerKind::gradient_mh(), c, b);
  CHECK(ra.trace.output == rb.trace.output);
  c.warm_start = false;
  CounterRng d(5);
  const SlResult rc = sl_run(m, SamplerKind::gradient_mh(), c, d);
  CHECK(rc.trace.total_mcmc() == 800);
  CHECK(rc.trace.output != ra.trace.output);
}

TEST_CASE("annealing hook swaps targets sharing couplings") {
  const BqdModel m = random_model(5, 2);
  const BqdModel hot = m.with_beta_field(0.1, m.field());
  const BqdModel other = random_model(5, 3);
  SlConfig c;
  c.k = 8;
  c.total_mcmc = 400;
  SlHooks hooks;
  hooks.target_at = [&](std::uint64_t g) { return g < 200 ? &hot : &m; };
  CounterRng rng(1);
  CHECK(sl_run(m, SamplerKind::glauber(), c, rng, hooks).trace.total_mcmc() == 400);
  hooks.target_at = [&](std::uint64_t) { return &other; };
  CounterRng rng2(1);
  CHECK_THROWS_AS(sl_run(m, SamplerKind::glauber(), c, rng2, hooks), ConfigError);
}

TEST_CASE("field dominance is recorded per iteration") {
  const BqdModel m = random_model(4, 6, 0.5);
  SlConfig c;
  c.k = 10;
  c.total_mcmc = 200;
  CounterRng rng(2);
  const SlTrace t = sl_run(m, SamplerKind::glauber(), c, rng).trace;
  CHECK(t.dominance_threshold == doctest::Approx(2 * 0.5 * m.max_abs_row_sum()));
  REQUIRE(t.min_abs_field.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(t.field_dominant[i] == (t.min_abs_field[i] >= t.dominance_threshold));
}

TEST_CASE("trace lines") {
  const BqdModel m = random_model(3, 9);
  SlConfig c;
  c.k = 5;
  c.total_mcmc = 50;
  CounterRng rng(4);
  const SlResult r = sl_run(m, SamplerKind::glauber(), c, rng);
  std::stringstream out;
  write_trace(out, r.trace);
  std::string line;
  int lines = 0;
  std::string last;
  while (std::getline(out, line)) {
    ++lines;
    last = line;
  }
  CHECK(lines == 6);
  CHECK(last.find("\"output\"") != std::string::npos);
}

TEST_CASE("config validation") {
  SlConfig c;
  CHECK_NOTHROW(c.validate());
  c.eps = 0.6;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SlConfig{};
  c.total_mcmc = c.k * c.allocation.n_min - 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SlConfig{};
  c.k = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = SlConfig{};
  c.sample_ratio = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
