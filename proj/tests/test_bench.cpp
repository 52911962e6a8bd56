#include "bqsl/bench.hpp"
#include "bqsl/errors.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

using namespace bqsl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("bqsl_test_bench_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

QuboInstance small_mis(Index n, double p, std::uint64_t seed) {
  QuboInstance q;
  q.graph = gen_er(n, p, seed);
  q.kind = ProblemKind::Mis;
  return q;
}

double exact_best(const QuboInstance& q) {
  const Index n = q.graph.n;
  double best = -1e300;
  for (std::uint64_t s = 0; s < (std::uint64_t(1) << n); ++s) {
    Spins x(n);
    for (Index i = 0; i < n; ++i) x[i] = (s >> i) & 1 ? 1 : -1;
    if (is_feasible(q, x)) best = std::max(best, objective_value(q, x));
  }
  return best;
}

}  // namespace

TEST_CASE("csv rows follow the header") {
  RunRecord r{"er_n10_s0_000", "glauber", true, 7, 12.5, 300, 1000, 0, "00ff"};
  CHECK(csv_row(r) == "er_n10_s0_000,glauber,1,7,12.5,300,1000,0,00ff");
  std::size_t commas = 0;
  for (char c : std::string(kCsvHeader)) commas += c == ',';
  CHECK(commas == 8);
}

TEST_CASE("config parsing and hashing") {
  std::istringstream in("# bench\nsteps = 4000\nk = 32 # inner\n\nschedule = geom11\ngrid=logsnr\nallocation = identical\n");
  const BenchConfig cfg = read_config(in);
  CHECK(cfg.budget() == 4000);
  CHECK(cfg.sl.k == 32);
  CHECK(cfg.sl.schedule.name() == "geom11");
  CHECK(cfg.sl.grid == TimeGrid::LogSnr);
  CHECK(cfg.sl.allocation.kind == StepAllocation::Kind::Identical);

  BenchConfig a, b;
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  b.set("sigma", "3");
  CHECK(a.hash() != b.hash());
  b.set("sigma", "5");
  CHECK(a.hash() == b.hash());
  b.timing = true;
  CHECK(a.hash() == b.hash());
  b.set("total_mcmc", "10001");
  CHECK(a.hash() != b.hash());
  CHECK(a.canonical().find("steps = 10000\n") != std::string::npos);

  CHECK_THROWS_AS(a.set("bogus", "1"), ConfigError);
  CHECK_THROWS_AS(a.set("k", "-3"), ConfigError);
  CHECK_THROWS_AS(a.set("sigma", "abc"), ConfigError);
}

TEST_CASE("config errors carry line numbers") {
  std::istringstream in("steps = 100\nk = 8\nwarm_start = maybe\n");
  try {
    read_config(in, "c.cfg");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
    CHECK(std::string(e.what()).find("c.cfg:3") == 0);
  }
  std::istringstream no_eq("steps 100\n");
  CHECK_THROWS_AS(read_config(no_eq), ParseError);
  std::istringstream bad_value("sigma = -1\n");
  CHECK_THROWS_AS(read_config(bad_value), ConfigError);
}

TEST_CASE("seed lists") {
  CHECK(parse_seed_list("0..3") == std::vector<std::uint64_t>{0, 1, 2, 3});
  CHECK(parse_seed_list("5") == std::vector<std::uint64_t>{5});
  CHECK(parse_seed_list("0..1, 9") == std::vector<std::uint64_t>{0, 1, 9});
  CHECK_THROWS_AS(parse_seed_list("3..1"), ConfigError);
  CHECK_THROWS_AS(parse_seed_list(""), ConfigError);
  CHECK_THROWS_AS(parse_seed_list("1,,2"), ConfigError);
}

TEST_CASE("paired runs share the budget and replay") {
  const QuboInstance q = small_mis(12, 0.3, 4);
  BenchConfig cfg;
  cfg.set("steps", "3000");
  cfg.set("k", "16");
  const double best = exact_best(q);
  for (const char* s : {"glauber", "gradient-mh", "dmala"}) {
    const auto [base, sl] = run_pair(q, "inst", s, cfg, 3);
    CHECK(base.total_mcmc == 3000);
    CHECK(sl.total_mcmc == 3000);
    CHECK_FALSE(base.sl_enabled);
    CHECK(sl.sl_enabled);
    CHECK(base.config_hash == cfg.hash());
    for (const RunRecord* r : {&base, &sl}) {
      CHECK(r->best_found_at_step <= r->total_mcmc);
      CHECK(r->best_objective <= best);
      CHECK(r->best_objective >= 1.0);
      CHECK(r->wallclock_ms == 0);
    }
    // Small instance: both arms reach the optimum within the budget.
    CHECK(base.best_objective == best);
    CHECK(sl.best_objective == best);
    const auto [base2, sl2] = run_pair(q, "inst", s, cfg, 3);
    CHECK(csv_row(base) == csv_row(base2));
    CHECK(csv_row(sl) == csv_row(sl2));
  }
  // Different seeds and ids select different streams.
  const QuboInstance big = small_mis(60, 0.1, 1);
  cfg.set("steps", "200");
  CHECK(csv_row(run_baseline(big, "a", "glauber", cfg, 0)) != csv_row(run_baseline(big, "b", "glauber", cfg, 0)));
}

TEST_CASE("ordered appender") {
  const fs::path dir = scratch("append");
  fs::create_directories(dir);
  const fs::path file = dir / "out.csv";
  {
    OrderedAppender app(file.string());
    app.submit(2, "c\n");
    app.submit(1, "b\n");
    CHECK(app.written() == 0);
    app.submit(0, "a\n");
    CHECK(app.written() == 3);
  }
  CHECK(lines_of(file) == std::vector<std::string>{kCsvHeader, "a", "b", "c"});
  {
    OrderedAppender app(file.string());
    std::vector<std::thread> ts;
    for (std::size_t t = 0; t < 4; ++t)
      ts.emplace_back([&app, t] {
        for (std::size_t i = 3 - t; i < 40; i += 4) app.submit(i, std::to_string(i) + "\n");
      });
    for (auto& t : ts) t.join();
    CHECK(app.written() == 40);
  }
  const auto lines = lines_of(file);
  REQUIRE(lines.size() == 44);
  CHECK(lines[0] == kCsvHeader);
  for (std::size_t i = 0; i < 40; ++i) CHECK(lines[4 + i] == std::to_string(i));
  fs::remove_all(dir);
}

TEST_CASE("ablation grid and summaries") {
  AblationGrid g;
  g.schedules = {AlphaSchedule::classic(), AlphaSchedule::geom(1, 1), AlphaSchedule::geom(2, 1)};
  g.grids = {TimeGrid::Uniform, TimeGrid::LogSnr};
  g.allocations = {StepAllocation::identical(), StepAllocation::exp_decay(0.01, 8)};
  g.ks = {256};
  g.sigmas = {5.0};
  const auto cells = g.cells();
  CHECK(cells.size() == 12);
  CHECK(cells.front().label() == "schedule=classic grid=uniform allocation=identical k=256 sigma=5");
  CHECK(cells.back().label() == "schedule=geom21 grid=logsnr allocation=exp k=256 sigma=5");

  std::vector<RunRecord> rows;
  for (double v : {1.0, 2.0, 3.0}) rows.push_back({"i", "glauber", true, 0, v, 0, 10, 0, "h1"});
  rows.push_back({"i", "dmala", true, 0, 4.0, 0, 10, 0, "h1"});
  rows.push_back({"i", "glauber", true, 0, 9.0, 0, 10, 0, "h0"});
  const auto sum = summarize(rows, {{"h1", "cell one"}});
  REQUIRE(sum.size() == 3);
  CHECK(sum[0].label == "cell one");
  CHECK(sum[0].count == 3);
  CHECK(sum[0].mean == 2.0);
  CHECK(sum[0].stddev == doctest::Approx(1.0));
  CHECK(sum[1].sampler == "dmala");
  CHECK(sum[1].stddev == 0.0);
  CHECK(sum[2].label == "h0");
}

TEST_CASE("complexity measurement runs on small sizes") {
  ComplexityOptions o;
  o.sizes = {64, 128};
  o.k = 16;
  o.repeats = 1;
  o.ratio_size = 64;
  o.budget = 400;
  const ComplexityReport r = measure_complexity(o);
  CHECK(r.sizes == std::vector<Index>{64, 128});
  CHECK(r.overhead_seconds.size() == 2);
  for (double s : r.overhead_seconds) CHECK(s > 0.0);
  CHECK(r.doubling_ratio > 0.0);
  CHECK(r.runtime_ratio > 0.0);
}
