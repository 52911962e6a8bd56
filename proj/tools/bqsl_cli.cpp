// bqsl: instance generation, paired benchmark runs, theory verification, ablations.

#include "bqsl/bench.hpp"
#include "bqsl/log.hpp"
#include "bqsl/numeric.hpp"
#include "bqsl/parallel.hpp"
#include "bqsl/theory.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace bqsl;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  if (out.empty()) throw ConfigError("empty list '" + s + "'");
  return out;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

struct Loaded {
  ManifestEntry entry;
  QuboInstance inst;
};

std::vector<Loaded> load_manifest(const std::string& path) {
  const auto entries = read_manifest(path);
  const std::string dir = fs::path(path).parent_path().string();
  std::vector<Loaded> out;
  for (const auto& e : entries) out.push_back({e, load_instance(e, dir)});
  if (out.empty()) throw ConfigError("manifest " + path + " lists no instances");
  return out;
}

BenchConfig base_config(const std::string& path, const std::vector<std::string>& overrides) {
  BenchConfig cfg = path.empty() ? BenchConfig{} : load_config(path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

void write_sidecar(const std::string& csv_path, const std::vector<BenchConfig>& configs,
                   const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json j = extra;
  j["configs"] = nlohmann::ordered_json::array();
  for (const auto& c : configs) {
    nlohmann::ordered_json cj;
    cj["hash"] = c.hash();
    std::istringstream lines(c.canonical());
    std::string line;
    nlohmann::ordered_json knobs;
    while (std::getline(lines, line)) {
      const auto eq = line.find(" = ");
      knobs[line.substr(0, eq)] = line.substr(eq + 3);
    }
    cj["knobs"] = knobs;
    j["configs"].push_back(cj);
  }
  write_text_file(csv_path + ".json", j.dump(2) + "\n");
}

// --- gen ------------------------------------------------------------------------

struct GenArgs {
  std::string kind = "er";
  Index n = 100;
  double p = 0.1;
  Index m = 4;
  std::size_t count = 1;
  std::uint64_t seed = 0;
  std::string problem;
  std::string out = "instances";
  double lambda = 1.0001;
  double beta_start = 0.1;
  double beta_end = 5.0;
};

int cmd_gen(const GenArgs& a) {
  const ProblemKind problem = parse_problem(a.problem.empty() ? (a.kind == "ba" ? "maxcut" : "mis") : a.problem);
  fs::create_directories(a.out);
  std::ostringstream manifest;
  for (std::size_t i = 0; i < a.count; ++i) {
    const std::uint64_t s = a.seed * 1000003ULL + i;
    Graph g = a.kind == "er" ? gen_er(a.n, a.p, s) : gen_ba(a.n, a.m, s);
    std::ostringstream name;
    name << a.kind << "_n" << a.n << "_s" << a.seed << "_" << std::setw(3) << std::setfill('0') << i;
    const std::string file = name.str() + ".graph";
    std::ostringstream body;
    write_graph(body, g);
    write_text_file(fs::path(a.out) / file, body.str());
    ManifestEntry e;
    e.id = name.str();
    e.kind = problem;
    e.graph_path = file;
    e.lambda = a.lambda;
    e.beta.start = a.beta_start;
    e.beta.end = a.beta_end;
    e.seed = s;
    write_manifest_entry(manifest, e);
  }
  write_text_file(fs::path(a.out) / "manifest.jsonl", manifest.str());
  std::cout << "wrote " << a.count << " graphs and " << (fs::path(a.out) / "manifest.jsonl").string() << "\n";
  return 0;
}

// --- run ------------------------------------------------------------------------

struct RunArgs {
  std::string manifest;
  std::string samplers = "gradient-mh";
  std::string sl = "both";
  std::uint64_t steps = 0;
  std::string seeds = "0..19";
  std::string config;
  std::vector<std::string> overrides;
  std::string out = "results.csv";
  bool timing = false;
  bool overwrite = false;
};

int cmd_run(const RunArgs& a) {
  BenchConfig cfg = base_config(a.config, a.overrides);
  if (a.steps) cfg.sl.total_mcmc = a.steps;
  cfg.timing = a.timing;
  cfg.validate();
  if (a.sl != "on" && a.sl != "off" && a.sl != "both") throw ConfigError("--sl must be on, off or both");
  const auto instances = load_manifest(a.manifest);
  const auto samplers = split_list(a.samplers);
  for (const auto& s : samplers) SamplerKind::parse(s);
  const auto seeds = parse_seed_list(a.seeds);

  std::vector<RunJob> jobs;
  for (std::size_t i = 0; i < instances.size(); ++i)
    for (const auto& s : samplers)
      for (auto seed : seeds) jobs.push_back({i, s, seed});

  if (a.overwrite) fs::remove(a.out);
  OrderedAppender out(a.out);
  parallel_for(jobs.size(), [&](std::size_t j) {
    const RunJob& job = jobs[j];
    const Loaded& L = instances[job.instance];
    std::string block;
    if (a.sl == "both") {
      auto [base, sl] = run_pair(L.inst, L.entry.id, job.sampler, cfg, job.seed);
      block = csv_row(base) + "\n" + csv_row(sl) + "\n";
    } else if (a.sl == "off") {
      block = csv_row(run_baseline(L.inst, L.entry.id, job.sampler, cfg, job.seed)) + "\n";
    } else {
      block = csv_row(run_sl(L.inst, L.entry.id, job.sampler, cfg, job.seed)) + "\n";
    }
    out.submit(j, std::move(block));
  });

  nlohmann::ordered_json extra = {{"command", "run"}, {"manifest", a.manifest}, {"samplers", samplers},
                                  {"sl", a.sl}, {"seeds", seeds}};
  write_sidecar(a.out, {cfg}, extra);
  std::cout << "wrote " << jobs.size() * (a.sl == "both" ? 2 : 1) << " rows to " << a.out << "\n";
  return 0;
}

// --- verify ---------------------------------------------------------------------

struct VerifyArgs {
  std::size_t models = 50;
  Index max_n = 8;
  std::uint64_t seed = 0;
  std::string report;
  std::string model;
  bool no_poincare = false, no_dobrushin = false, no_tails = false, no_decay = false;
};

int cmd_verify(const VerifyArgs& a) {
  std::unique_ptr<std::ofstream> report;
  if (!a.report.empty()) {
    report = std::make_unique<std::ofstream>(a.report, std::ios::trunc);
    if (!*report) throw std::runtime_error("cannot write " + a.report);
  }
  std::vector<std::string> offending;
  std::size_t violations = 0;

  if (!a.model.empty()) {
    const BqdModel model = load_model(a.model);
    for (const auto& kind : suite_kinds()) {
      const PoincareReport p = verify_poincare(model, kind);
      const DobrushinReport d = verify_dobrushin_chain(model, kind);
      if (report) {
        write_record(*report, p);
        write_record(*report, d);
      }
      std::cout << kind.name() << ": poincare " << to_string(p.verdict) << ", dobrushin "
                << to_string(d.verdict) << "\n";
      violations += (p.verdict == Verdict::Fail) + (d.verdict == Verdict::Fail);
    }
    if (violations) offending.push_back(hex64(model.hash()));
  } else {
    SuiteOptions o;
    o.models = a.models;
    o.max_n = a.max_n;
    o.seed = a.seed;
    o.poincare = !a.no_poincare;
    o.dobrushin = !a.no_dobrushin;
    o.tails = !a.no_tails;
    o.decay = !a.no_decay;
    const SuiteResult r = run_verify_suite(o, report.get());
    auto count = [](const auto& v, Verdict want) {
      return std::count_if(v.begin(), v.end(), [&](const auto& x) { return x.verdict == want; });
    };
    std::cout << "poincare:  " << count(r.poincare, Verdict::Pass) << " pass, "
              << count(r.poincare, Verdict::Fail) << " fail, " << count(r.poincare, Verdict::Inapplicable)
              << " inapplicable\n";
    std::cout << "dobrushin: " << count(r.dobrushin, Verdict::Pass) << " pass, "
              << count(r.dobrushin, Verdict::Fail) << " fail, "
              << count(r.dobrushin, Verdict::Inapplicable) << " inapplicable\n";
    if (o.tails) std::cout << "tails:     " << r.tail_points - r.tail_failures << "/" << r.tail_points << " pass\n";
    if (o.decay) {
      std::cout << "decay:     slopes";
      for (double s : r.decay_slopes) std::cout << ' ' << std::setprecision(4) << s;
      std::cout << " (" << r.decay_failures << " outside [-0.7, -0.3])\n";
    }
    violations = r.violations();
    offending = r.offending_models();
  }
  if (violations == 0) {
    std::cout << "verify: ok\n";
    return 0;
  }
  std::cout << "verify: " << violations << " violation(s)\n";
  for (const auto& h : offending) std::cout << "offending model " << h << "\n";
  return 1;
}

// --- ablate ---------------------------------------------------------------------

struct AblateArgs {
  std::string manifest;
  std::string schedules = "classic,geom11,geom21";
  std::string grids = "uniform,logsnr";
  std::string allocations = "identical,exp";
  std::string ks = "256";
  std::string sigmas = "5";
  std::string samplers = "gradient-mh";
  std::string seeds = "0..3";
  std::uint64_t steps = 0;
  std::string config;
  std::vector<std::string> overrides;
  std::string out = "ablation.csv";
  std::string summary;
  bool overwrite = false;
};

int cmd_ablate(const AblateArgs& a) {
  BenchConfig base = base_config(a.config, a.overrides);
  if (a.steps) base.sl.total_mcmc = a.steps;
  AblationGrid grid;
  for (const auto& s : split_list(a.schedules)) grid.schedules.push_back(AlphaSchedule::parse(s));
  for (const auto& g : split_list(a.grids)) {
    if (g == "uniform") grid.grids.push_back(TimeGrid::Uniform);
    else if (g == "logsnr") grid.grids.push_back(TimeGrid::LogSnr);
    else throw ConfigError("unknown grid '" + g + "'");
  }
  for (const auto& al : split_list(a.allocations)) {
    if (al == "identical") grid.allocations.push_back(StepAllocation::identical());
    else if (al == "exp")
      grid.allocations.push_back(StepAllocation::exp_decay(base.sl.allocation.r, base.sl.allocation.n_min));
    else throw ConfigError("unknown allocation '" + al + "'");
  }
  for (const auto& k : split_list(a.ks)) grid.ks.push_back(std::stoull(k));
  for (const auto& s : split_list(a.sigmas)) grid.sigmas.push_back(std::stod(s));
  const auto samplers = split_list(a.samplers);
  for (const auto& s : samplers) SamplerKind::parse(s);
  const auto seeds = parse_seed_list(a.seeds);
  const auto instances = load_manifest(a.manifest);

  std::vector<BenchConfig> configs;
  std::map<std::string, std::string> labels;
  for (const auto& cell : grid.cells()) {
    BenchConfig c = base;
    c.sl.schedule = cell.schedule;
    c.sl.grid = cell.grid;
    c.sl.allocation = cell.allocation;
    c.sl.k = cell.k;
    c.sl.sigma = cell.sigma;
    c.validate();
    labels[c.hash()] = cell.label();
    configs.push_back(c);
  }

  struct Job {
    std::size_t cell, instance;
    std::string sampler;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t c = 0; c < configs.size(); ++c)
    for (std::size_t i = 0; i < instances.size(); ++i)
      for (const auto& s : samplers)
        for (auto seed : seeds) jobs.push_back({c, i, s, seed});

  if (a.overwrite) fs::remove(a.out);
  OrderedAppender out(a.out);
  std::vector<RunRecord> rows(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const Job& job = jobs[j];
    const Loaded& L = instances[job.instance];
    rows[j] = run_sl(L.inst, L.entry.id, job.sampler, configs[job.cell], job.seed);
    if (rows[j].total_mcmc != configs[job.cell].budget())
      throw ProtocolError("ablation cell consumed a different budget");
    out.submit(j, csv_row(rows[j]) + "\n");
  });

  std::ostringstream table;
  table << std::left << std::setw(64) << "cell" << std::setw(22) << "sampler" << std::setw(6) << "runs"
        << "best objective\n";
  for (const auto& s : summarize(rows, labels)) {
    std::ostringstream v;
    v << std::fixed << std::setprecision(3) << s.mean << " +- " << s.stddev;
    table << std::left << std::setw(64) << s.label << std::setw(22) << s.sampler << std::setw(6) << s.count
          << v.str() << "\n";
  }
  if (a.summary.empty()) std::cout << table.str();
  else write_text_file(a.summary, table.str());

  nlohmann::ordered_json extra = {{"command", "ablate"}, {"manifest", a.manifest}, {"samplers", samplers},
                                  {"seeds", seeds}};
  write_sidecar(a.out, configs, extra);
  std::cout << "wrote " << rows.size() << " rows to " << a.out << "\n";
  return 0;
}

// --- complexity -----------------------------------------------------------------

int cmd_complexity(const ComplexityOptions& o, const std::string& out_path) {
  const ComplexityReport r = measure_complexity(o);
  nlohmann::ordered_json j;
  j["sizes"] = r.sizes;
  j["overhead_seconds"] = r.overhead_seconds;
  j["overhead_slope"] = r.overhead_slope;
  j["doubling_ratio"] = r.doubling_ratio;
  j["runtime_ratio"] = r.runtime_ratio;
  j["ratio_size"] = r.ratio_size;
  j["k"] = o.k;
  j["budget"] = o.budget;
  j["sampler"] = o.sampler;
  for (std::size_t i = 0; i < r.sizes.size(); ++i)
    std::cout << "N=" << r.sizes[i] << " overhead " << std::setprecision(4) << r.overhead_seconds[i] * 1e3
              << " ms\n";
  std::cout << "overhead slope " << r.overhead_slope << "\n"
            << "overhead ratio at 2K " << r.doubling_ratio << "\n"
            << "SL/baseline runtime at N=" << r.ratio_size << ": " << r.runtime_ratio << "\n";
  if (!out_path.empty()) write_text_file(out_path, j.dump(2) + "\n");
  return 0;
}

// --- sample ---------------------------------------------------------------------

struct SampleArgs {
  std::string model;
  std::string sampler = "glauber";
  std::string config;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  std::string trace;
};

int cmd_sample(const SampleArgs& a) {
  const BqdModel model = load_model(a.model);
  BenchConfig cfg = base_config(a.config, a.overrides);
  SlConfig sc = cfg.sl;
  sc.record_vectors = !a.trace.empty();
  CounterRng rng(a.seed, 0x5a);
  const SlResult r = sl_run(model, bench_sampler(a.sampler, cfg), sc, rng);
  const Spins& x = r.sample.spins();
  for (Index i = 0; i < x.size(); ++i) std::cout << (i ? " " : "") << x[i];
  std::cout << "\n";
  if (!a.trace.empty()) {
    std::ofstream out(a.trace, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + a.trace);
    write_trace(out, r.trace);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bqsl: stochastic localization samplers for binary quadratic distributions"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "generate seeded graph instances and a manifest");
  g->add_option("--kind", gen.kind, "er or ba")->check(CLI::IsMember({"er", "ba"}));
  g->add_option("--n", gen.n, "vertices")->check(CLI::PositiveNumber);
  g->add_option("--p", gen.p, "edge probability (er)")->check(CLI::Range(0.0, 1.0));
  g->add_option("--m", gen.m, "attachments per vertex (ba)")->check(CLI::PositiveNumber);
  g->add_option("--count", gen.count, "number of instances");
  g->add_option("--seed", gen.seed);
  g->add_option("--problem", gen.problem, "mis, maxcut or maxclique");
  g->add_option("--out", gen.out, "output directory");
  g->add_option("--lambda", gen.lambda, "penalty weight");
  g->add_option("--beta-start", gen.beta_start);
  g->add_option("--beta-end", gen.beta_end);

  RunArgs run;
  auto* r = app.add_subcommand("run", "paired baseline and SL runs over a manifest");
  r->add_option("--manifest", run.manifest)->required();
  r->add_option("--samplers", run.samplers, "comma list");
  r->add_option("--sl", run.sl, "on, off or both")->check(CLI::IsMember({"on", "off", "both"}));
  r->add_option("--steps", run.steps, "MCMC budget per run");
  r->add_option("--seeds", run.seeds, "e.g. 0..19 or 1,4,9");
  r->add_option("--config", run.config, "key = value file");
  r->add_option("--set", run.overrides, "key=value override")->take_all();
  r->add_option("--out", run.out, "CSV path; a .json sidecar is written next to it");
  r->add_flag("--timing", run.timing, "fill wallclock_ms");
  r->add_flag("--overwrite", run.overwrite, "remove the CSV before appending");

  VerifyArgs ver;
  auto* v = app.add_subcommand("verify", "theory verification suite");
  v->add_option("--models", ver.models);
  v->add_option("--max-n", ver.max_n)->check(CLI::Range(4, 16));
  v->add_option("--seed", ver.seed);
  v->add_option("--report", ver.report, "JSON lines output");
  v->add_option("--model", ver.model, "verify one model file instead of the suite");
  v->add_flag("--no-poincare", ver.no_poincare);
  v->add_flag("--no-dobrushin", ver.no_dobrushin);
  v->add_flag("--no-tails", ver.no_tails);
  v->add_flag("--no-decay", ver.no_decay);

  AblateArgs abl;
  auto* ab = app.add_subcommand("ablate", "SL schedule, grid and allocation sweep");
  ab->add_option("--manifest", abl.manifest)->required();
  ab->add_option("--schedules", abl.schedules);
  ab->add_option("--grids", abl.grids);
  ab->add_option("--allocations", abl.allocations);
  ab->add_option("--ks", abl.ks);
  ab->add_option("--sigmas", abl.sigmas);
  ab->add_option("--samplers", abl.samplers);
  ab->add_option("--seeds", abl.seeds);
  ab->add_option("--steps", abl.steps);
  ab->add_option("--config", abl.config);
  ab->add_option("--set", abl.overrides)->take_all();
  ab->add_option("--out", abl.out);
  ab->add_option("--summary", abl.summary, "write the per-cell table here instead of stdout");
  ab->add_flag("--overwrite", abl.overwrite);

  ComplexityOptions cx;
  std::string cx_out;
  auto* c = app.add_subcommand("complexity", "SL overhead scaling");
  c->add_option("--sizes", cx.sizes)->delimiter(',');
  c->add_option("--k", cx.k);
  c->add_option("--repeats", cx.repeats);
  c->add_option("--ratio-size", cx.ratio_size);
  c->add_option("--steps", cx.budget);
  c->add_option("--sampler", cx.sampler);
  c->add_option("--seed", cx.seed);
  c->add_option("--out", cx_out, "JSON report");

  SampleArgs smp;
  auto* s = app.add_subcommand("sample", "draw one SL sample from a model file");
  s->add_option("--model", smp.model)->required();
  s->add_option("--sampler", smp.sampler);
  s->add_option("--config", smp.config);
  s->add_option("--set", smp.overrides)->take_all();
  s->add_option("--seed", smp.seed);
  s->add_option("--trace", smp.trace, "JSON lines trace output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) return cmd_gen(gen);
    if (*r) return cmd_run(run);
    if (*v) return cmd_verify(ver);
    if (*ab) return cmd_ablate(abl);
    if (*c) return cmd_complexity(cx, cx_out);
    if (*s) return cmd_sample(smp);
  } catch (const ParseError& e) {
    std::cerr << "bqsl: parse error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "bqsl: error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
