#include "bqsl/qubo.hpp"
#include "bqsl/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace bqsl {

std::vector<std::vector<Index>> Graph::adjacency() const {
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(n));
  for (const Edge& e : edges) {
    adj[static_cast<std::size_t>(e.u)].push_back(e.v);
    adj[static_cast<std::size_t>(e.v)].push_back(e.u);
  }
  return adj;
}

void Graph::validate() const {
  if (n < 1) throw ConfigError("graph needs at least one vertex");
  std::set<std::pair<Index, Index>> seen;
  for (const Edge& e : edges) {
    if (e.u < 0 || e.v >= n || e.u >= e.v) throw ConfigError("edges need 0 <= u < v < n");
    if (!seen.emplace(e.u, e.v).second) throw ConfigError("duplicate edge");
    if (!std::isfinite(e.w)) throw ConfigError("edge weight must be finite");
  }
}

Graph gen_er(Index n, double p, std::uint64_t seed) {
  if (n < 1) throw ConfigError("ER graph needs n >= 1");
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("ER edge probability must lie in (0, 1)");
  CounterRng rng(seed, 0xe4);
  Graph g;
  g.n = n;
  for (Index u = 0; u < n; ++u)
    for (Index v = u + 1; v < n; ++v)
      if (rng.uniform() < p) g.edges.push_back({u, v, 1.0});
  std::ostringstream tag;
  tag << "er-" << n << '-' << p << "-s" << seed;
  g.tag = tag.str();
  return g;
}

Graph gen_ba(Index n, Index m, std::uint64_t seed) {
  if (!(m >= 1 && m < n)) throw ConfigError("BA graph needs 1 <= m < n");
  CounterRng rng(seed, 0xba);
  Graph g;
  g.n = n;
  // Each endpoint appears once per incident edge, so a uniform pick is degree-proportional.
  std::vector<Index> endpoints;
  for (Index u = 0; u < m; ++u)
    for (Index v = u + 1; v < m; ++v) {
      g.edges.push_back({u, v, 1.0});
      endpoints.push_back(u);
      endpoints.push_back(v);
    }
  std::vector<Index> targets;
  for (Index v = m; v < n; ++v) {
    targets.clear();
    while (static_cast<Index>(targets.size()) < m) {
      const Index t = endpoints.empty()
                          ? rng.index(v)
                          : endpoints[static_cast<std::size_t>(rng.index(static_cast<Index>(endpoints.size())))];
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
    }
    std::sort(targets.begin(), targets.end());
    for (Index t : targets) {
      g.edges.push_back({t, v, 1.0});
      endpoints.push_back(t);
      endpoints.push_back(v);
    }
  }
  std::sort(g.edges.begin(), g.edges.end(),
            [](const Edge& a, const Edge& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
  g.tag = "ba-" + std::to_string(n) + "-" + std::to_string(m) + "-s" + std::to_string(seed);
  return g;
}

void write_graph(std::ostream& out, const Graph& g) {
  const auto old = out.precision(17);
  out << g.n << ' ' << g.edges.size() << '\n';
  for (const Edge& e : g.edges) {
    out << e.u << ' ' << e.v;
    if (e.w != 1.0) out << ' ' << e.w;
    out << '\n';
  }
  out.precision(old);
}

namespace {

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_token(std::string_view tok, T& v) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

}  // namespace

Graph read_graph(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };
  if (!next()) throw ParseError(source, line_no + 1, "missing header 'N M'");
  auto tok = tokens(line);
  long long n = 0, m = 0;
  if (tok.size() != 2 || !parse_token(tok[0], n) || !parse_token(tok[1], m) || n < 1 || m < 0)
    throw ParseError(source, line_no, "header must be 'N M' with N >= 1, M >= 0");
  Graph g;
  g.n = n;
  std::set<std::pair<Index, Index>> seen;
  for (long long k = 0; k < m; ++k) {
    if (!next()) throw ParseError(source, line_no + 1, "expected " + std::to_string(m) + " edges, got " + std::to_string(k));
    tok = tokens(line);
    long long u = 0, v = 0;
    double w = 1.0;
    if (tok.size() < 2 || tok.size() > 3 || !parse_token(tok[0], u) || !parse_token(tok[1], v) ||
        (tok.size() == 3 && !parse_token(tok[2], w)))
      throw ParseError(source, line_no, "edge line must be 'u v [w]'");
    if (u < 0 || v < 0 || u >= n || v >= n) throw ParseError(source, line_no, "vertex out of range");
    if (u == v) throw ParseError(source, line_no, "self-loop");
    if (u > v) std::swap(u, v);
    if (!seen.emplace(u, v).second) throw ParseError(source, line_no, "duplicate edge");
    g.edges.push_back({static_cast<Index>(u), static_cast<Index>(v), w});
  }
  if (next()) throw ParseError(source, line_no, "trailing content after " + std::to_string(m) + " edges");
  g.tag = source;
  return g;
}

Graph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open graph file " + path);
  return read_graph(in, path);
}

std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::Mis: return "mis";
    case ProblemKind::MaxCut: return "maxcut";
    case ProblemKind::MaxClique: return "maxclique";
  }
  return "unknown";
}

ProblemKind parse_problem(const std::string& name) {
  if (name == "mis") return ProblemKind::Mis;
  if (name == "maxcut") return ProblemKind::MaxCut;
  if (name == "maxclique") return ProblemKind::MaxClique;
  throw ConfigError("unknown problem kind '" + name + "'");
}

double beta_ramp(const BetaSchedule& s, std::uint64_t step, std::uint64_t total) {
  if (step > total) throw RangeError("ramp step past the end");
  const double f = total == 0 ? 1.0 : double(step) / double(total);
  if (s.ramp == BetaSchedule::Ramp::Linear) return s.start + (s.end - s.start) * f;
  if (!(s.start > 0.0) || !(s.end > 0.0)) throw ConfigError("geometric ramp needs positive endpoints");
  return s.start * std::pow(s.end / s.start, f);
}

void QuboInstance::validate() const {
  graph.validate();
  if (kind != ProblemKind::MaxCut && !(lambda > 1.0))
    throw ConfigError("penalty lambda must exceed 1 for MIS and MaxClique");
  if (!(c > 0.0)) throw ConfigError("reward c must be > 0");
}

CompiledQubo CompiledQubo::at_beta(double beta) const {
  CompiledQubo out = *this;
  out.model = model.with_beta_field(beta, -beta * g);
  out.constant = -beta * energy_constant;
  return out;
}

CompiledQubo compile_to_bqd(const QuboInstance& inst, double beta) {
  inst.validate();
  const Index n = inst.graph.n;
  std::vector<Pair> pairs;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  double konst = 0.0;
  if (inst.kind == ProblemKind::MaxCut) {
    // -cut = sum_E w (x_u x_v - 1) / 2
    for (const Edge& e : inst.graph.edges) {
      pairs.emplace_back(e.u, e.v, 0.5 * e.w);
      konst -= 0.5 * e.w;
    }
  } else {
    // -c sum y + lambda sum_{penalized pairs} y_u y_v with y_u y_v = (1 + x_u + x_v + x_u x_v) / 4
    std::vector<std::pair<Index, Index>> penalized;
    if (inst.kind == ProblemKind::Mis) {
      for (const Edge& e : inst.graph.edges) penalized.emplace_back(e.u, e.v);
    } else {
      std::vector<char> adj(static_cast<std::size_t>(n * n), 0);
      for (const Edge& e : inst.graph.edges) adj[static_cast<std::size_t>(e.u * n + e.v)] = 1;
      for (Index u = 0; u < n; ++u)
        for (Index v = u + 1; v < n; ++v)
          if (!adj[static_cast<std::size_t>(u * n + v)]) penalized.emplace_back(u, v);
    }
    const double q = 0.25 * inst.lambda;
    g.setConstant(-0.5 * inst.c);
    konst = -0.5 * inst.c * double(n);
    for (auto [u, v] : penalized) {
      pairs.emplace_back(u, v, q);
      g[u] += q;
      g[v] += q;
      konst += q;
    }
  }
  BqdModel model = BqdModel::from_pairs(n, pairs, -beta * g, beta);
  return CompiledQubo{std::move(model), std::move(g), konst, -beta * konst};
}

double objective_value(const QuboInstance& inst, const Spins& spins) {
  if (spins.size() != inst.graph.n) throw ConfigError("state size differs from graph size");
  if (inst.kind == ProblemKind::MaxCut) {
    double cut = 0.0;
    for (const Edge& e : inst.graph.edges)
      if (spins[e.u] != spins[e.v]) cut += e.w;
    return cut;
  }
  return inst.c * double((spins.array() > 0).count());
}

bool is_feasible(const QuboInstance& inst, const Spins& spins) {
  if (spins.size() != inst.graph.n) throw ConfigError("state size differs from graph size");
  if (inst.kind == ProblemKind::MaxCut) return true;
  if (inst.kind == ProblemKind::Mis) {
    for (const Edge& e : inst.graph.edges)
      if (spins[e.u] > 0 && spins[e.v] > 0) return false;
    return true;
  }
  const auto adj = inst.graph.adjacency();
  std::vector<Index> chosen;
  for (Index i = 0; i < spins.size(); ++i)
    if (spins[i] > 0) chosen.push_back(i);
  for (Index u : chosen) {
    const auto& nb = adj[static_cast<std::size_t>(u)];
    for (Index v : chosen)
      if (v != u && std::find(nb.begin(), nb.end(), v) == nb.end()) return false;
  }
  return true;
}

Repairer::Repairer(const QuboInstance& instance)
    : inst_(instance), adj_(instance.graph.adjacency()),
      conflicts_(static_cast<std::size_t>(instance.graph.n)) {
  if (inst_.kind == ProblemKind::MaxClique) {
    const Index n = inst_.graph.n;
    dense_.assign(static_cast<std::size_t>(n * n), 0);
    for (const Edge& e : inst_.graph.edges) {
      dense_[static_cast<std::size_t>(e.u * n + e.v)] = 1;
      dense_[static_cast<std::size_t>(e.v * n + e.u)] = 1;
    }
  }
}

Spins Repairer::operator()(const Spins& spins) {
  const Index n = inst_.graph.n;
  if (spins.size() != n) throw ConfigError("state size differs from graph size");
  Spins out = spins;
  if (inst_.kind == ProblemKind::MaxCut) return out;
  auto selected = [&](Index v) { return out[v] > 0; };
  const bool clique = inst_.kind == ProblemKind::MaxClique;
  auto conflict = [&](Index u, Index v) {
    return clique ? !dense_[static_cast<std::size_t>(u * n + v)] : true;
  };

  // conflicts_[v]: selected vertices in conflict with selected v
  Index chosen = 0;
  for (Index v = 0; v < n; ++v) chosen += selected(v);
  for (Index v = 0; v < n; ++v) {
    int c = 0;
    if (selected(v)) {
      if (clique) {
        int nb = 0;
        for (Index u : adj_[static_cast<std::size_t>(v)]) nb += selected(u);
        c = static_cast<int>(chosen - 1) - nb;
      } else {
        for (Index u : adj_[static_cast<std::size_t>(v)]) c += selected(u);
      }
    }
    conflicts_[static_cast<std::size_t>(v)] = c;
  }
  for (;;) {
    Index worst = -1;
    int most = 0;
    for (Index v = 0; v < n; ++v)
      if (selected(v) && conflicts_[static_cast<std::size_t>(v)] >= most &&
          conflicts_[static_cast<std::size_t>(v)] > 0) {
        worst = v;
        most = conflicts_[static_cast<std::size_t>(v)];
      }
    if (worst < 0) break;
    out[worst] = -1;
    conflicts_[static_cast<std::size_t>(worst)] = 0;
    if (clique) {
      for (Index u = 0; u < n; ++u)
        if (u != worst && selected(u) && conflict(u, worst)) --conflicts_[static_cast<std::size_t>(u)];
    } else {
      for (Index u : adj_[static_cast<std::size_t>(worst)])
        if (selected(u)) --conflicts_[static_cast<std::size_t>(u)];
    }
  }
  for (Index v = 0; v < n; ++v) {
    if (selected(v)) continue;
    bool ok = true;
    if (clique) {
      for (Index u = 0; u < n && ok; ++u)
        if (u != v && selected(u) && conflict(u, v)) ok = false;
    } else {
      for (Index u : adj_[static_cast<std::size_t>(v)])
        if (selected(u)) {
          ok = false;
          break;
        }
    }
    if (ok) out[v] = 1;
  }
  return out;
}

double Repairer::repaired_objective(const Spins& spins) { return objective_value(inst_, (*this)(spins)); }

Spins repair(const QuboInstance& instance, const Spins& spins) { return Repairer(instance)(spins); }

namespace {

std::string ramp_name(BetaSchedule::Ramp r) { return r == BetaSchedule::Ramp::Linear ? "linear" : "geometric"; }

BetaSchedule::Ramp parse_ramp(const std::string& s) {
  if (s == "linear") return BetaSchedule::Ramp::Linear;
  if (s == "geometric") return BetaSchedule::Ramp::Geometric;
  throw ConfigError("unknown ramp '" + s + "'");
}

}  // namespace

void write_manifest_entry(std::ostream& out, const ManifestEntry& e) {
  nlohmann::ordered_json rec;
  rec["id"] = e.id;
  rec["kind"] = to_string(e.kind);
  rec["graph"] = e.graph_path;
  rec["lambda"] = e.lambda;
  rec["c"] = e.c;
  rec["beta_start"] = e.beta.start;
  rec["beta_end"] = e.beta.end;
  rec["ramp"] = ramp_name(e.beta.ramp);
  rec["seed"] = e.seed;
  out << rec.dump() << '\n';
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      ManifestEntry e;
      e.id = rec.at("id").get<std::string>();
      e.kind = parse_problem(rec.at("kind").get<std::string>());
      e.graph_path = rec.at("graph").get<std::string>();
      e.lambda = rec.value("lambda", 1.0001);
      e.c = rec.value("c", 1.0);
      e.beta.start = rec.value("beta_start", 0.1);
      e.beta.end = rec.value("beta_end", 5.0);
      e.beta.ramp = parse_ramp(rec.value("ramp", std::string("linear")));
      e.seed = rec.value("seed", std::uint64_t{0});
      out.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw ParseError(path, line_no, ex.what());
    }
  }
  return out;
}

QuboInstance load_instance(const ManifestEntry& e, const std::string& manifest_dir) {
  std::filesystem::path p(e.graph_path);
  if (p.is_relative() && !manifest_dir.empty()) p = std::filesystem::path(manifest_dir) / p;
  QuboInstance inst;
  inst.graph = load_graph(p.string());
  inst.graph.tag = e.id;
  inst.kind = e.kind;
  inst.lambda = e.lambda;
  inst.c = e.c;
  inst.beta = e.beta;
  inst.validate();
  return inst;
}

}  // namespace bqsl
