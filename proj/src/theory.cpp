#include "bqsl/theory.hpp"
#include "bqsl/numeric.hpp"
#include "bqsl/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <queue>

namespace bqsl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t state_count(Index n) { return std::size_t{1} << n; }

int spin_at(std::uint64_t s, Index i) { return (s >> i) & 1U ? 1 : -1; }

// Dense couplings plus per-state local sums (W x)_i, enumerated once.
struct Enumeration {
  Index n;
  std::size_t m;
  Eigen::MatrixXd w;
  Eigen::MatrixXd local;  // m x n
  Eigen::VectorXd ell;    // unnormalized log density

  explicit Enumeration(const BqdModel& model)
      : n(model.n()), m(state_count(model.n())), w(model.dense_couplings()), local(m, n), ell(m) {
    const Eigen::VectorXd& b = model.field();
    Eigen::VectorXd x(n);
    for (std::size_t s = 0; s < m; ++s) {
      for (Index i = 0; i < n; ++i) x[i] = spin_at(s, i);
      local.row(static_cast<Index>(s)) = (w * x).transpose();
      ell[static_cast<Index>(s)] =
          -0.5 * model.beta() * x.dot(local.row(static_cast<Index>(s)).transpose()) + x.dot(b);
    }
  }

  // l(x^i) - l(x)
  double delta(const BqdModel& model, std::size_t s, Index i) const {
    return 2.0 * spin_at(s, i) * (model.beta() * local(static_cast<Index>(s), i) - model.field()[i]);
  }

  double up_probability(const BqdModel& model, std::size_t s, Index i) const {
    return sigmoid(2.0 * (model.field()[i] - model.beta() * local(static_cast<Index>(s), i)));
  }
};

void require_sites(const BqdModel& model, Index limit, const char* what) {
  if (model.n() > limit)
    throw CapacityError(std::string(what) + " supports at most " + std::to_string(limit) +
                        " sites, got " + std::to_string(model.n()));
}

double cosh_sum(double h, double scale) { return std::exp(scale * h) + std::exp(-scale * h); }

}  // namespace

Spins ExactEnsemble::spins_of(std::uint64_t state, Index n) {
  Spins s(n);
  for (Index i = 0; i < n; ++i) s[i] = spin_at(state, i);
  return s;
}

std::uint64_t ExactEnsemble::index_of(const Spins& spins) {
  std::uint64_t s = 0;
  for (Index i = 0; i < spins.size(); ++i)
    if (spins[i] > 0) s |= std::uint64_t{1} << i;
  return s;
}

Eigen::VectorXd ExactEnsemble::mean() const {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
  for (std::size_t s = 0; s < size(); ++s)
    for (Index i = 0; i < n; ++i) mu[i] += spin_at(s, i) * probs[static_cast<Index>(s)];
  return mu;
}

ExactEnsemble exact_distribution(const BqdModel& model) {
  require_sites(model, kMaxEnumerationSites, "exact enumeration");
  const Enumeration e(model);
  ExactEnsemble ens;
  ens.n = model.n();
  ens.log_z = log_sum_exp(e.ell);
  ens.log_probs = e.ell.array() - ens.log_z;
  ens.probs = ens.log_probs.array().exp();
  return ens;
}

ExactKernel exact_kernel(const BqdModel& model, const SamplerKind& kind) {
  require_sites(model, kMaxKernelSites, "exact kernels");
  kind.validate();
  const Enumeration e(model);
  const Index n = e.n;
  const auto m = static_cast<Index>(e.m);
  ExactKernel k{Eigen::MatrixXd::Zero(m, m), kind, true};
  auto& p = k.p;
  const double inv_n = 1.0 / double(n);

  auto single_site = [&](auto&& rate) {
    for (Index s = 0; s < m; ++s) {
      double out = 0.0;
      for (Index i = 0; i < n; ++i) {
        const Index t = s ^ (Index{1} << i);
        const double q = inv_n * rate(static_cast<std::size_t>(s), i);
        p(s, t) = q;
        out += q;
      }
      p(s, s) = std::max(0.0, 1.0 - out);
    }
  };

  switch (kind.tag) {
    case SamplerTag::Glauber:
      single_site([&](std::size_t s, Index i) {
        const double up = e.up_probability(model, s, i);
        return spin_at(s, i) > 0 ? 1.0 - up : up;
      });
      break;
    case SamplerTag::Metropolis:
      single_site([&](std::size_t s, Index i) { return metropolis_acceptance(e.delta(model, s, i)); });
      break;
    case SamplerTag::GradientMH:
      if (kind.site_selection == SiteSelection::UniformSite) {
        single_site([&](std::size_t s, Index i) {
          return uniform_gradient_move_probability(e.delta(model, s, i));
        });
      } else {
        Eigen::VectorXd log_z(m);
        Eigen::MatrixXd logits(m, n);
        for (Index s = 0; s < m; ++s) {
          for (Index i = 0; i < n; ++i) logits(s, i) = 0.5 * e.delta(model, static_cast<std::size_t>(s), i);
          log_z[s] = log_sum_exp(logits.row(s));
        }
        for (Index s = 0; s < m; ++s) {
          double out = 0.0;
          for (Index i = 0; i < n; ++i) {
            const Index t = s ^ (Index{1} << i);
            const double q = std::exp(logits(s, i) - log_z[s]) * std::exp(std::min(0.0, log_z[s] - log_z[t]));
            p(s, t) = q;
            out += q;
          }
          p(s, s) = std::max(0.0, 1.0 - out);
        }
      }
      break;
    case SamplerTag::Dula:
    case SamplerTag::Dmala: {
      k.single_site = false;
      Eigen::VectorXd law(m);
      for (Index s = 0; s < m; ++s) {
        // Doubling build of prod_i (bit i of mask ? p_i : 1 - p_i) over all masks.
        law[0] = 1.0;
        for (Index i = 0; i < n; ++i) {
          const double f = dula_flip_probability(e.delta(model, static_cast<std::size_t>(s), i), kind.step_size);
          const Index half = Index{1} << i;
          for (Index mask = 0; mask < half; ++mask) {
            law[mask + half] = law[mask] * f;
            law[mask] *= 1.0 - f;
          }
        }
        for (Index mask = 0; mask < m; ++mask) p(s, s ^ mask) = law[mask];
      }
      if (kind.tag == SamplerTag::Dmala) {
        const Eigen::MatrixXd q = p;
        for (Index s = 0; s < m; ++s) {
          double out = 0.0;
          for (Index t = 0; t < m; ++t) {
            if (t == s) continue;
            const double reverse = std::exp(e.ell[t] - e.ell[s]) * q(t, s);
            p(s, t) = std::min(q(s, t), reverse);
            out += p(s, t);
          }
          p(s, s) = std::max(0.0, 1.0 - out);
        }
      }
      break;
    }
  }
  return k;
}

double variance(const ExactEnsemble& ens, const Eigen::VectorXd& f) {
  const double mean = ens.probs.dot(f);
  return ens.probs.dot((f.array() - mean).square().matrix());
}

double dirichlet_form(const ExactKernel& kernel, const ExactEnsemble& ens, const Eigen::VectorXd& f) {
  const Index m = kernel.p.rows();
  double e = 0.0;
  for (Index x = 0; x < m; ++x) {
    double row = 0.0;
    for (Index y = 0; y < m; ++y) {
      const double d = f[x] - f[y];
      row += kernel.p(x, y) * d * d;
    }
    e += ens.probs[x] * row;
  }
  return 0.5 * e;
}

double poincare_constant(const ExactKernel& kernel, const ExactEnsemble& ens) {
  const Index m = kernel.p.rows();
  if (m != ens.probs.size() || kernel.p.cols() != m) throw ConfigError("kernel and ensemble sizes differ");
  if (m < 2) return 0.0;
  if (!(ens.probs.minCoeff() > 0.0)) throw ConfigError("Poincare constant needs nu > 0 everywhere");

  // kappa_xy = (nu_x P_xy + nu_y P_yx) / 2 reproduces the Dirichlet form of P exactly.
  const Eigen::MatrixXd flow = ens.probs.asDiagonal() * kernel.p;
  Eigen::MatrixXd kappa = 0.5 * (flow + flow.transpose());
  kappa.diagonal().setZero();

  std::vector<char> seen(static_cast<std::size_t>(m), 0);
  std::queue<Index> frontier;
  frontier.push(0);
  seen[0] = 1;
  Index reached = 1;
  while (!frontier.empty()) {
    const Index x = frontier.front();
    frontier.pop();
    for (Index y = 0; y < m; ++y)
      if (!seen[static_cast<std::size_t>(y)] && kappa(x, y) > 0.0) {
        seen[static_cast<std::size_t>(y)] = 1;
        ++reached;
        frontier.push(y);
      }
  }
  if (reached < m) return kInf;

  Index ground = 0;
  ens.probs.maxCoeff(&ground);
  std::vector<Index> keep;
  keep.reserve(static_cast<std::size_t>(m - 1));
  for (Index x = 0; x < m; ++x)
    if (x != ground) keep.push_back(x);
  const auto r = static_cast<Index>(keep.size());
  Eigen::MatrixXd lap(r, r), cov(r, r);
  const Eigen::VectorXd degree = kappa.rowwise().sum();
  for (Index a = 0; a < r; ++a) {
    const Index x = keep[static_cast<std::size_t>(a)];
    for (Index c = 0; c < r; ++c) {
      const Index y = keep[static_cast<std::size_t>(c)];
      lap(a, c) = (a == c ? degree[x] : 0.0) - kappa(x, y);
      cov(a, c) = (a == c ? ens.probs[x] : 0.0) - ens.probs[x] * ens.probs[y];
    }
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(lap);
  if (llt.info() != Eigen::Success) return kInf;
  const auto lower = llt.matrixL();
  const Eigen::MatrixXd half = lower.solve(cov);
  const Eigen::MatrixXd whitened = lower.solve(half.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (whitened + whitened.transpose()),
                                                           Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

double DobrushinMatrix::inf_norm() const {
  double best = c.size() ? c.rowwise().sum().maxCoeff() : 0.0;
  if (column.size()) best = std::max(best, column.sum());
  return best;
}

double DobrushinMatrix::spectral_radius() const {
  if (column.size()) return column.sum();
  if (c.size() == 0) return 0.0;
  const Eigen::EigenSolver<Eigen::MatrixXd> eig(c, false);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

DobrushinMatrix dobrushin_matrix(const BqdModel& model) {
  require_sites(model, kMaxDobrushinSites, "Dobrushin matrices");
  const Enumeration e(model);
  const Index n = e.n;
  DobrushinMatrix d{Eigen::MatrixXd::Zero(n, n), {}};
  for (std::size_t s = 0; s < e.m; ++s)
    for (Index j = 0; j < n; ++j) {
      if (!((s >> j) & 1U)) continue;
      const std::size_t t = s ^ (std::size_t{1} << j);
      for (Index i = 0; i < n; ++i) {
        if (i == j) continue;
        const double diff = std::abs(e.up_probability(model, s, i) - e.up_probability(model, t, i));
        d.c(i, j) = std::max(d.c(i, j), diff);
      }
    }
  return d;
}

DobrushinMatrix kernel_interdependence(const BqdModel& model, const SamplerKind& kind) {
  require_sites(model, kMaxDobrushinSites, "Dobrushin matrices");
  if (kind.tag == SamplerTag::Glauber) return dobrushin_matrix(model);
  const Enumeration e(model);
  const Index n = e.n;
  DobrushinMatrix d{Eigen::MatrixXd::Zero(n, n), {}};

  if (kind.tag == SamplerTag::Dula || kind.tag == SamplerTag::Dmala) {
    // prod_i Psi(x^i | x) for every state, then the sup over x = y off j.
    Eigen::VectorXd all_flip(static_cast<Index>(e.m));
    for (std::size_t s = 0; s < e.m; ++s) {
      double prod = 1.0;
      for (Index i = 0; i < n; ++i) prod *= dula_flip_probability(e.delta(model, s, i), kInf);
      all_flip[static_cast<Index>(s)] = prod;
    }
    d.column = Eigen::VectorXd::Zero(n);
    for (std::size_t s = 0; s < e.m; ++s)
      for (Index j = 0; j < n; ++j) {
        const std::size_t t = s ^ (std::size_t{1} << j);
        d.column[j] = std::max(d.column[j], std::abs(all_flip[static_cast<Index>(s)] -
                                                     all_flip[static_cast<Index>(t)]));
      }
    for (Index i = 0; i < n; ++i) d.c.row(i) = d.column.transpose();
    return d;
  }

  auto rate = [&](std::size_t s, Index i) {
    const double delta = e.delta(model, s, i);
    return kind.tag == SamplerTag::Metropolis ? metropolis_acceptance(delta)
                                              : uniform_gradient_move_probability(delta);
  };
  for (std::size_t s = 0; s < e.m; ++s)
    for (Index j = 0; j < n; ++j) {
      if (!((s >> j) & 1U)) continue;
      const std::size_t t = s ^ (std::size_t{1} << j);
      for (Index i = 0; i < n; ++i) {
        if (i == j) continue;
        d.c(i, j) = std::max(d.c(i, j), std::abs(rate(s, i) - rate(t, i)));
      }
    }
  return d;
}

double theorem_bound(SamplerTag kind, double h, double beta, Index n) {
  (void)beta;
  if (!(h >= 0.0)) throw RangeError("field strength must be >= 0");
  switch (kind) {
    case SamplerTag::Glauber: return 1.0 - h / cosh_sum(h, 0.75);
    case SamplerTag::Metropolis: return 1.0 - 2.0 * h * std::exp(-h);
    case SamplerTag::GradientMH: {
      const double c = cosh_sum(h, 0.25);
      return 1.0 - h / (c * c);
    }
    case SamplerTag::Dula: {
      const double c = cosh_sum(h, 0.25);
      return 1.0 - 4.0 * h * double(n) / (c * c);
    }
    case SamplerTag::Dmala: break;
  }
  throw ConfigError("no spectral-gap bound for this sampler");
}

FieldDominance check_field_dominance(const BqdModel& model) {
  FieldDominance f;
  f.threshold = 2.0 * model.beta() * model.max_abs_row_sum();
  f.h_eff = model.field().cwiseAbs().minCoeff();
  f.satisfied = f.h_eff >= f.threshold;
  return f;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Inapplicable: return "inapplicable";
  }
  return "unknown";
}

PoincareReport verify_poincare(const BqdModel& model, const SamplerKind& kind, double tolerance) {
  PoincareReport r;
  r.model_hash = hex64(model.hash());
  r.kind = kind.name();
  const FieldDominance f = check_field_dominance(model);
  r.h_eff = f.h_eff;
  r.threshold = f.threshold;
  if (kind.tag == SamplerTag::Dmala) {
    r.note = "no bound for this sampler";
    return r;
  }
  if (model.n() > 10) {
    r.note = "more than 10 sites";
    return r;
  }
  r.bound = theorem_bound(kind.tag, f.h_eff, model.beta(), model.n());
  r.inverse_bound = r.bound > 0.0 ? 1.0 / r.bound : kInf;
  if (!f.satisfied) {
    r.note = "field dominance fails";
    return r;
  }
  if (!(r.bound > 0.0)) {
    r.note = "bound not positive";
    return r;
  }
  const ExactEnsemble ens = exact_distribution(model);
  const ExactKernel k = exact_kernel(model, kind);
  r.exact_cp_step = poincare_constant(k, ens);
  r.exact_cp = k.single_site ? r.exact_cp_step / double(model.n()) : r.exact_cp_step;
  r.margin = r.inverse_bound - r.exact_cp;
  r.verdict = r.margin >= -tolerance ? Verdict::Pass : Verdict::Fail;
  return r;
}

DobrushinReport verify_dobrushin_chain(const BqdModel& model, const SamplerKind& kind, double tolerance) {
  DobrushinReport r;
  r.model_hash = hex64(model.hash());
  r.kind = kind.name();
  const FieldDominance f = check_field_dominance(model);
  r.h_eff = f.h_eff;
  r.threshold = f.threshold;
  if (kind.tag == SamplerTag::Dmala) {
    r.note = "no bound for this sampler";
    return r;
  }
  if (model.n() > 10) {
    r.note = "more than 10 sites";
    return r;
  }
  if (!f.satisfied) {
    r.note = "field dominance fails";
    return r;
  }
  const double h = f.h_eff;
  const double beta = model.beta();
  const Eigen::MatrixXd w = model.dense_couplings();
  const DobrushinMatrix d = kernel_interdependence(model, kind);
  const Index n = model.n();
  r.max_entry_excess = -kInf;
  auto audit = [&](double value, double bound) {
    r.max_entry = std::max(r.max_entry, value);
    r.max_entry_excess = std::max(r.max_entry_excess, value - bound);
    if (value > bound + tolerance) ++r.violations;
  };
  switch (kind.tag) {
    case SamplerTag::Glauber:
    case SamplerTag::Metropolis:
    case SamplerTag::GradientMH: {
      double scale = 0.0;
      if (kind.tag == SamplerTag::Glauber) {
        scale = 2.0 * beta / cosh_sum(h, 0.75);
        r.norm_bound = h / cosh_sum(h, 0.75);
      } else if (kind.tag == SamplerTag::Metropolis) {
        scale = 4.0 * beta * std::exp(-h);
        r.norm_bound = 2.0 * h * std::exp(-h);
      } else {
        const double c = cosh_sum(h, 0.25);
        scale = 2.0 * beta / (c * c);
        r.norm_bound = h / (c * c);
      }
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
          if (i != j) audit(d.c(i, j), scale * std::abs(w(i, j)));
      break;
    }
    case SamplerTag::Dula: {
      const double c = cosh_sum(h, 0.25);
      const double column_bound = 4.0 * h / (c * c);
      for (Index j = 0; j < n; ++j) audit(d.column[j], column_bound);
      r.norm_bound = column_bound * double(n);
      break;
    }
    case SamplerTag::Dmala: break;
  }
  r.norm = d.inf_norm();
  if (r.norm > r.norm_bound + tolerance) ++r.violations;
  r.verdict = r.violations == 0 ? Verdict::Pass : Verdict::Fail;
  return r;
}

double observation_inner_probability(double zeta, double t, const AlphaSchedule& schedule, double sigma) {
  if (!(t > 0.0)) throw RangeError("tail probability needs t > 0");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be > 0");
  if (!(zeta >= 0.0)) throw RangeError("zeta must be >= 0");
  const double a = alpha_of(schedule, t);
  const double s = sigma * std::sqrt(t);
  const double hi = (zeta - a) / s;
  const double lo = (-zeta - a) / s;
  // Phi(hi) - Phi(lo), taken on whichever side keeps both terms small.
  if (lo > 0.0) return normal_cdf(-lo) - normal_cdf(-hi);
  if (hi < 0.0) return normal_cdf(hi) - normal_cdf(lo);
  return 1.0 - normal_cdf(lo) - normal_cdf(-hi);
}

double observation_tail_probability(double zeta, double t, const AlphaSchedule& schedule, double sigma) {
  return 1.0 - observation_inner_probability(zeta, t, schedule, sigma);
}

DecayProbe mean_error_decay(const BqdModel& post, const SamplerKind& kind,
                            const std::vector<std::size_t>& n_grid, std::size_t replicas,
                            CounterRng& rng) {
  if (replicas < 2) throw ConfigError("slope fit needs at least two replicas");
  if (n_grid.size() < 2) throw ConfigError("slope fit needs at least two sample sizes");
  const ExactEnsemble ens = exact_distribution(post);
  const Eigen::VectorXd exact = ens.mean();
  // Stationary starts, so the fit sees the sampling error and not the burn-in bias.
  auto draw_start = [&](CounterRng& r) {
    double u = r.uniform(), acc = 0.0;
    std::uint64_t st = 0;
    for (; st + 1 < ens.size(); ++st) {
      acc += ens.probs[static_cast<Index>(st)];
      if (u < acc) break;
    }
    return SpinState(post, ExactEnsemble::spins_of(st, post.n()));
  };
  DecayProbe probe;
  probe.n = n_grid;
  const CounterRng base = rng.split(0xdeca7);
  rng();
  for (std::size_t g = 0; g < n_grid.size(); ++g) {
    if (n_grid[g] < 1) throw ConfigError("sample sizes must be >= 1");
    double sq = 0.0;
    for (std::size_t r = 0; r < replicas; ++r) {
      CounterRng stream = base.split(g * replicas + r);
      SpinState start = draw_start(stream);
      Chain chain = make_chain(post, kind, std::move(start), stream.split(1));
      const Eigen::VectorXd m = estimate_posterior_mean(post, chain, kind, n_grid[g], 1.0);
      sq += (m - exact).squaredNorm() / double(post.n());
    }
    probe.rms.push_back(std::sqrt(sq / double(replicas)));
  }
  Eigen::VectorXd lx(static_cast<Index>(n_grid.size())), ly(lx.size());
  for (Index g = 0; g < lx.size(); ++g) {
    lx[g] = std::log(double(n_grid[static_cast<std::size_t>(g)]));
    ly[g] = std::log(probe.rms[static_cast<std::size_t>(g)]);
  }
  const double mx = lx.mean(), my = ly.mean();
  probe.slope = (lx.array() - mx).matrix().dot((ly.array() - my).matrix()) /
                (lx.array() - mx).square().sum();
  return probe;
}

double positive_bound_floor(SamplerTag kind, Index n) {
  if (kind != SamplerTag::Dula) return 0.0;
  // The bound is positive near 0 and again past the larger root of cosh^2(h/4) = h n.
  double lo = 1.0, hi = 1.0;
  while (theorem_bound(kind, hi, 1.0, n) <= 0.0) {
    lo = hi;
    hi *= 1.25;
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (theorem_bound(kind, mid, 1.0, n) > 0.0 ? hi : lo) = mid;
  }
  return hi;
}

BqdModel admissible_model(std::uint64_t seed, SamplerTag kind, Index max_n) {
  if (max_n < 4) throw ConfigError("admissible models need max_n >= 4");
  CounterRng rng(seed, 0xad);
  const Index n = 4 + static_cast<Index>(seed % static_cast<std::uint64_t>(max_n - 3));
  const double beta = 0.5 + rng.uniform();
  std::vector<Pair> pairs;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (rng.uniform() < 0.5) pairs.emplace_back(i, j, 2.0 * rng.uniform() - 1.0);
  const BqdModel shape = BqdModel::from_pairs(n, pairs, Eigen::VectorXd::Zero(n), beta);
  const double threshold = 2.0 * beta * shape.max_abs_row_sum();
  // Single-site kinds get at least |h| = 2; Dula needs the large-field branch of its bound.
  const double floor = kind == SamplerTag::Dula ? 1.05 * positive_bound_floor(kind, n) : 2.0;
  const double base = std::max(threshold, floor);
  Eigen::VectorXd b(n);
  for (Index i = 0; i < n; ++i) {
    const double mag = base * (1.0 + 0.5 * rng.uniform());
    b[i] = rng.uniform() < 0.5 ? -mag : mag;
  }
  return shape.with_field(std::move(b));
}

BqdModel decay_posterior(std::uint64_t seed, Index n) {
  if (n < 2) throw ConfigError("decay posteriors need n >= 2");
  CounterRng rng(seed, 0xdec);
  const double beta = 0.1 + 0.2 * rng.uniform();
  std::vector<Pair> pairs;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (rng.uniform() < 0.5) pairs.emplace_back(i, j, 2.0 * rng.uniform() - 1.0);
  const BqdModel shape = BqdModel::from_pairs(n, pairs, Eigen::VectorXd::Zero(n), beta);
  const double base = std::max(2.0 * beta * shape.max_abs_row_sum(), 0.1);
  Eigen::VectorXd b(n);
  for (Index i = 0; i < n; ++i) {
    const double mag = base * (1.0 + 0.25 * rng.uniform());
    b[i] = rng.uniform() < 0.5 ? -mag : mag;
  }
  return shape.with_field(std::move(b));
}

std::vector<SamplerKind> suite_kinds() {
  return {SamplerKind::glauber(), SamplerKind::metropolis(),
          SamplerKind::gradient_mh(SiteSelection::UniformSite),
          SamplerKind::dula(std::numeric_limits<double>::infinity())};
}

std::size_t SuiteResult::violations() const {
  std::size_t v = tail_failures + decay_failures;
  for (const auto& r : poincare) v += r.verdict == Verdict::Fail;
  for (const auto& r : dobrushin) v += r.verdict == Verdict::Fail;
  return v;
}

std::vector<std::string> SuiteResult::offending_models() const {
  std::vector<std::string> out;
  for (const auto& r : poincare)
    if (r.verdict == Verdict::Fail) out.push_back(r.model_hash + " " + r.kind + " poincare");
  for (const auto& r : dobrushin)
    if (r.verdict == Verdict::Fail) out.push_back(r.model_hash + " " + r.kind + " dobrushin");
  return out;
}

SuiteResult run_verify_suite(const SuiteOptions& options, std::ostream* records) {
  SuiteResult result;
  const auto kinds = suite_kinds();
  const std::size_t cells = options.models * kinds.size();
  std::vector<PoincareReport> poincare(cells);
  std::vector<DobrushinReport> dobrushin(cells);
  parallel_for(cells, [&](std::size_t c) {
    const std::size_t m = c / kinds.size();
    const SamplerKind& kind = kinds[c % kinds.size()];
    const BqdModel model = admissible_model(options.seed * 1000003ULL + m, kind.tag, options.max_n);
    if (options.poincare) poincare[c] = verify_poincare(model, kind);
    if (options.dobrushin) dobrushin[c] = verify_dobrushin_chain(model, kind);
  });
  if (options.poincare) result.poincare = std::move(poincare);
  if (options.dobrushin) result.dobrushin = std::move(dobrushin);
  if (records) {
    for (const auto& r : result.poincare) write_record(*records, r);
    for (const auto& r : result.dobrushin) write_record(*records, r);
  }

  if (options.tails) {
    CounterRng rng(options.seed, 0x7a11);
    const AlphaSchedule schedules[] = {AlphaSchedule::geom(2, 1), AlphaSchedule::classic(),
                                       AlphaSchedule::geom(1, 1)};
    constexpr std::size_t draws = 1000000;
    for (std::size_t p = 0; p < 5; ++p) {
      const AlphaSchedule& sch = schedules[p % 3];
      const double zeta = 0.5 + 2.5 * rng.uniform();
      const double t = 0.05 + 0.9 * rng.uniform();
      const double sigma = 0.5 + 2.5 * rng.uniform();
      const double expect = observation_tail_probability(zeta, t, sch, sigma);
      const double a = alpha_of(sch, t), sd = sigma * std::sqrt(t);
      std::size_t hits = 0;
      for (std::size_t d = 0; d < draws; ++d) hits += std::abs(a + sd * rng.normal()) >= zeta;
      const double freq = double(hits) / double(draws);
      const double se = std::sqrt(std::max(expect * (1.0 - expect), 1e-12) / double(draws));
      ++result.tail_points;
      const bool ok = std::abs(freq - expect) <= 4.0 * se;
      result.tail_failures += !ok;
      if (records) {
        nlohmann::json rec = {{"check", "tail"}, {"schedule", sch.name()}, {"zeta", zeta}, {"t", t},
                              {"sigma", sigma}, {"formula", expect}, {"frequency", freq},
                              {"verdict", ok ? "pass" : "fail"}};
        *records << rec.dump() << '\n';
      }
    }
    // Along the last half of a Geom(2,1) grid the tail probability must strictly increase.
    for (double sigma : {1.0, 5.0}) {
      SlConfig cfg;
      cfg.sigma = sigma;
      const auto grid = build_time_grid(cfg);
      bool ok = true;
      double prev = kInf;
      for (std::size_t i = grid.size() / 2; i < grid.size(); ++i) {
        const double inner = observation_inner_probability(2.0, grid[i], cfg.schedule, sigma);
        ok = ok && inner < prev;
        prev = inner;
      }
      ++result.tail_points;
      result.tail_failures += !ok;
      if (records) {
        nlohmann::json rec = {{"check", "tail-trend"}, {"sigma", sigma}, {"zeta", 2.0},
                              {"verdict", ok ? "pass" : "fail"}};
        *records << rec.dump() << '\n';
      }
    }
  }

  if (options.decay) {
    const std::vector<std::size_t> grid = {64, 128, 256, 512, 1024, 2048, 4096};
    for (std::uint64_t p = 0; p < 3; ++p) {
      const BqdModel post = decay_posterior(options.seed * 7919ULL + 101 + p, std::min<Index>(options.max_n, 6));
      CounterRng rng(options.seed + p, 0xc4e7);
      const DecayProbe probe = mean_error_decay(post, SamplerKind::glauber(), grid, 200, rng);
      result.decay_slopes.push_back(probe.slope);
      const bool ok = probe.slope >= -0.7 && probe.slope <= -0.3;
      result.decay_failures += !ok;
      if (records) {
        nlohmann::json rec = {{"check", "decay"}, {"model_hash", hex64(post.hash())},
                              {"slope", probe.slope}, {"rms", probe.rms},
                              {"verdict", ok ? "pass" : "fail"}};
        *records << rec.dump() << '\n';
      }
    }
  }
  return result;
}

namespace {

nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

}  // namespace

void write_record(std::ostream& out, const PoincareReport& r) {
  nlohmann::json rec = {{"check", "poincare"},
                        {"model_hash", r.model_hash},
                        {"kind", r.kind},
                        {"h_eff", r.h_eff},
                        {"threshold", r.threshold},
                        {"bound", r.bound},
                        {"exact_cp", number(r.exact_cp)},
                        {"exact_cp_step", number(r.exact_cp_step)},
                        {"inverse_bound", number(r.inverse_bound)},
                        {"margin", number(r.margin)},
                        {"verdict", to_string(r.verdict)}};
  if (!r.note.empty()) rec["note"] = r.note;
  out << rec.dump() << '\n';
}

void write_record(std::ostream& out, const DobrushinReport& r) {
  nlohmann::json rec = {{"check", "dobrushin"},
                        {"model_hash", r.model_hash},
                        {"kind", r.kind},
                        {"h_eff", r.h_eff},
                        {"threshold", r.threshold},
                        {"max_entry", r.max_entry},
                        {"max_entry_excess", number(r.max_entry_excess)},
                        {"norm", r.norm},
                        {"norm_bound", r.norm_bound},
                        {"violations", r.violations},
                        {"verdict", to_string(r.verdict)}};
  if (!r.note.empty()) rec["note"] = r.note;
  out << rec.dump() << '\n';
}

}  // namespace bqsl
