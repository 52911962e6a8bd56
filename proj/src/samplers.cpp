#include "bqsl/samplers.hpp"
#include "bqsl/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace bqsl {

SamplerKind SamplerKind::parse(std::string_view name) {
  if (name == "glauber") return glauber();
  if (name == "metropolis") return metropolis();
  if (name == "gradient-mh" || name == "gwg" || name == "pas") return gradient_mh();
  if (name == "gradient-mh-uniform") return gradient_mh(SiteSelection::UniformSite);
  if (name == "dula") return dula();
  if (name == "dmala") return dmala();
  throw ConfigError("unknown sampler '" + std::string(name) + "'");
}

std::string SamplerKind::name() const {
  switch (tag) {
    case SamplerTag::Glauber: return "glauber";
    case SamplerTag::Metropolis: return "metropolis";
    case SamplerTag::GradientMH:
      return site_selection == SiteSelection::UniformSite ? "gradient-mh-uniform" : "gradient-mh";
    case SamplerTag::Dula: return "dula";
    case SamplerTag::Dmala: return "dmala";
  }
  return "unknown";
}

void SamplerKind::validate() const {
  if ((tag == SamplerTag::Dula || tag == SamplerTag::Dmala) && !(step_size > 0.0))
    throw ConfigError("step size must be > 0");
  if (tag == SamplerTag::Dmala && adapt && adapt_every == 0)
    throw ConfigError("adaptation interval must be >= 1");
}

Chain make_chain(const BqdModel& model, const SamplerKind& kind, CounterRng rng) {
  Spins s(model.n());
  for (Index i = 0; i < s.size(); ++i) s[i] = rng.uniform() < 0.5 ? -1 : 1;
  return make_chain(model, kind, SpinState(model, std::move(s)), rng);
}

Chain make_chain(const BqdModel& model, const SamplerKind& kind, SpinState start, CounterRng rng) {
  kind.validate();
  check_dimension(model, start);
  return Chain{std::move(start), rng, {}, kind.step_size};
}

double glauber_up_probability(const BqdModel& model, const SpinState& state, Index i) {
  return sigmoid(2.0 * (model.field()[i] - model.beta() * state.cache()[i]));
}

double metropolis_acceptance(double delta) { return delta >= 0.0 ? 1.0 : std::exp(delta); }

double uniform_gradient_move_probability(double delta) {
  const double a = 0.5 * delta;
  return sigmoid(a) * (a >= 0.0 ? 1.0 : std::exp(a));
}

double dula_flip_logit(double delta, double step_size) {
  return 0.5 * delta - (std::isinf(step_size) ? 0.0 : 2.0 / step_size);
}

double dula_flip_probability(double delta, double step_size) {
  return sigmoid(dula_flip_logit(delta, step_size));
}

double dula_log_proposal(const Eigen::VectorXd& logits, const std::vector<Index>& flipped) {
  double lp = 0.0;
  std::size_t k = 0;
  for (Index i = 0; i < logits.size(); ++i) {
    const bool flip = k < flipped.size() && flipped[k] == i;
    if (flip) ++k;
    lp += log_sigmoid(flip ? logits[i] : -logits[i]);
  }
  return lp;
}

bool step_glauber(const BqdModel& model, Chain& chain, const SamplerKind& kind) {
  SpinState& s = chain.state;
  const Index i = kind.systematic_scan ? static_cast<Index>(chain.stats.steps % s.n())
                                       : chain.rng.index(s.n());
  const double up = glauber_up_probability(model, s, i);
  const int target = chain.rng.uniform() < up ? 1 : -1;
  const bool changed = target != s.spin(i);
  if (changed) apply_flip(model, s, i);
  chain.stats.record(changed);
  return changed;
}

bool step_metropolis(const BqdModel& model, Chain& chain) {
  SpinState& s = chain.state;
  const Index i = chain.rng.index(s.n());
  const double u = chain.rng.uniform();
  const bool accept = u < metropolis_acceptance(flip_delta(model, s, i));
  if (accept) apply_flip(model, s, i);
  chain.stats.record(accept);
  return accept;
}

namespace {

// Inverse-CDF draw from softmax(logits) with one uniform.
Index sample_softmax(const Eigen::VectorXd& logits, double u, double& log_norm) {
  const double m = logits.maxCoeff();
  const Eigen::ArrayXd w = (logits.array() - m).exp();
  const double total = w.sum();
  log_norm = m + std::log(total);
  const double target = u * total;
  double acc = 0.0;
  for (Index i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (target < acc) return i;
  }
  // u * total can round up to total; take the last site with positive weight.
  for (Index i = w.size() - 1; i > 0; --i)
    if (w[i] > 0.0) return i;
  return 0;
}

bool gradient_mh_softmax(const BqdModel& model, Chain& chain) {
  SpinState& s = chain.state;
  const Eigen::VectorXd logits = 0.5 * flip_deltas(model, s);
  double log_z = 0.0;
  const Index i = sample_softmax(logits, chain.rng.uniform(), log_z);
  const double u = chain.rng.uniform();
  // nu(x') q(x|x') / (nu(x) q(x'|x)) collapses to Z(x)/Z(x') since the reverse logit is -logit_i.
  apply_flip(model, s, i);
  const double log_z_new = log_sum_exp(0.5 * flip_deltas(model, s));
  const bool accept = std::log(u) < log_z - log_z_new;
  if (!accept) apply_flip(model, s, i);
  chain.stats.record(accept);
  return accept;
}

bool gradient_mh_uniform(const BqdModel& model, Chain& chain) {
  SpinState& s = chain.state;
  const Index i = chain.rng.index(s.n());
  const double propose = chain.rng.uniform();
  const double u = chain.rng.uniform();
  const double a = 0.5 * flip_delta(model, s, i);
  // Two-point proposal {stay, flip} with weights (1, e^a); the MH ratio of a flip is e^a.
  const bool accept = propose < sigmoid(a) && u < metropolis_acceptance(a);
  if (accept) apply_flip(model, s, i);
  chain.stats.record(accept);
  return accept;
}

Eigen::VectorXd dula_logits(const BqdModel& model, const SpinState& s, double step_size) {
  Eigen::VectorXd logits = 0.5 * flip_deltas(model, s);
  if (!std::isinf(step_size)) logits.array() -= 2.0 / step_size;
  return logits;
}

DulaProposal draw_dula(Chain& chain, const Eigen::VectorXd& logits) {
  DulaProposal p;
  p.flip_probs = logits.unaryExpr([](double z) { return sigmoid(z); });
  for (Index i = 0; i < logits.size(); ++i)
    if (chain.rng.uniform() < p.flip_probs[i]) p.flipped.push_back(i);
  p.log_forward = dula_log_proposal(logits, p.flipped);
  return p;
}

}  // namespace

bool step_gradient_mh(const BqdModel& model, Chain& chain, const SamplerKind& kind) {
  return kind.site_selection == SiteSelection::UniformSite ? gradient_mh_uniform(model, chain)
                                                           : gradient_mh_softmax(model, chain);
}

DulaProposal step_dula(const BqdModel& model, Chain& chain, const SamplerKind& kind) {
  (void)kind;
  const Eigen::VectorXd logits = dula_logits(model, chain.state, chain.step_size);
  DulaProposal p = draw_dula(chain, logits);
  for (Index i : p.flipped) apply_flip(model, chain.state, i);
  chain.stats.record(!p.flipped.empty());
  return p;
}

bool step_dmala(const BqdModel& model, Chain& chain, const SamplerKind& kind) {
  (void)kind;
  SpinState& s = chain.state;
  const Eigen::VectorXd logits = dula_logits(model, s, chain.step_size);
  const DulaProposal p = draw_dula(chain, logits);
  const double u = chain.rng.uniform();
  if (p.flipped.empty()) {
    chain.stats.record(true);
    return false;
  }
  double dl = 0.0;
  for (Index i : p.flipped) {
    dl += flip_delta(model, s, i);
    apply_flip(model, s, i);
  }
  const double log_reverse = dula_log_proposal(dula_logits(model, s, chain.step_size), p.flipped);
  const bool accept = std::log(u) < dl + log_reverse - p.log_forward;
  if (!accept)
    for (auto it = p.flipped.rbegin(); it != p.flipped.rend(); ++it) apply_flip(model, s, *it);
  chain.stats.record(accept);
  return accept;
}

double adapt_step_size(double step_size, double observed_rate, double eta, double target) {
  return step_size * std::exp(eta * (observed_rate - target));
}

bool step(const BqdModel& model, Chain& chain, const SamplerKind& kind) {
  switch (kind.tag) {
    case SamplerTag::Glauber: return step_glauber(model, chain, kind);
    case SamplerTag::Metropolis: return step_metropolis(model, chain);
    case SamplerTag::GradientMH: return step_gradient_mh(model, chain, kind);
    case SamplerTag::Dula: return !step_dula(model, chain, kind).flipped.empty();
    case SamplerTag::Dmala: {
      const bool moved = step_dmala(model, chain, kind);
      if (kind.adapt && chain.stats.window_steps >= kind.adapt_every) {
        chain.step_size = adapt_step_size(chain.step_size, chain.stats.window_rate());
        chain.stats.window_steps = 0;
        chain.stats.window_accepted = 0;
        chain.stats.last_adapt_step = chain.stats.steps;
      }
      return moved;
    }
  }
  return false;
}

Eigen::VectorXd gwg_site_probabilities(const BqdModel& model, const SpinState& state) {
  const Eigen::VectorXd logits = 0.5 * flip_deltas(model, state);
  return (logits.array() - log_sum_exp(logits)).exp().matrix();
}

Eigen::VectorXd pas_site_probabilities(const BqdModel& model, const SpinState& state) {
  const Eigen::VectorXd x = state.spins().cast<double>();
  // log g(ratio) with ratio = exp(grad_i * (x'_i - x_i)) and x'_i - x_i = -2 x_i
  const Eigen::VectorXd log_w = 0.5 * (-2.0 * x.cwiseProduct(pseudo_gradient(model, state)));
  return (log_w.array() - log_sum_exp(log_w)).exp().matrix();
}

}  // namespace bqsl
