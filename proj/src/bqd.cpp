#include "bqsl/bqd.hpp"
#include "bqsl/log.hpp"
#include "bqsl/numeric.hpp"

#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace bqsl {

namespace {

WarningSink& warning_sink() {
  static WarningSink sink = [](std::string_view m) { std::cerr << "bqsl: warning: " << m << '\n'; };
  return sink;
}

std::shared_ptr<const Couplings> canonical_couplings(const Couplings& w) {
  if (w.rows() != w.cols()) throw ConfigError("W must be square");
  Couplings wt = w.transpose();
  Couplings sym = w;
  if ((Couplings(w - wt)).norm() > 0.0) {
    warn("asymmetric W replaced by (W + W^T)/2");
    sym = 0.5 * (w + wt);
  }
  sym.prune([](Index i, Index j, double v) { return i != j && v != 0.0; });
  sym.makeCompressed();
  return std::make_shared<const Couplings>(std::move(sym));
}

template <typename T>
std::uint64_t hash_bytes(const T& v, std::uint64_t h) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  return fnv1a64(std::string_view(buf, sizeof(T)), h);
}

}  // namespace

WarningSink set_warning_sink(WarningSink sink) {
  WarningSink old = std::move(warning_sink());
  warning_sink() = std::move(sink);
  return old;
}

void warn(std::string_view message) {
  if (warning_sink()) warning_sink()(message);
}

BqdModel::BqdModel(const Couplings& w, Eigen::VectorXd b, double beta)
    : BqdModel(canonical_couplings(w), std::move(b), beta) {}

BqdModel::BqdModel(std::shared_ptr<const Couplings> w, Eigen::VectorXd b, double beta)
    : w_(std::move(w)), b_(std::move(b)), beta_(beta) {
  if (b_.size() < 1) throw ConfigError("model needs n >= 1");
  if (w_->rows() != b_.size()) throw ConfigError("W and b sizes differ");
  if (!(beta_ >= 0.0) || !std::isfinite(beta_)) throw ConfigError("beta must be finite and >= 0");
  if (!b_.allFinite()) throw ConfigError("field must be finite");
  for (Index j = 0; j < w_->outerSize(); ++j) {
    double s = 0.0;
    for (Couplings::InnerIterator it(*w_, j); it; ++it) s += std::abs(it.value());
    max_row_sum_ = std::max(max_row_sum_, s);
  }
}

BqdModel BqdModel::from_dense(const Eigen::MatrixXd& w, Eigen::VectorXd b, double beta) {
  return BqdModel(Couplings(w.sparseView()), std::move(b), beta);
}

BqdModel BqdModel::from_pairs(Index n, const std::vector<Pair>& pairs, Eigen::VectorXd b,
                              double beta) {
  std::vector<Pair> both;
  both.reserve(2 * pairs.size());
  for (const auto& p : pairs) {
    if (p.row() < 0 || p.row() >= n || p.col() < 0 || p.col() >= n)
      throw RangeError("coupling index out of range");
    if (p.row() == p.col()) continue;
    both.emplace_back(p.row(), p.col(), p.value());
    both.emplace_back(p.col(), p.row(), p.value());
  }
  Couplings w(n, n);
  w.setFromTriplets(both.begin(), both.end());
  return BqdModel(w, std::move(b), beta);
}

BqdModel BqdModel::with_field(Eigen::VectorXd b) const {
  if (b.size() != n()) throw ConfigError("field size differs from model size");
  return BqdModel(w_, std::move(b), beta_);
}

BqdModel BqdModel::with_beta_field(double beta, Eigen::VectorXd b) const {
  if (b.size() != n()) throw ConfigError("field size differs from model size");
  return BqdModel(w_, std::move(b), beta);
}

std::uint64_t BqdModel::hash() const {
  std::uint64_t h = hash_bytes(static_cast<std::int64_t>(n()), 0xcbf29ce484222325ULL);
  h = hash_bytes(beta_, h);
  for (Index i = 0; i < n(); ++i) h = hash_bytes(b_[i], h);
  for (Index j = 0; j < w_->outerSize(); ++j)
    for (Couplings::InnerIterator it(*w_, j); it; ++it) {
      if (it.row() >= j) continue;
      h = hash_bytes(static_cast<std::int64_t>(it.row()), h);
      h = hash_bytes(static_cast<std::int64_t>(j), h);
      h = hash_bytes(it.value(), h);
    }
  return h;
}

void check_spins(const Spins& spins) {
  for (Index i = 0; i < spins.size(); ++i)
    if (spins[i] != 1 && spins[i] != -1) throw ConfigError("spins must be +1 or -1");
}

void check_dimension(const BqdModel& model, const SpinState& state) {
  if (state.n() != model.n())
    throw ConfigError("state has " + std::to_string(state.n()) + " sites, model has " +
                      std::to_string(model.n()));
}

SpinState::SpinState(const BqdModel& model, Spins spins) : spins_(std::move(spins)) {
  if (spins_.size() != model.n()) throw ConfigError("spin vector size differs from model size");
  check_spins(spins_);
  refresh(model);
}

SpinState SpinState::all_up(const BqdModel& model) {
  return SpinState(model, Spins::Ones(model.n()));
}

void SpinState::refresh(const BqdModel& model) {
  cache_ = model.couplings() * spins_.cast<double>();
}

double log_density_unnormalized(const BqdModel& model, const SpinState& state) {
  check_dimension(model, state);
  const Eigen::VectorXd x = state.spins().cast<double>();
  return -0.5 * model.beta() * x.dot(state.cache()) + x.dot(model.field());
}

double log_density_unnormalized(const BqdModel& model, const Spins& spins) {
  if (spins.size() != model.n()) throw ConfigError("spin vector size differs from model size");
  const Eigen::VectorXd x = spins.cast<double>();
  const Eigen::VectorXd wx = model.couplings() * x;
  return -0.5 * model.beta() * x.dot(wx) + x.dot(model.field());
}

Eigen::VectorXd pseudo_gradient(const BqdModel& model, const SpinState& state) {
  check_dimension(model, state);
  return -model.beta() * state.cache() + model.field();
}

double flip_delta(const BqdModel& model, const SpinState& state, Index i) {
  if (i < 0 || i >= state.n()) throw RangeError("site index out of range");
  const double x = state.spin(i);
  return 2.0 * x * (model.beta() * state.cache()[i] - model.field()[i]);
}

Eigen::VectorXd flip_deltas(const BqdModel& model, const SpinState& state) {
  check_dimension(model, state);
  return 2.0 * state.spins().cast<double>().cwiseProduct(model.beta() * state.cache() - model.field());
}

void apply_flip(const BqdModel& model, SpinState& state, Index i) {
  if (i < 0 || i >= state.n()) throw RangeError("site index out of range");
  const Couplings& w = model.couplings();
  const double step = -2.0 * state.spins_[i];
  for (Couplings::InnerIterator it(w, i); it; ++it) state.cache_[it.row()] += step * it.value();
  state.spins_[i] = -state.spins_[i];
  ++state.flips_;
  if (state.journal_.ptr) state.journal_.ptr->push_back(i);
}

namespace {

struct LineReader {
  std::istream& in;
  const std::string& source;
  std::size_t line_no = 0;

  // Next non-blank line with '#' comments removed; false at EOF.
  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source, line_no, what); }
};

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view tok, const LineReader& r, const char* what) {
  T v{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    r.fail(std::string("expected ") + what + ", got '" + std::string(tok) + "'");
  return v;
}

}  // namespace

BqdModel read_model(std::istream& in, const std::string& source) {
  LineReader r{in, source};
  std::string line;
  if (!r.next(line)) r.fail("missing dimension line");
  auto tok = split_ws(line);
  if (tok.size() != 1) r.fail("dimension line must hold exactly N");
  const auto n = parse_number<long long>(tok[0], r, "integer N");
  if (n < 1) r.fail("N must be >= 1");

  if (!r.next(line)) r.fail("missing beta line");
  tok = split_ws(line);
  if (tok.size() != 1) r.fail("beta line must hold exactly one number");
  const double beta = parse_number<double>(tok[0], r, "beta");
  if (!(beta >= 0.0)) r.fail("beta must be >= 0");

  if (!r.next(line)) r.fail("missing field line");
  tok = split_ws(line);
  if (tok.empty() || tok[0] != "b") r.fail("field line must start with 'b'");
  if (static_cast<long long>(tok.size()) != n + 1)
    r.fail("field line needs " + std::to_string(n) + " values, got " + std::to_string(tok.size() - 1));
  Eigen::VectorXd b(n);
  for (long long i = 0; i < n; ++i) b[i] = parse_number<double>(tok[i + 1], r, "field value");

  std::vector<Pair> pairs;
  while (r.next(line)) {
    tok = split_ws(line);
    if (tok.size() != 3) r.fail("coupling line must be 'i j w'");
    const auto i = parse_number<long long>(tok[0], r, "site index");
    const auto j = parse_number<long long>(tok[1], r, "site index");
    const double w = parse_number<double>(tok[2], r, "coupling value");
    if (i < 0 || i >= n || j < 0 || j >= n) r.fail("site index out of range");
    if (i == j) continue;
    pairs.emplace_back(static_cast<int>(i), static_cast<int>(j), w);
  }
  return BqdModel::from_pairs(n, pairs, std::move(b), beta);
}

BqdModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path);
  return read_model(in, path);
}

void write_model(std::ostream& out, const BqdModel& model) {
  const auto old = out.precision(17);
  out << model.n() << '\n' << model.beta() << "\nb";
  for (Index i = 0; i < model.n(); ++i) out << ' ' << model.field()[i];
  out << '\n';
  const Couplings& w = model.couplings();
  for (Index j = 0; j < w.outerSize(); ++j)
    for (Couplings::InnerIterator it(w, j); it; ++it)
      if (it.row() < j) out << it.row() << ' ' << j << ' ' << it.value() << '\n';
  out.precision(old);
}

}  // namespace bqsl
