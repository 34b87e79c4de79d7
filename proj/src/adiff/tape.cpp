#include "homoenc/adiff/tape.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <string>

#include "homoenc/adiff/special.hpp"
#include "homoenc/errors.hpp"

namespace homoenc::ad {

namespace {

double softplus_value(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <class Get>
double logsumexp_impl(std::size_t n, Get get) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, get(i));
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(get(i) - m);
  return m + std::log(s);
}

Tape* common_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw UsageError("operands live on different tapes");
  return a.tape;
}

}  // namespace

const char* op_name(Op op) {
  switch (op) {
    case Op::kLeaf: return "leaf";
    case Op::kConst: return "const";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kNeg: return "neg";
    case Op::kAddC: return "add_const";
    case Op::kMulC: return "mul_const";
    case Op::kRSubC: return "const_sub";
    case Op::kDivC: return "div_const";
    case Op::kRDivC: return "const_div";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kLog1p: return "log1p";
    case Op::kSqrt: return "sqrt";
    case Op::kSquare: return "square";
    case Op::kSin: return "sin";
    case Op::kCos: return "cos";
    case Op::kAtan2: return "atan2";
    case Op::kSoftplus: return "softplus";
    case Op::kLgamma: return "lgamma";
    case Op::kDigamma: return "digamma";
    case Op::kLogBesselI0: return "log_bessel_i0";
    case Op::kBesselRatio: return "bessel_ratio";
    case Op::kSum: return "sum";
    case Op::kLogSumExp: return "logsumexp";
  }
  return "?";
}

Var Tape::input(double v) {
  Var out = push(Op::kLeaf, {}, 0.0);
  value_[out.id] = v;
  leaves_.push_back(out.id);
  return out;
}

Var Tape::input() {
  Var out = push(Op::kLeaf, {}, 0.0);
  value_[out.id] = std::numeric_limits<double>::quiet_NaN();
  leaves_.push_back(out.id);
  evaluated_ = false;
  return out;
}

Var Tape::constant(double v) { return push(Op::kConst, {}, v); }

Var Tape::unary(Op op, Var a, double aux) {
  const std::uint32_t args[1] = {a.id};
  return push(op, args, aux);
}

Var Tape::binary(Op op, Var a, Var b) {
  const std::uint32_t args[2] = {a.id, b.id};
  return push(op, args, 0.0);
}

Var Tape::nary(Op op, std::span<const Var> xs) {
  const auto first = static_cast<std::uint32_t>(args_.size());
  for (const Var& x : xs) {
    assert(x.tape == this);
    args_.push_back(x.id);
  }
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({op, first, static_cast<std::uint32_t>(xs.size()), 0.0});
  value_.push_back(0.0);
  grad_.push_back(0.0);
  if (evaluated_) evaluate(id);
  return {this, id};
}

Var Tape::push(Op op, std::span<const std::uint32_t> args, double aux) {
  const auto first = static_cast<std::uint32_t>(args_.size());
  args_.insert(args_.end(), args.begin(), args.end());
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({op, first, static_cast<std::uint32_t>(args.size()), aux});
  value_.push_back(op == Op::kConst ? aux : 0.0);
  grad_.push_back(0.0);
  if (evaluated_ && op != Op::kLeaf && op != Op::kConst) evaluate(id);
  return {this, id};
}

void Tape::evaluate(std::uint32_t id) {
  const Node& n = nodes_[id];
  auto a = [&](std::uint32_t k) { return value_[arg(n, k)]; };
  auto domain = [&](const char* what) {
    throw DomainError(std::string(op_name(n.op)) + ": " + what, id);
  };
  double v = 0.0;
  switch (n.op) {
    case Op::kLeaf:
    case Op::kConst:
      return;
    case Op::kAdd: v = a(0) + a(1); break;
    case Op::kSub: v = a(0) - a(1); break;
    case Op::kMul: v = a(0) * a(1); break;
    case Op::kDiv:
      if (a(1) == 0.0) domain("division by zero");
      v = a(0) / a(1);
      break;
    case Op::kNeg: v = -a(0); break;
    case Op::kAddC: v = a(0) + n.aux; break;
    case Op::kMulC: v = a(0) * n.aux; break;
    case Op::kRSubC: v = n.aux - a(0); break;
    case Op::kDivC: v = a(0) / n.aux; break;
    case Op::kRDivC:
      if (a(0) == 0.0) domain("division by zero");
      v = n.aux / a(0);
      break;
    case Op::kExp: v = std::exp(a(0)); break;
    case Op::kLog:
      if (!(a(0) > 0.0)) domain("argument must be > 0");
      v = std::log(a(0));
      break;
    case Op::kLog1p:
      if (!(a(0) > -1.0)) domain("argument must be > -1");
      v = std::log1p(a(0));
      break;
    case Op::kSqrt:
      if (!(a(0) >= 0.0)) domain("argument must be >= 0");
      v = std::sqrt(a(0));
      break;
    case Op::kSquare: v = a(0) * a(0); break;
    case Op::kSin: v = std::sin(a(0)); break;
    case Op::kCos: v = std::cos(a(0)); break;
    case Op::kAtan2:
      if (a(0) == 0.0 && a(1) == 0.0) domain("undefined at the origin");
      v = std::atan2(a(0), a(1));
      break;
    case Op::kSoftplus: v = softplus_value(a(0)); break;
    case Op::kLgamma:
      if (!(a(0) > 0.0)) domain("argument must be > 0");
      v = special::lgamma(a(0));
      break;
    case Op::kDigamma:
      if (!(a(0) > 0.0)) domain("argument must be > 0");
      v = special::digamma(a(0));
      break;
    case Op::kLogBesselI0:
      if (!(a(0) >= 0.0)) domain("argument must be >= 0");
      v = special::log_bessel_i0(a(0));
      break;
    case Op::kBesselRatio:
      if (!(a(0) >= 0.0)) domain("argument must be >= 0");
      v = special::bessel_ratio(a(0));
      break;
    case Op::kSum:
      for (std::uint32_t k = 0; k < n.n_args; ++k) v += a(k);
      break;
    case Op::kLogSumExp:
      v = logsumexp_impl(n.n_args, [&](std::size_t k) { return a(static_cast<std::uint32_t>(k)); });
      break;
  }
  value_[id] = v;
}

double Tape::forward(std::span<const double> leaf_values, Var output) {
  if (leaf_values.size() != leaves_.size()) {
    throw UsageError("forward: expected " + std::to_string(leaves_.size()) + " leaf values, got " +
                     std::to_string(leaf_values.size()));
  }
  for (std::size_t i = 0; i < leaves_.size(); ++i) value_[leaves_[i]] = leaf_values[i];
  return forward(output);
}

double Tape::forward(Var output) {
  evaluated_ = false;
  has_grad_ = false;
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) evaluate(i);
  evaluated_ = true;
  return value_[output.id];
}

void Tape::backward(Var output) {
  if (!evaluated_) throw UsageError("backward called before forward");
  std::fill(grad_.begin(), grad_.end(), 0.0);
  grad_[output.id] = 1.0;
  for (std::uint32_t i = output.id + 1; i-- > 0;) {
    if (grad_[i] != 0.0) propagate(i);
  }
  has_grad_ = true;
}

void Tape::propagate(std::uint32_t id) {
  const Node& n = nodes_[id];
  const double g = grad_[id];
  const double out = value_[id];
  auto a = [&](std::uint32_t k) { return value_[arg(n, k)]; };
  auto acc = [&](std::uint32_t k, double d) { grad_[arg(n, k)] += g * d; };
  switch (n.op) {
    case Op::kLeaf:
    case Op::kConst:
      break;
    case Op::kAdd: acc(0, 1.0); acc(1, 1.0); break;
    case Op::kSub: acc(0, 1.0); acc(1, -1.0); break;
    case Op::kMul: acc(0, a(1)); acc(1, a(0)); break;
    case Op::kDiv: acc(0, 1.0 / a(1)); acc(1, -out / a(1)); break;
    case Op::kNeg: acc(0, -1.0); break;
    case Op::kAddC: acc(0, 1.0); break;
    case Op::kMulC: acc(0, n.aux); break;
    case Op::kRSubC: acc(0, -1.0); break;
    case Op::kDivC: acc(0, 1.0 / n.aux); break;
    case Op::kRDivC: acc(0, -out / a(0)); break;
    case Op::kExp: acc(0, out); break;
    case Op::kLog: acc(0, 1.0 / a(0)); break;
    case Op::kLog1p: acc(0, 1.0 / (1.0 + a(0))); break;
    case Op::kSqrt: acc(0, 0.5 / out); break;
    case Op::kSquare: acc(0, 2.0 * a(0)); break;
    case Op::kSin: acc(0, std::cos(a(0))); break;
    case Op::kCos: acc(0, -std::sin(a(0))); break;
    case Op::kAtan2: {
      const double y = a(0), x = a(1);
      const double r2 = x * x + y * y;
      acc(0, x / r2);
      acc(1, -y / r2);
      break;
    }
    case Op::kSoftplus: acc(0, sigmoid(a(0))); break;
    case Op::kLgamma: acc(0, special::digamma(a(0))); break;
    case Op::kDigamma: acc(0, special::trigamma(a(0))); break;
    case Op::kLogBesselI0: acc(0, special::bessel_ratio(a(0))); break;
    case Op::kBesselRatio: acc(0, special::bessel_ratio_derivative(a(0))); break;
    case Op::kSum:
      for (std::uint32_t k = 0; k < n.n_args; ++k) acc(k, 1.0);
      break;
    case Op::kLogSumExp:
      if (std::isfinite(out)) {
        for (std::uint32_t k = 0; k < n.n_args; ++k) acc(k, std::exp(a(k) - out));
      }
      break;
  }
}

std::vector<double> Tape::leaf_gradients() const {
  if (!has_grad_) throw UsageError("leaf_gradients: no backward pass has run");
  std::vector<double> g(leaves_.size());
  for (std::size_t i = 0; i < leaves_.size(); ++i) g[i] = grad_[leaves_[i]];
  return g;
}

std::vector<double> Tape::leaf_values() const {
  std::vector<double> v(leaves_.size());
  for (std::size_t i = 0; i < leaves_.size(); ++i) v[i] = value_[leaves_[i]];
  return v;
}

void Tape::clear() {
  nodes_.clear();
  args_.clear();
  value_.clear();
  grad_.clear();
  leaves_.clear();
  evaluated_ = true;
  has_grad_ = false;
}

// ---------------------------------------------------------------------------

Var operator+(Var a, Var b) { return common_tape(a, b)->binary(Op::kAdd, a, b); }
Var operator-(Var a, Var b) { return common_tape(a, b)->binary(Op::kSub, a, b); }
Var operator*(Var a, Var b) { return common_tape(a, b)->binary(Op::kMul, a, b); }
Var operator/(Var a, Var b) { return common_tape(a, b)->binary(Op::kDiv, a, b); }
Var operator-(Var a) { return a.tape->unary(Op::kNeg, a); }
Var operator+(Var a, double k) { return a.tape->unary(Op::kAddC, a, k); }
Var operator+(double k, Var a) { return a.tape->unary(Op::kAddC, a, k); }
Var operator-(Var a, double k) { return a.tape->unary(Op::kAddC, a, -k); }
Var operator-(double k, Var a) { return a.tape->unary(Op::kRSubC, a, k); }
Var operator*(Var a, double k) { return a.tape->unary(Op::kMulC, a, k); }
Var operator*(double k, Var a) { return a.tape->unary(Op::kMulC, a, k); }
Var operator/(Var a, double k) { return a.tape->unary(Op::kDivC, a, k); }
Var operator/(double k, Var a) { return a.tape->unary(Op::kRDivC, a, k); }

Var exp(Var a) { return a.tape->unary(Op::kExp, a); }
Var log(Var a) { return a.tape->unary(Op::kLog, a); }
Var log1p(Var a) { return a.tape->unary(Op::kLog1p, a); }
Var sqrt(Var a) { return a.tape->unary(Op::kSqrt, a); }
Var square(Var a) { return a.tape->unary(Op::kSquare, a); }
Var sin(Var a) { return a.tape->unary(Op::kSin, a); }
Var cos(Var a) { return a.tape->unary(Op::kCos, a); }
Var atan2(Var y, Var x) { return common_tape(y, x)->binary(Op::kAtan2, y, x); }
Var softplus(Var a) { return a.tape->unary(Op::kSoftplus, a); }
Var lgamma(Var a) { return a.tape->unary(Op::kLgamma, a); }
Var digamma(Var a) { return a.tape->unary(Op::kDigamma, a); }
Var log_bessel_i0(Var a) { return a.tape->unary(Op::kLogBesselI0, a); }
Var bessel_ratio(Var a) { return a.tape->unary(Op::kBesselRatio, a); }
Var sum(std::span<const Var> xs) {
  assert(!xs.empty());
  return xs.front().tape->nary(Op::kSum, xs);
}
Var logsumexp(std::span<const Var> xs) {
  assert(!xs.empty());
  return xs.front().tape->nary(Op::kLogSumExp, xs);
}

double exp(double a) { return std::exp(a); }
double log(double a) {
  if (!(a > 0.0)) throw DomainError("log: argument must be > 0");
  return std::log(a);
}
double log1p(double a) {
  if (!(a > -1.0)) throw DomainError("log1p: argument must be > -1");
  return std::log1p(a);
}
double sqrt(double a) {
  if (!(a >= 0.0)) throw DomainError("sqrt: argument must be >= 0");
  return std::sqrt(a);
}
double square(double a) { return a * a; }
double sin(double a) { return std::sin(a); }
double cos(double a) { return std::cos(a); }
double atan2(double y, double x) {
  if (y == 0.0 && x == 0.0) throw DomainError("atan2: undefined at the origin");
  return std::atan2(y, x);
}
double softplus(double a) { return softplus_value(a); }
double lgamma(double a) { return special::lgamma(a); }
double digamma(double a) { return special::digamma(a); }
double log_bessel_i0(double a) { return special::log_bessel_i0(a); }
double bessel_ratio(double a) { return special::bessel_ratio(a); }
double sum(std::span<const double> xs) {
  double v = 0.0;
  for (double x : xs) v += x;
  return v;
}
double logsumexp(std::span<const double> xs) {
  return logsumexp_impl(xs.size(), [&](std::size_t k) { return xs[k]; });
}

}  // namespace homoenc::ad
