#pragma once

// Define-by-run reverse-mode differentiation over scalar graphs.
//
// A Tape records every operation as a node whose parents precede it. When all
// leaves carry values, nodes are evaluated eagerly as they are recorded; a
// tape built from value-less leaves (input()) is evaluated by forward().
// forward() can be re-run with new leaf values on the same graph, which is how
// finite-difference checks probe a loss with frozen noise.
//
// A tape belongs to one thread. Independent tapes may run concurrently.

#include <cstdint>
#include <span>
#include <vector>

namespace homoenc::ad {

enum class Op : std::uint8_t {
  kLeaf,
  kConst,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kAddC,
  kMulC,
  kRSubC,
  kDivC,
  kRDivC,
  kExp,
  kLog,
  kLog1p,
  kSqrt,
  kSquare,
  kSin,
  kCos,
  kAtan2,
  kSoftplus,
  kLgamma,
  kDigamma,
  kLogBesselI0,
  kBesselRatio,
  kSum,
  kLogSumExp,
};

const char* op_name(Op op);

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape is alive
/// and not cleared.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  double value() const;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf with a value; keeps the tape in eager mode.
  Var input(double value);
  /// Leaf without a value; recorded nodes stay unevaluated until forward().
  Var input();
  Var constant(double value);

  Var unary(Op op, Var a, double aux = 0.0);
  Var binary(Op op, Var a, Var b);
  Var nary(Op op, std::span<const Var> args);

  /// Sets leaves (in creation order) to `leaf_values`, evaluates every node
  /// and returns the value of `output`.
  double forward(std::span<const double> leaf_values, Var output);
  /// Re-evaluates with the current leaf values.
  double forward(Var output);

  /// Reverse accumulation from a scalar output. Leaf gradients are then
  /// available through grad() / leaf_gradients().
  void backward(Var output);

  double value(Var v) const { return value_[v.id]; }
  double grad(Var v) const { return grad_[v.id]; }
  std::vector<double> leaf_gradients() const;
  std::vector<double> leaf_values() const;

  const std::vector<std::uint32_t>& leaves() const { return leaves_; }
  std::size_t size() const { return nodes_.size(); }
  Op op(std::uint32_t id) const { return nodes_[id].op; }
  bool evaluated() const { return evaluated_; }

  /// Drops every node; capacity is kept so a reused tape does not allocate.
  void clear();

 private:
  struct Node {
    Op op;
    std::uint32_t first_arg;
    std::uint32_t n_args;
    double aux;
  };

  Var push(Op op, std::span<const std::uint32_t> args, double aux);
  void evaluate(std::uint32_t id);
  void propagate(std::uint32_t id);
  std::uint32_t arg(const Node& n, std::uint32_t k) const { return args_[n.first_arg + k]; }

  std::vector<Node> nodes_;
  std::vector<std::uint32_t> args_;
  std::vector<double> value_;
  std::vector<double> grad_;
  std::vector<std::uint32_t> leaves_;
  bool evaluated_ = true;
  bool has_grad_ = false;
};

inline double Var::value() const { return tape->value(*this); }

// Arithmetic.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double k);
Var operator+(double k, Var a);
Var operator-(Var a, double k);
Var operator-(double k, Var a);
Var operator*(Var a, double k);
Var operator*(double k, Var a);
Var operator/(Var a, double k);
Var operator/(double k, Var a);
inline Var& operator+=(Var& a, Var b) { return a = a + b; }
inline Var& operator+=(Var& a, double k) { return a = a + k; }
inline Var& operator-=(Var& a, Var b) { return a = a - b; }
inline Var& operator*=(Var& a, double k) { return a = a * k; }

Var exp(Var a);
Var log(Var a);
Var log1p(Var a);
Var sqrt(Var a);
Var square(Var a);
Var sin(Var a);
Var cos(Var a);
Var atan2(Var y, Var x);
Var softplus(Var a);
Var lgamma(Var a);
Var digamma(Var a);
Var log_bessel_i0(Var a);
Var bessel_ratio(Var a);
Var sum(std::span<const Var> xs);
Var logsumexp(std::span<const Var> xs);

// Plain-double counterparts so model and loss code can be written once as a
// template over the scalar type.
double exp(double a);
double log(double a);
double log1p(double a);
double sqrt(double a);
double square(double a);
double sin(double a);
double cos(double a);
double atan2(double y, double x);
double softplus(double a);
double lgamma(double a);
double digamma(double a);
double log_bessel_i0(double a);
double bessel_ratio(double a);
double sum(std::span<const double> xs);
double logsumexp(std::span<const double> xs);

inline double value(double x) { return x; }
inline double value(Var x) { return x.value(); }

}  // namespace homoenc::ad
