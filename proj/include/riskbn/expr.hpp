#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace riskbn {

/// Arithmetic over constants and parent values. Parent values are the
/// numeric representative of the parent's state: bin representative for
/// continuous/count parents, 0/1 for Boolean, state index for Labelled and
/// the interval midpoint (k+0.5)/K for Ranked.
class Expr {
 public:
  enum class Op { Const, Parent, Add, Sub, Mul, Div, Pow, Min, Max, Exposure, Log10 };

  Expr() = default;
  static Expr constant(double value);
  static Expr parent(std::string id);
  static Expr binary(Op op, Expr lhs, Expr rhs);
  static Expr unary(Op op, Expr arg);

  Op op() const noexcept { return op_; }
  double value() const noexcept { return value_; }
  const std::string& parent_id() const noexcept { return parent_; }
  const std::vector<Expr>& args() const noexcept { return args_; }

  bool is_constant() const noexcept { return op_ == Op::Const; }
  void collect_parents(std::set<std::string>& out) const;

  /// Folds constant sub-trees. Returns nullopt when any parent is referenced.
  std::optional<double> constant_value() const;

  /// True when some Div has a denominator that folds to exactly zero.
  bool has_static_division_by_zero() const;

  std::string to_string() const;

 private:
  Op op_ = Op::Const;
  double value_ = 0.0;
  std::string parent_;
  std::vector<Expr> args_;
};

Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);
// Named to stay clear of the <cmath> overloads inside this namespace.
Expr power(Expr base, Expr exponent);
Expr minimum(Expr a, Expr b);
Expr maximum(Expr a, Expr b);
Expr log10_of(Expr x);
/// 1 - (1 - p)^n
Expr exposure(Expr p, Expr n);
inline Expr lit(double v) { return Expr::constant(v); }
inline Expr ref(std::string id) { return Expr::parent(std::move(id)); }

const char* op_name(Expr::Op op);
std::optional<Expr::Op> op_from_name(const std::string& name);

/// Probability that a hazard with per-demand probability p manifests at
/// least once in n independent demands.
double exposure_probability(double p, double n);

/// Expression flattened to a postfix program with parents resolved to slots.
class BoundExpr {
 public:
  BoundExpr() = default;
  BoundExpr(const Expr& expr, std::span<const std::string> parent_order);

  /// Throws Error(DivisionByZero) on a zero denominator.
  double eval(std::span<const double> parent_values) const;

  /// Slots (indices into parent_order) the expression actually reads.
  const std::vector<std::size_t>& slots() const noexcept { return slots_; }

 private:
  struct Instr {
    Expr::Op op;
    double value;
    std::size_t slot;
  };
  void emit(const Expr& e, std::span<const std::string> parent_order);

  std::vector<Instr> code_;
  std::vector<std::size_t> slots_;
};

}  // namespace riskbn
