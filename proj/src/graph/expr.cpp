#include "riskbn/expr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "riskbn/error.hpp"

namespace riskbn {

Expr Expr::constant(double value) {
  Expr e;
  e.op_ = Op::Const;
  e.value_ = value;
  return e;
}

Expr Expr::parent(std::string id) {
  Expr e;
  e.op_ = Op::Parent;
  e.parent_ = std::move(id);
  return e;
}

Expr Expr::binary(Op op, Expr lhs, Expr rhs) {
  Expr e;
  e.op_ = op;
  e.args_.reserve(2);
  e.args_.push_back(std::move(lhs));
  e.args_.push_back(std::move(rhs));
  return e;
}

Expr Expr::unary(Op op, Expr arg) {
  Expr e;
  e.op_ = op;
  e.args_.push_back(std::move(arg));
  return e;
}

Expr operator+(Expr a, Expr b) { return Expr::binary(Expr::Op::Add, std::move(a), std::move(b)); }
Expr operator-(Expr a, Expr b) { return Expr::binary(Expr::Op::Sub, std::move(a), std::move(b)); }
Expr operator*(Expr a, Expr b) { return Expr::binary(Expr::Op::Mul, std::move(a), std::move(b)); }
Expr operator/(Expr a, Expr b) { return Expr::binary(Expr::Op::Div, std::move(a), std::move(b)); }
Expr power(Expr a, Expr b) { return Expr::binary(Expr::Op::Pow, std::move(a), std::move(b)); }
Expr minimum(Expr a, Expr b) { return Expr::binary(Expr::Op::Min, std::move(a), std::move(b)); }
Expr maximum(Expr a, Expr b) { return Expr::binary(Expr::Op::Max, std::move(a), std::move(b)); }
Expr log10_of(Expr x) { return Expr::unary(Expr::Op::Log10, std::move(x)); }
Expr exposure(Expr p, Expr n) { return Expr::binary(Expr::Op::Exposure, std::move(p), std::move(n)); }

double exposure_probability(double p, double n) {
  if (n <= 0.0 || p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  return -std::expm1(n * std::log1p(-p));
}

namespace {

double apply(Expr::Op op, double a, double b) {
  switch (op) {
    case Expr::Op::Add: return a + b;
    case Expr::Op::Sub: return a - b;
    case Expr::Op::Mul: return a * b;
    case Expr::Op::Div:
      if (b == 0.0) throw Error(ErrorCode::DivisionByZero, "division by zero while evaluating expression");
      return a / b;
    case Expr::Op::Pow: return std::pow(a, b);
    case Expr::Op::Min: return std::min(a, b);
    case Expr::Op::Max: return std::max(a, b);
    case Expr::Op::Exposure: return exposure_probability(a, b);
    case Expr::Op::Log10:
      return a > 0.0 ? std::log10(a) : -std::numeric_limits<double>::infinity();
    default: break;
  }
  return 0.0;
}

bool is_unary(Expr::Op op) { return op == Expr::Op::Log10; }

}  // namespace

void Expr::collect_parents(std::set<std::string>& out) const {
  if (op_ == Op::Parent) out.insert(parent_);
  for (const auto& a : args_) a.collect_parents(out);
}

std::optional<double> Expr::constant_value() const {
  if (op_ == Op::Const) return value_;
  if (op_ == Op::Parent) return std::nullopt;
  std::vector<double> vals;
  for (const auto& a : args_) {
    auto v = a.constant_value();
    if (!v) return std::nullopt;
    vals.push_back(*v);
  }
  if (op_ == Op::Div && vals[1] == 0.0) return std::nullopt;
  return is_unary(op_) ? apply(op_, vals[0], 0.0) : apply(op_, vals[0], vals[1]);
}

bool Expr::has_static_division_by_zero() const {
  if (op_ == Op::Div) {
    auto d = args_[1].constant_value();
    if (d && *d == 0.0) return true;
  }
  return std::any_of(args_.begin(), args_.end(),
                     [](const Expr& a) { return a.has_static_division_by_zero(); });
}

const char* op_name(Expr::Op op) {
  switch (op) {
    case Expr::Op::Const: return "const";
    case Expr::Op::Parent: return "parent";
    case Expr::Op::Add: return "add";
    case Expr::Op::Sub: return "sub";
    case Expr::Op::Mul: return "mul";
    case Expr::Op::Div: return "div";
    case Expr::Op::Pow: return "pow";
    case Expr::Op::Min: return "min";
    case Expr::Op::Max: return "max";
    case Expr::Op::Exposure: return "exposure";
    case Expr::Op::Log10: return "log10";
  }
  return "?";
}

std::optional<Expr::Op> op_from_name(const std::string& name) {
  for (auto op : {Expr::Op::Const, Expr::Op::Parent, Expr::Op::Add, Expr::Op::Sub, Expr::Op::Mul,
                  Expr::Op::Div, Expr::Op::Pow, Expr::Op::Min, Expr::Op::Max, Expr::Op::Exposure,
                  Expr::Op::Log10}) {
    if (name == op_name(op)) return op;
  }
  return std::nullopt;
}

std::string Expr::to_string() const {
  std::ostringstream os;
  if (op_ == Op::Const) {
    os << value_;
  } else if (op_ == Op::Parent) {
    os << parent_;
  } else {
    os << op_name(op_) << '(';
    for (std::size_t i = 0; i < args_.size(); ++i) os << (i ? ", " : "") << args_[i].to_string();
    os << ')';
  }
  return os.str();
}

BoundExpr::BoundExpr(const Expr& expr, std::span<const std::string> parent_order) {
  emit(expr, parent_order);
  std::sort(slots_.begin(), slots_.end());
  slots_.erase(std::unique(slots_.begin(), slots_.end()), slots_.end());
}

void BoundExpr::emit(const Expr& e, std::span<const std::string> parent_order) {
  if (e.op() == Expr::Op::Parent) {
    auto it = std::find(parent_order.begin(), parent_order.end(), e.parent_id());
    if (it == parent_order.end()) {
      throw Error(ErrorCode::UnknownNode, "expression references '" + e.parent_id() +
                                              "' which is not a parent");
    }
    auto slot = static_cast<std::size_t>(it - parent_order.begin());
    code_.push_back({Expr::Op::Parent, 0.0, slot});
    slots_.push_back(slot);
    return;
  }
  for (const auto& a : e.args()) emit(a, parent_order);
  code_.push_back({e.op(), e.value(), 0});
}

double BoundExpr::eval(std::span<const double> parent_values) const {
  // Expressions are shallow; a small fixed stack avoids allocation in the
  // hot CPT loops.
  double stack[64];
  std::size_t top = 0;
  for (const auto& ins : code_) {
    switch (ins.op) {
      case Expr::Op::Const: stack[top++] = ins.value; break;
      case Expr::Op::Parent: stack[top++] = parent_values[ins.slot]; break;
      case Expr::Op::Log10: stack[top - 1] = apply(ins.op, stack[top - 1], 0.0); break;
      default: {
        double b = stack[--top];
        double a = stack[top - 1];
        stack[top - 1] = apply(ins.op, a, b);
      }
    }
    if (top >= 64) throw Error(ErrorCode::UnsupportedCombination, "expression too deep");
  }
  return top ? stack[0] : 0.0;
}

}  // namespace riskbn
