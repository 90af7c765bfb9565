#include "riskbn/model_json.hpp"

#include "riskbn/error.hpp"

namespace riskbn {

using nlohmann::json;

namespace {

[[noreturn]] void parse_error(const std::string& msg) { throw Error(ErrorCode::Parse, msg); }

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) parse_error(std::string("missing field '") + key + "'");
  return j.at(key);
}

std::vector<std::string> string_list(const json& j) {
  if (!j.is_array()) parse_error("expected an array of strings");
  std::vector<std::string> out;
  for (const auto& s : j) {
    if (!s.is_string()) parse_error("expected an array of strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

}  // namespace

json expr_to_json(const Expr& e) {
  switch (e.op()) {
    case Expr::Op::Const: return e.value();
    case Expr::Op::Parent: return e.parent_id();
    default: break;
  }
  json args = json::array();
  for (const auto& a : e.args()) args.push_back(expr_to_json(a));
  return json{{"op", op_name(e.op())}, {"args", args}};
}

Expr expr_from_json(const json& j) {
  if (j.is_number()) return Expr::constant(j.get<double>());
  if (j.is_string()) return Expr::parent(j.get<std::string>());
  if (!j.is_object()) parse_error("expression must be a number, a parent id or an op object");
  auto name = field(j, "op").get<std::string>();
  auto op = op_from_name(name);
  if (!op || *op == Expr::Op::Const || *op == Expr::Op::Parent) parse_error("unknown expression op '" + name + "'");
  const auto& args = field(j, "args");
  if (!args.is_array()) parse_error("op args must be an array");
  if (*op == Expr::Op::Log10) {
    if (args.size() != 1) parse_error("log10 takes one argument");
    return Expr::unary(*op, expr_from_json(args[0]));
  }
  if (args.size() < 2) parse_error("op '" + name + "' takes at least two arguments");
  // n-ary add/mul/min/max fold left
  Expr acc = Expr::binary(*op, expr_from_json(args[0]), expr_from_json(args[1]));
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (*op != Expr::Op::Add && *op != Expr::Op::Mul && *op != Expr::Op::Min && *op != Expr::Op::Max)
      parse_error("op '" + name + "' takes exactly two arguments");
    acc = Expr::binary(*op, std::move(acc), expr_from_json(args[i]));
  }
  return acc;
}

json cpd_to_json(const CpdExpr& c) {
  json j;
  j["type"] = cpd_name(c);
  std::visit(
      [&](const auto& b) {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, TableCpd>) {
          j["parents"] = b.parents;
          j["rows"] = b.rows;
        } else if constexpr (std::is_same_v<T, BetaCpd>) {
          j["alpha"] = expr_to_json(b.alpha);
          j["beta"] = expr_to_json(b.beta);
        } else if constexpr (std::is_same_v<T, BinomialCpd>) {
          j["n"] = expr_to_json(b.n);
          j["p"] = expr_to_json(b.p);
        } else if constexpr (std::is_same_v<T, UniformCpd>) {
          j["a"] = expr_to_json(b.a);
          j["b"] = expr_to_json(b.b);
        } else if constexpr (std::is_same_v<T, TNormalCpd>) {
          j["mean"] = expr_to_json(b.mean);
          j["variance"] = expr_to_json(b.variance);
          j["lo"] = b.lo;
          j["hi"] = b.hi;
        } else if constexpr (std::is_same_v<T, DeterministicCpd>) {
          j["value"] = expr_to_json(b.value);
        } else if constexpr (std::is_same_v<T, PartitionedCpd>) {
          j["parent"] = b.parent;
          json cases = json::array();
          for (const auto& s : b.cases) cases.push_back(cpd_to_json(s));
          j["cases"] = cases;
        } else if constexpr (std::is_same_v<T, MixtureCpd>) {
          j["weights"] = b.weights;
          json comps = json::array();
          for (const auto& s : b.components) comps.push_back(cpd_to_json(s));
          j["components"] = comps;
        }
      },
      c.body);
  return j;
}

CpdExpr cpd_from_json(const json& j) {
  const auto type = field(j, "type").get<std::string>();
  if (type == "table") {
    std::vector<std::string> parents = j.contains("parents") ? string_list(j["parents"]) : std::vector<std::string>{};
    return cpd::table(std::move(parents), field(j, "rows").get<std::vector<std::vector<double>>>());
  }
  if (type == "beta") return cpd::beta(expr_from_json(field(j, "alpha")), expr_from_json(field(j, "beta")));
  if (type == "binomial") return cpd::binomial(expr_from_json(field(j, "n")), expr_from_json(field(j, "p")));
  if (type == "uniform") return cpd::uniform(expr_from_json(field(j, "a")), expr_from_json(field(j, "b")));
  if (type == "tnormal") {
    return cpd::tnormal(expr_from_json(field(j, "mean")), expr_from_json(field(j, "variance")),
                        j.value("lo", 0.0), j.value("hi", 1.0));
  }
  if (type == "deterministic") return cpd::deterministic(expr_from_json(field(j, "value")));
  if (type == "partitioned") {
    std::vector<CpdExpr> cases;
    for (const auto& s : field(j, "cases")) cases.push_back(cpd_from_json(s));
    return cpd::partitioned(field(j, "parent").get<std::string>(), std::move(cases));
  }
  if (type == "mixture") {
    std::vector<CpdExpr> comps;
    for (const auto& s : field(j, "components")) comps.push_back(cpd_from_json(s));
    return cpd::mixture(field(j, "weights").get<std::vector<double>>(), std::move(comps));
  }
  parse_error("unknown CPD type '" + type + "'");
}

json kind_to_json(const NodeKind& k) {
  json j;
  j["type"] = kind_name(k);
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Labelled> || std::is_same_v<T, Ranked>) {
          j["states"] = v.states;
        } else if constexpr (std::is_same_v<T, Continuous>) {
          j["lo"] = v.lo;
          j["hi"] = v.hi;
        } else if constexpr (std::is_same_v<T, Count>) {
          j["n_max"] = v.n_max;
        }
      },
      k);
  return j;
}

NodeKind kind_from_json(const json& j) {
  const auto type = field(j, "type").get<std::string>();
  if (type == "labelled") return Labelled{string_list(field(j, "states"))};
  if (type == "ranked") return Ranked{string_list(field(j, "states"))};
  if (type == "boolean") return Boolean{};
  if (type == "continuous") return Continuous{field(j, "lo").get<double>(), field(j, "hi").get<double>()};
  if (type == "count") return Count{field(j, "n_max").get<std::int64_t>()};
  parse_error("unknown node kind '" + type + "'");
}

json model_to_json(const ModelSpec& m) {
  json nodes = json::array();
  for (const auto& n : m.nodes()) {
    nodes.push_back(json{{"id", n.id}, {"kind", kind_to_json(n.kind)}, {"cpd", cpd_to_json(n.cpd)}});
  }
  json edges = json::array();
  for (const auto& [p, c] : m.edges()) edges.push_back(json::array({p, c}));
  return json{{"schema_version", kModelSchemaVersion}, {"nodes", nodes}, {"edges", edges}};
}

ModelSpec model_from_json(const json& j) {
  try {
    if (j.contains("schema_version") && j["schema_version"].get<int>() != kModelSchemaVersion) {
      parse_error("unsupported model schema_version " + j["schema_version"].dump());
    }
    ModelSpec m;
    for (const auto& n : field(j, "nodes")) {
      m.add_node(NodeSpec{field(n, "id").get<std::string>(), kind_from_json(field(n, "kind")),
                          cpd_from_json(field(n, "cpd"))});
    }
    for (const auto& e : field(j, "edges")) {
      if (e.is_array() && e.size() == 2) {
        m.add_edge(e[0].get<std::string>(), e[1].get<std::string>());
      } else {
        m.add_edge(field(e, "parent").get<std::string>(), field(e, "child").get<std::string>());
      }
    }
    return m;
  } catch (const json::exception& ex) {
    parse_error(ex.what());
  }
}

}  // namespace riskbn
