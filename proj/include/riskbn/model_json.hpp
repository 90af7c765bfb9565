#pragma once

#include <json.hpp>

#include "riskbn/model.hpp"

namespace riskbn {

/// Model documents: `{"schema_version": 1, "nodes": [...], "edges": [[p, c], ...]}`.
/// Expressions are a number, a parent id string, or `{"op": name, "args": [...]}`;
/// CPDs are objects tagged by `"type"`.
inline constexpr int kModelSchemaVersion = 1;

nlohmann::json expr_to_json(const Expr& e);
Expr expr_from_json(const nlohmann::json& j);

nlohmann::json cpd_to_json(const CpdExpr& c);
CpdExpr cpd_from_json(const nlohmann::json& j);

nlohmann::json kind_to_json(const NodeKind& k);
NodeKind kind_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const ModelSpec& m);
/// Throws Error(Parse) on malformed documents and the usual graph errors on
/// duplicate ids, unknown endpoints or cycles.
ModelSpec model_from_json(const nlohmann::json& j);

}  // namespace riskbn
