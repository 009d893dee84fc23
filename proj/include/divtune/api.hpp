#pragma once

// JSON-in, JSON-out operations shared by the CLI and the HTTP service, so
// both produce the same documents for the same request.

#include <cstdint>
#include <stop_token>
#include <string>

#include "divtune/baselines.hpp"
#include "divtune/costmodel.hpp"
#include "divtune/error.hpp"
#include "divtune/json_io.hpp"
#include "divtune/oracle.hpp"
#include "divtune/program.hpp"
#include "divtune/recommender.hpp"
#include "divtune/routing.hpp"

namespace divtune::api {

inline json error_document(const std::string& code, const std::string& message) {
  return json{{"error", {{"code", code}, {"message", message}}}};
}

inline int http_status(const std::string& code) {
  if (code == "invalid_request" || code == "parse" || code == "invalid_argument" || code == "unusable_statement" ||
      code == "incomplete_routing" || code == "caps_exceeded" || code == "unroutable" || code == "unsupported") {
    return 400;
  }
  if (code == "not_found") return 404;
  if (code == "conflict" || code == "cancelled") return 409;
  if (code == "infeasible") return 422;
  if (code == "busy") return 503;
  if (code == "timeout") return 504;
  return 500;
}

// Decodes `j` as T, turning JSON type and key errors into invalid_request.
template <typename T>
T decode(const json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw Error("invalid_request", what + ": " + e.what());
  }
}

inline const json& member(const json& body, const char* key) {
  if (!body.is_object() || !body.contains(key)) throw Error("invalid_request", std::string("missing member \"") + key + "\"");
  return body.at(key);
}

inline TuningRequest checked_request(const json& j) {
  TuningRequest req = decode<TuningRequest>(j, "request");
  const auto v = validate_request(req);
  if (!v.empty()) throw Error("invalid_request", v.front().field + ": " + v.front().rule);
  return req;
}

// Body: a TuningRequest document.
inline json tune(const json& body, std::stop_token stop = {}) {
  TuneOptions o;
  o.stop = stop;
  return json(divtune::tune(checked_request(body), o));
}

// Body: {"request": TuningRequest, "dimensions": ParetoDimensions}.
inline json pareto(const json& body, std::stop_token stop = {}) {
  const TuningRequest req = checked_request(member(body, "request"));
  const ParetoDimensions dims = body.contains("dimensions") ? decode<ParetoDimensions>(body.at("dimensions"), "dimensions")
                                                            : ParetoDimensions{};
  return json(divtune::pareto(req, dims, stop));
}

// Body: {"workload", "design", "query", "multiplicity"?, "method"?}.
// method "top_m" (default) evaluates the query on every replica; "similarity"
// reuses the routing of the most similar training query.
inline json route(const json& body) {
  const Workload w = decode<Workload>(member(body, "workload"), "workload");
  const DivergentDesign d = decode<DivergentDesign>(member(body, "design"), "design");
  const QueryStatement q = decode<QueryStatement>(member(body, "query"), "query");
  const int m = body.value("multiplicity", 1);
  const std::string method = body.value("method", "top_m");
  if (m < 1 || m > d.replica_count()) throw Error("invalid_request", "need 1 <= multiplicity <= replicas");
  const CostModel model(w);
  const Router router(model, d, m);
  if (method == "top_m") return json(router.route_top_m(q));
  if (method == "similarity") return json(router.route_by_similarity(q));
  throw Error("invalid_request", "unknown routing method: " + method);
}

// Body: {"workload", "replicas", "multiplicity"?, "space_budget"?, "kind",
// "runs"?}. The seed only affects kind "divg".
inline json baseline(const json& body, std::uint64_t seed) {
  const Workload w = decode<Workload>(member(body, "workload"), "workload");
  const int n = member(body, "replicas").get<int>();
  const int m = body.value("multiplicity", 1);
  const std::string kind = member(body, "kind").get<std::string>();
  std::optional<double> budget;
  if (body.contains("space_budget") && !body.at("space_budget").is_null()) budget = body.at("space_budget").get<double>();
  if (n < 1 || m < 1 || m > n) throw Error("invalid_request", "need 1 <= multiplicity <= replicas");
  const CostModel model(w);
  DivergentDesign d;
  std::string label;
  if (kind == "unif") {
    d = unif(model, n, m, budget);
    label = "UNIF";
  } else if (kind == "divg") {
    DivgDesignOptions o;
    o.seed = seed;
    o.runs = body.value("runs", o.runs);
    d = divgdesign(model, n, m, budget, o);
    label = "DivgDesign (simplified)";
  } else {
    throw Error("invalid_request", "unknown baseline kind: " + kind);
  }
  return json{{"kind", kind}, {"label", label}, {"seed", seed}, {"design", d},
              {"cost", DesignEvaluator(model, d, m).breakdown(0.0)}};
}

// Body: a TuningRequest document. Returns the fixture pair: the request and
// the brute-force optimum.
inline json oracle(const json& body) {
  const TuningRequest req = checked_request(body);
  const OracleResult r = enumerate_optimal(req);
  return json{{"request", req},
              {"oracle", {{"design", r.design}, {"objective", r.objective}, {"cost", r.cost},
                          {"designs_evaluated", r.designs_evaluated}}}};
}

// Body: a TuningRequest document. Returns the LP text of the composed
// program.
inline std::string export_lp(const json& body) {
  TuningRequest req = checked_request(body);
  auto model = std::make_shared<const CostModel>(req.workload);
  req = resolve_request(req, *model);
  return write_lp(compose_program(req, model).bp);
}

}  // namespace divtune::api
