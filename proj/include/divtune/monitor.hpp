#pragma once

// Online workload monitor: a sliding window over the incoming statements,
// re-tuned after every statement, and the improvement the window's design
// would bring over the currently materialized one.

#include <chrono>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stop_token>
#include <string>
#include <variant>
#include <vector>

#include "divtune/costmodel.hpp"
#include "divtune/error.hpp"
#include "divtune/json_io.hpp"
#include "divtune/model.hpp"
#include "divtune/recommender.hpp"
#include "divtune/routing.hpp"

namespace divtune {

using Statement = std::variant<QueryStatement, UpdateStatement>;

inline const StatementId& statement_id(const Statement& s) {
  return std::visit([](const auto& v) -> const StatementId& { return v.id; }, s);
}

inline void to_json(json& j, const Statement& s) {
  if (const auto* q = std::get_if<QueryStatement>(&s)) {
    j = json{{"query", *q}};
  } else {
    j = json{{"update", std::get<UpdateStatement>(s)}};
  }
}

inline void from_json(const json& j, Statement& s) {
  if (j.contains("query")) {
    s = j.at("query").get<QueryStatement>();
  } else if (j.contains("update")) {
    s = j.at("update").get<UpdateStatement>();
  } else {
    throw Error("invalid_request", "statement needs a \"query\" or \"update\" member");
  }
}

struct MonitorConfig {
  Catalog catalog;
  int window = 60;
  int replicas = 2;
  int multiplicity = 1;
  std::optional<double> space_budget;
  double time_limit = 2.0;
  double gap_tolerance = 0.05;
  RoutingCardinality routing_mode = RoutingCardinality::kMin;
};

inline void to_json(json& j, const MonitorConfig& c) {
  j = json{{"catalog", c.catalog},          {"window", c.window},
           {"replicas", c.replicas},        {"multiplicity", c.multiplicity},
           {"time_limit", c.time_limit},    {"gap_tolerance", c.gap_tolerance},
           {"routing_mode", to_string(c.routing_mode)}};
  if (c.space_budget) j["space_budget"] = *c.space_budget;
}

inline void from_json(const json& j, MonitorConfig& c) {
  c.catalog = j.at("catalog").get<Catalog>();
  c.window = j.value("window", 60);
  c.replicas = j.value("replicas", 2);
  c.multiplicity = j.value("multiplicity", 1);
  if (j.contains("space_budget") && !j.at("space_budget").is_null()) c.space_budget = j.at("space_budget").get<double>();
  c.time_limit = j.value("time_limit", 2.0);
  c.gap_tolerance = j.value("gap_tolerance", 0.05);
  if (j.contains("routing_mode")) c.routing_mode = routing_cardinality_from_string(j.at("routing_mode").get<std::string>());
}

struct SeriesEntry {
  long statement_index = 0;  // 0-based position in the stream
  double improvement = 0.0;
  double solve_time = 0.0;
  std::string status;  // solver status, or "timeout" when no design was found
};

inline void to_json(json& j, const SeriesEntry& e) {
  j = json{{"statement_index", e.statement_index}, {"improvement", e.improvement}, {"solve_time", e.solve_time},
           {"status", e.status}};
}

inline void from_json(const json& j, SeriesEntry& e) {
  e.statement_index = j.at("statement_index").get<long>();
  e.improvement = j.at("improvement").get<double>();
  e.solve_time = j.at("solve_time").get<double>();
  e.status = j.at("status").get<std::string>();
}

struct MonitorState {
  std::deque<Statement> window;
  DivergentDesign current_design;
  std::optional<DivergentDesign> latest_slide_design;
  std::vector<SeriesEntry> series;
};

inline void to_json(json& j, const MonitorState& s) {
  j = json{{"window", std::vector<Statement>(s.window.begin(), s.window.end())},
           {"current_design", s.current_design},
           {"series", s.series}};
  j["latest_slide_design"] = s.latest_slide_design ? json(*s.latest_slide_design) : json(nullptr);
}

inline void from_json(const json& j, MonitorState& s) {
  const auto w = j.at("window").get<std::vector<Statement>>();
  s.window.assign(w.begin(), w.end());
  s.current_design = j.at("current_design").get<DivergentDesign>();
  if (j.contains("latest_slide_design") && !j.at("latest_slide_design").is_null()) {
    s.latest_slide_design = j.at("latest_slide_design").get<DivergentDesign>();
  }
  s.series = j.at("series").get<std::vector<SeriesEntry>>();
}

// The window as a workload: repeated statements are merged and their weights
// added up.
inline Workload window_workload(const Catalog& catalog, const std::deque<Statement>& window) {
  Workload w;
  w.catalog = catalog;
  std::map<StatementId, std::size_t> qpos, upos;
  for (const auto& s : window) {
    if (const auto* q = std::get_if<QueryStatement>(&s)) {
      auto [it, fresh] = qpos.emplace(q->id, w.queries.size());
      if (fresh) {
        w.queries.push_back(*q);
      } else {
        w.queries[it->second].weight += q->weight;
      }
    } else {
      const auto& u = std::get<UpdateStatement>(s);
      auto [it, fresh] = upos.emplace(u.id, w.updates.size());
      if (fresh) {
        w.updates.push_back(u);
      } else {
        w.updates[it->second].weight += u.weight;
      }
    }
  }
  return w;
}

// `configs` with every query of `model` routed to its m cheapest replicas.
inline DivergentDesign reroute(const CostModel& model, const DivergentDesign& configs, int m) {
  DivergentDesign d;
  d.configs = configs.configs;
  d.dropped = configs.dropped;
  for (int q = 0; q < model.query_count(); ++q) {
    d.routing.normal[model.statement(q).id] = top_m(replica_costs(model, model.statement(q), d), m);
  }
  return d;
}

// Single-writer state machine. observe() calls are serialized; series() may
// be read concurrently.
class Monitor {
 public:
  explicit Monitor(MonitorConfig config, std::optional<DivergentDesign> current = std::nullopt) : config_(std::move(config)) {
    if (config_.window < 1) throw Error("invalid_request", "window must be >= 1");
    if (config_.multiplicity < 1 || config_.multiplicity > config_.replicas) {
      throw Error("invalid_request", "need 1 <= multiplicity <= replicas");
    }
    if (current) {
      if (current->replica_count() != config_.replicas) throw Error("invalid_request", "current design has the wrong replica count");
      state_.current_design = *current;
    } else {
      state_.current_design.configs.assign(config_.replicas, {});
    }
  }

  Monitor(MonitorConfig config, MonitorState state) : config_(std::move(config)), state_(std::move(state)) {}

  const MonitorConfig& config() const { return config_; }

  SeriesEntry observe(const Statement& stmt, std::stop_token stop = {}) {
    std::unique_lock lock(mutex_);
    return observe_locked(stmt, stop);
  }

  // Like observe(), but returns nullopt instead of waiting when another
  // writer holds the monitor.
  std::optional<SeriesEntry> try_observe(const Statement& stmt, std::stop_token stop = {}) {
    std::unique_lock lock(mutex_, std::try_to_lock);
    if (!lock.owns_lock()) return std::nullopt;
    return observe_locked(stmt, stop);
  }

  std::vector<SeriesEntry> series() const {
    std::shared_lock lock(mutex_);
    return state_.series;
  }

  MonitorState snapshot() const {
    std::shared_lock lock(mutex_);
    return state_;
  }

  // Replaces the materialized design, e.g. after the DBA adopts a
  // recommendation.
  void set_current_design(DivergentDesign d) {
    std::unique_lock lock(mutex_);
    if (d.replica_count() != config_.replicas) throw Error("invalid_request", "design has the wrong replica count");
    state_.current_design = std::move(d);
  }

 private:
  SeriesEntry observe_locked(const Statement& stmt, std::stop_token stop) {
    state_.window.push_back(stmt);
    while (static_cast<int>(state_.window.size()) > config_.window) state_.window.pop_front();

    TuningRequest req;
    req.workload = window_workload(config_.catalog, state_.window);
    req.replicas = config_.replicas;
    req.multiplicity = config_.multiplicity;
    req.constraints.space_budget = config_.space_budget;
    req.solver.time_limit = config_.time_limit;
    req.solver.gap_tolerance = config_.gap_tolerance;
    req.routing_mode = config_.routing_mode;
    const auto violations = validate_request(req);
    if (!violations.empty()) {
      state_.window.pop_back();
      throw Error("invalid_request", violations.front().field + ": " + violations.front().rule);
    }
    const CostModel model(req.workload);

    SeriesEntry e;
    e.statement_index = static_cast<long>(state_.series.size());
    const auto t0 = std::chrono::steady_clock::now();
    TuneOptions opt;
    opt.stop = stop;
    opt.detect_binding = false;
    if (state_.latest_slide_design) opt.warm_start = reroute(model, *state_.latest_slide_design, config_.multiplicity);
    try {
      TuneResult r = tune(req, opt);
      e.status = to_string(r.report.status);
      state_.latest_slide_design = std::move(r.design);
    } catch (const Error& err) {
      if (err.code() != "timeout") throw;
      e.status = "timeout";
    }
    e.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const DivergentDesign current = reroute(model, state_.current_design, config_.multiplicity);
    const double base = exp_total_cost(current, model, config_.multiplicity, 0.0);
    if (state_.latest_slide_design) {
      const DivergentDesign slide = reroute(model, *state_.latest_slide_design, config_.multiplicity);
      e.improvement = improvement(exp_total_cost(slide, model, config_.multiplicity, 0.0), base);
    }
    state_.series.push_back(e);
    return e;
  }

  MonitorConfig config_;
  MonitorState state_;
  mutable std::shared_mutex mutex_;
};

}  // namespace divtune
