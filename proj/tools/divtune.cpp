// divtune command-line tool. Every subcommand reads and writes the JSON
// formats in docs/formats.md; failures print {"error": {...}} on stderr and
// exit nonzero.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "divtune/api.hpp"
#include "divtune/monitor.hpp"
#include "divtune/scenarios.hpp"
#include "divtune/service.hpp"

namespace fs = std::filesystem;
using namespace divtune;

namespace {

// Flags shared by tune, oracle and export-lp. --request supplies a complete
// TuningRequest; the individual flags override its fields.
struct RequestFlags {
  std::string request_file;
  std::string workload_file;
  std::string current_file;
  std::optional<int> replicas;
  std::optional<int> multiplicity;
  std::optional<double> alpha;
  std::optional<double> tau;
  std::string skew_mode = "exact";
  std::optional<double> failure_tau;
  std::optional<double> budget;
  std::optional<double> materialization_budget;
  std::optional<int> target_replicas;
  std::optional<double> deploy_cost;
  std::optional<double> update_fraction;
  std::optional<double> update_reference;
  std::optional<double> gap;
  std::optional<double> time_limit;
  std::string routing_mode;

  void add(CLI::App* app) {
    app->add_option("--request", request_file, "TuningRequest JSON");
    app->add_option("--workload,-w", workload_file, "workload JSON");
    app->add_option("--replicas,-N", replicas, "number of replicas N");
    app->add_option("-m,--multiplicity", multiplicity, "routing multiplicity m");
    app->add_option("--alpha", alpha, "replica failure probability");
    app->add_option("--tau", tau, "load-skew bound");
    app->add_option("--skew-mode", skew_mode, "exact | greedy")->check(CLI::IsMember({"exact", "greedy"}));
    app->add_option("--failure-tau", failure_tau, "load-skew bound under a single failure");
    app->add_option("--budget,-b", budget, "space budget per replica");
    app->add_option("--current", current_file, "currently materialized design JSON");
    app->add_option("--materialization-budget", materialization_budget, "per-replica transition budget (needs --current)");
    app->add_option("--target-replicas", target_replicas, "replica count after the transition");
    app->add_option("--deploy-cost", deploy_cost, "cost of deploying a new replica");
    app->add_option("--update-fraction", update_fraction, "update cost bound as a fraction of the reference");
    app->add_option("--update-reference", update_reference, "reference update cost (default: UNIF's)");
    app->add_option("--gap", gap, "relative gap tolerance");
    app->add_option("--time-limit", time_limit, "solver time limit in seconds");
    app->add_option("--routing-mode", routing_mode, "min | paper_literal")->check(CLI::IsMember({"min", "paper_literal"}));
  }

  json build() const {
    json j;
    if (!request_file.empty()) {
      j = read_json_file(request_file);
    } else if (workload_file.empty()) {
      throw Error("invalid_request", "need --request or --workload");
    } else {
      j = json{{"replicas", 1}};
    }
    if (!workload_file.empty()) j["workload"] = read_json_file(workload_file);
    if (replicas) j["replicas"] = *replicas;
    if (multiplicity) j["multiplicity"] = *multiplicity;
    if (alpha) j["failure_prob"] = *alpha;
    json& c = j["constraints"];
    if (c.is_null()) c = json::object();
    if (budget) c["space_budget"] = *budget;
    if (tau) c["load_skew"] = json{{"tau", *tau}, {"mode", skew_mode}};
    if (failure_tau) c["failure_load_skew"] = *failure_tau;
    if (update_fraction) {
      c["update_cost_bound"] = json{{"fraction", *update_fraction}};
      if (update_reference) c["update_cost_bound"]["reference"] = *update_reference;
    }
    if (materialization_budget) {
      if (current_file.empty()) throw Error("invalid_request", "--materialization-budget needs --current");
      c["materialization"] = json{{"budget", *materialization_budget}, {"current", read_json_file(current_file)}};
      if (target_replicas) c["materialization"]["target_replicas"] = *target_replicas;
      if (deploy_cost) c["materialization"]["deploy_cost"] = *deploy_cost;
    }
    json& s = j["solver"];
    if (s.is_null()) s = json::object();
    if (gap) s["gap_tolerance"] = *gap;
    if (time_limit) s["time_limit"] = *time_limit;
    if (!routing_mode.empty()) j["routing_cardinality_mode"] = routing_mode;
    return j;
  }
};

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    write_text_file(path, text);
  }
}

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::stringstream in(csv);
  for (std::string tok; std::getline(in, tok, ',');) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

int fail(const std::string& code, const std::string& message) {
  std::cerr << api::error_document(code, message).dump() << "\n";
  return code == "infeasible" ? 3 : code == "timeout" ? 4 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"divtune: replication-aware divergent index design tuning"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "seed for every randomized path")->capture_default_str();

  // tune
  RequestFlags tune_flags;
  std::string tune_out = ".";
  auto* tune = app.add_subcommand("tune", "solve a tuning request; writes design.json and report.json");
  tune_flags.add(tune);
  tune->add_option("--out-dir,-o", tune_out, "output directory")->capture_default_str();

  // pareto
  std::string pareto_request, pareto_dims, pareto_fractions, pareto_thresholds, pareto_out;
  std::vector<int> pareto_replicas, pareto_mult;
  bool pareto_parallel = false;
  auto* par = app.add_subcommand("pareto", "explore materialization budget x replicas x multiplicity");
  par->add_option("--request", pareto_request, "TuningRequest JSON with a materialization constraint")->required();
  par->add_option("--dimensions", pareto_dims, "ParetoDimensions JSON");
  par->add_option("--fractions", pareto_fractions, "comma-separated fractions of C_m");
  par->add_option("--thresholds", pareto_thresholds, "comma-separated absolute budgets");
  par->add_option("--replica-counts", pareto_replicas, "replica counts")->delimiter(',');
  par->add_option("--multiplicities", pareto_mult, "multiplicities")->delimiter(',');
  par->add_flag("--parallel", pareto_parallel, "solve grid points independently in parallel");
  par->add_option("--out,-o", pareto_out, "output file (default stdout)");

  // baseline
  std::string base_kind, base_workload, base_out;
  int base_n = 1, base_m = 1, base_runs = 5;
  std::optional<double> base_budget;
  auto* base = app.add_subcommand("baseline", "UNIF or simplified DivgDesign reference design");
  base->add_option("--kind", base_kind, "unif | divg")->required()->check(CLI::IsMember({"unif", "divg"}));
  base->add_option("--workload,-w", base_workload, "workload JSON")->required();
  base->add_option("--replicas,-N", base_n, "number of replicas")->required();
  base->add_option("-m,--multiplicity", base_m, "routing multiplicity");
  base->add_option("--budget,-b", base_budget, "space budget per replica");
  base->add_option("--runs", base_runs, "DivgDesign random restarts")->capture_default_str();
  base->add_option("--out,-o", base_out, "output file (default stdout)");

  // route
  std::string route_workload, route_design, route_query, route_method = "top_m", route_out;
  int route_m = 1;
  auto* route = app.add_subcommand("route", "route a query onto a materialized design");
  route->add_option("--workload,-w", route_workload, "training workload JSON")->required();
  route->add_option("--design,-d", route_design, "design JSON")->required();
  route->add_option("--query,-q", route_query, "query JSON (template plans)")->required();
  route->add_option("-m,--multiplicity", route_m, "routing multiplicity");
  route->add_option("--method", route_method, "top_m | similarity")->check(CLI::IsMember({"top_m", "similarity"}));
  route->add_option("--out,-o", route_out, "output file (default stdout)");

  // monitor replay
  std::string mon_config, mon_stream, mon_current, mon_out;
  bool mon_synthetic = false;
  int mon_phase = 200, mon_window = 60;
  auto* mon = app.add_subcommand("monitor", "online monitor");
  mon->require_subcommand(1);
  auto* replay = mon->add_subcommand("replay", "feed a statement stream through the monitor; writes the series");
  replay->add_option("--config", mon_config, "MonitorConfig JSON");
  replay->add_option("--stream", mon_stream, "JSON array of statements");
  replay->add_option("--current", mon_current, "materialized design JSON");
  replay->add_flag("--synthetic", mon_synthetic, "replay the built-in three-phase stream");
  replay->add_option("--phase-length", mon_phase, "statements per phase (--synthetic)")->capture_default_str();
  replay->add_option("--window", mon_window, "window length (--synthetic)")->capture_default_str();
  replay->add_option("--out,-o", mon_out, "output file (default stdout)");

  // oracle
  RequestFlags oracle_flags;
  std::string oracle_out;
  auto* orc = app.add_subcommand("oracle", "brute-force optimum of a tiny request (fixture pair)");
  oracle_flags.add(orc);
  orc->add_option("--out,-o", oracle_out, "output file (default stdout)");

  // export-lp
  RequestFlags lp_flags;
  std::string lp_out;
  auto* lp = app.add_subcommand("export-lp", "write the binary program in CPLEX LP format");
  lp_flags.add(lp);
  lp->add_option("--out,-o", lp_out, "output file (default stdout)");

  // bench
  std::string bench_out = "bench";
  std::string bench_scenario = "all";
  auto* bench = app.add_subcommand("bench", "run the synthetic benchmark scenarios; writes CSV and JSON series");
  bench->add_option("--out-dir,-o", bench_out, "output directory")->capture_default_str();
  bench->add_option("--scenario", bench_scenario, "all | divergent | update | failure | monitor | pareto")
      ->check(CLI::IsMember({"all", "divergent", "update", "failure", "monitor", "pareto"}));

  // serve
  std::string serve_host = "127.0.0.1", serve_data;
  int serve_port = 8080, serve_workers = 2;
  auto* serve = app.add_subcommand("serve", "HTTP+JSON service");
  serve->add_option("--host", serve_host)->capture_default_str();
  serve->add_option("--port", serve_port)->capture_default_str();
  serve->add_option("--workers", serve_workers, "solver worker threads")->capture_default_str();
  serve->add_option("--data-dir", serve_data, "session store (default $DIVTUNE_DATA_DIR or ./divtune-data)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("invalid_request", e.what());
  }

  try {
    if (*tune) {
      const json result = api::tune(tune_flags.build());
      fs::create_directories(tune_out);
      json report = result;
      report.erase("design");
      write_text_file((fs::path(tune_out) / "design.json").string(), dump(result["design"]));
      write_text_file((fs::path(tune_out) / "report.json").string(), dump(report));
      std::cout << dump(json{{"design", (fs::path(tune_out) / "design.json").string()},
                             {"report", (fs::path(tune_out) / "report.json").string()},
                             {"status", result["solve"]["status"]},
                             {"exp_total_cost", result["cost"]["total"]}});
    } else if (*par) {
      json dims = pareto_dims.empty() ? json::object() : read_json_file(pareto_dims);
      if (!pareto_fractions.empty()) dims["fractions"] = parse_doubles(pareto_fractions);
      if (!pareto_thresholds.empty()) dims["thresholds"] = parse_doubles(pareto_thresholds);
      if (!pareto_replicas.empty()) dims["replica_counts"] = pareto_replicas;
      if (!pareto_mult.empty()) dims["multiplicities"] = pareto_mult;
      if (pareto_parallel) dims["chain_warm_start"] = false;
      write_out(pareto_out, dump(api::pareto(json{{"request", read_json_file(pareto_request)}, {"dimensions", dims}})));
    } else if (*base) {
      json body{{"kind", base_kind}, {"workload", read_json_file(base_workload)}, {"replicas", base_n},
                {"multiplicity", base_m}, {"runs", base_runs}};
      if (base_budget) body["space_budget"] = *base_budget;
      write_out(base_out, dump(api::baseline(body, seed)));
    } else if (*route) {
      json body{{"workload", read_json_file(route_workload)}, {"design", read_json_file(route_design)},
                {"query", read_json_file(route_query)}, {"multiplicity", route_m}, {"method", route_method}};
      write_out(route_out, dump(api::route(body)));
    } else if (*replay) {
      if (mon_synthetic) {
        const auto run = scenarios::monitor_run(mon_phase, mon_window, seed);
        write_out(mon_out, dump(json{{"series", run.series}, {"max_observe_seconds", run.max_latency}}));
      } else {
        if (mon_config.empty() || mon_stream.empty()) throw Error("invalid_request", "need --config and --stream, or --synthetic");
        const auto cfg = api::decode<MonitorConfig>(read_json_file(mon_config), "config");
        const auto stream = api::decode<std::vector<Statement>>(read_json_file(mon_stream), "stream");
        std::optional<DivergentDesign> current;
        if (!mon_current.empty()) current = api::decode<DivergentDesign>(read_json_file(mon_current), "current");
        Monitor m(cfg, current);
        for (const auto& s : stream) m.observe(s);
        write_out(mon_out, dump(json{{"series", m.series()}}));
      }
    } else if (*orc) {
      write_out(oracle_out, dump(api::oracle(oracle_flags.build())));
    } else if (*lp) {
      write_out(lp_out, api::export_lp(lp_flags.build()));
    } else if (*bench) {
      fs::create_directories(bench_out);
      auto emit = [&](const std::string& name, const std::vector<scenarios::Row>& rows, const json& summary) {
        write_text_file((fs::path(bench_out) / (name + ".csv")).string(), scenarios::to_csv(rows));
        write_text_file((fs::path(bench_out) / (name + ".json")).string(), dump(summary));
        std::cout << (fs::path(bench_out) / name).string() << ".{csv,json}\n";
      };
      const bool all = bench_scenario == "all";
      if (all || bench_scenario == "divergent") {
        const auto r = scenarios::divergent_vs_uniform(seed);
        emit("divergent_vs_uniform", r.rows,
             json{{"tuned", r.tuned}, {"unif", r.unif}, {"divg_simplified", r.divg}, {"divg_full", r.divg_full}, {"unif_full", r.unif_full}});
      }
      if (all || bench_scenario == "update") {
        const auto r = scenarios::update_bound();
        emit("update_bound", r.rows,
             json{{"fraction", r.fraction}, {"reference", r.reference}, {"tuned_update", r.tuned_update},
                  {"tuned_query", r.tuned_query}, {"unif_query", r.unif_query}});
      }
      if (all || bench_scenario == "failure") {
        const auto r = scenarios::failure_robustness();
        emit("failure_robustness", r.rows,
             json{{"alphas", r.alphas}, {"tuned", r.tuned}, {"tuned_variation", r.tuned_variation},
                  {"oblivious_degradation", r.oblivious_degradation}});
      }
      if (all || bench_scenario == "monitor") {
        const auto r = scenarios::monitor_run(200, 60, seed);
        std::vector<double> series;
        for (const auto& e : r.series) series.push_back(e.improvement);
        emit("monitor", r.rows, json{{"improvement", series}, {"max_observe_seconds", r.max_latency}});
      }
      if (all || bench_scenario == "pareto") {
        const auto r = scenarios::pareto_run();
        emit("pareto", r.rows, json(r.result));
      }
    } else if (*serve) {
      ServiceConfig cfg;
      cfg.data_dir = serve_data;
      cfg.workers = serve_workers;
      cfg.seed = seed;
      Service service(cfg);
      std::cerr << "divtune serving on " << serve_host << ":" << serve_port << ", data in " << service.data_dir() << "\n";
      service.listen(serve_host, serve_port);
    }
  } catch (const Error& e) {
    return fail(e.code(), e.what());
  } catch (const json::exception& e) {
    return fail("invalid_request", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
