#pragma once

// HTTP+JSON service. Solves run as jobs on a bounded worker pool; the
// synchronous endpoints submit a job and wait for it. See docs/api.md.

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"

#include "divtune/api.hpp"
#include "divtune/monitor.hpp"

namespace divtune {

struct ServiceConfig {
  std::string data_dir;  // empty: $DIVTUNE_DATA_DIR, else ./divtune-data
  int workers = 2;
  int max_queued = 32;
  std::uint64_t seed = 1;
};

inline std::string default_data_dir() {
  const char* env = std::getenv("DIVTUNE_DATA_DIR");
  return env && *env ? env : "divtune-data";
}

class WorkerPool {
 public:
  WorkerPool(int workers, int max_queued) : max_queued_(max_queued) {
    for (int i = 0; i < std::max(1, workers); ++i) {
      threads_.emplace_back([this](std::stop_token st) { run(st); });
    }
  }
  ~WorkerPool() {
    for (auto& t : threads_) t.request_stop();
    cv_.notify_all();
  }

  // False when the queue is full.
  bool submit(std::function<void()> task) {
    {
      std::lock_guard lock(mutex_);
      if (static_cast<int>(queue_.size()) >= max_queued_) return false;
      queue_.push_back(std::move(task));
    }
    cv_.notify_one();
    return true;
  }

 private:
  void run(std::stop_token st) {
    while (true) {
      std::function<void()> task;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, st, [&] { return !queue_.empty(); });
        if (st.stop_requested()) return;
        task = std::move(queue_.front());
        queue_.pop_front();
      }
      task();
    }
  }

  int max_queued_;
  std::mutex mutex_;
  std::condition_variable_any cv_;
  std::deque<std::function<void()>> queue_;
  std::vector<std::jthread> threads_;
};

struct Job {
  std::string id;
  std::string kind;
  std::string status = "queued";  // queued | running | done | failed | cancelled
  json result;
  json error;
  std::stop_source stop;
  std::chrono::steady_clock::time_point submitted = std::chrono::steady_clock::now();
  double run_time = 0.0;
  bool finished = false;
};

inline void to_json(json& j, const Job& job) {
  j = json{{"id", job.id}, {"kind", job.kind}, {"status", job.status}, {"finished", job.finished}, {"run_time", job.run_time}};
  if (!job.result.is_null()) j["result"] = job.result;
  if (!job.error.is_null()) j["error"] = job.error["error"];
}

class Service {
 public:
  explicit Service(ServiceConfig config = {})
      : config_(std::move(config)), pool_(config_.workers, config_.max_queued) {
    if (config_.data_dir.empty()) config_.data_dir = default_data_dir();
    std::filesystem::create_directories(sessions_dir());
    install_routes();
  }

  ~Service() { stop(); }

  // Binds to `host`:`port` (port 0: any free port) and serves on a
  // background thread. Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("io", "cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  // Serves on the calling thread.
  void listen(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw Error("io", "cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
    std::lock_guard lock(jobs_mutex_);
    for (auto& [id, job] : jobs_) job->stop.request_stop();
  }

  const std::string& data_dir() const { return config_.data_dir; }

 private:
  using Handler = std::function<json(const json&, std::stop_token)>;

  std::filesystem::path sessions_dir() const { return std::filesystem::path(config_.data_dir) / "sessions"; }

  static void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(dump(body), "application/json");
  }

  static void send_error(httplib::Response& res, const std::string& code, const std::string& message) {
    send(res, api::http_status(code), api::error_document(code, message));
  }

  static json parse_body(const httplib::Request& req) {
    try {
      return req.body.empty() ? json::object() : json::parse(req.body);
    } catch (const json::exception& e) {
      throw Error("parse", std::string("request body: ") + e.what());
    }
  }

  // Runs `fn` and turns failures into error responses.
  static void guarded(httplib::Response& res, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const json::exception& e) {
      send_error(res, "invalid_request", e.what());
    } catch (const std::exception& e) {
      send_error(res, "internal", e.what());
    }
  }

  std::shared_ptr<Job> submit(const std::string& kind, json body, Handler handler) {
    auto job = std::make_shared<Job>();
    job->kind = kind;
    {
      std::lock_guard lock(jobs_mutex_);
      job->id = kind + "-" + std::to_string(++next_job_);
      jobs_[job->id] = job;
    }
    const bool queued = pool_.submit([this, job, body = std::move(body), handler = std::move(handler)] {
      {
        std::lock_guard lock(jobs_mutex_);
        if (job->status == "cancelled") {
          job->finished = true;
          jobs_cv_.notify_all();
          return;
        }
        job->status = "running";
      }
      const auto t0 = std::chrono::steady_clock::now();
      json result, error;
      try {
        result = handler(body, job->stop.get_token());
      } catch (const Error& e) {
        error = api::error_document(e.code(), e.what());
      } catch (const std::exception& e) {
        error = api::error_document("internal", e.what());
      }
      std::lock_guard lock(jobs_mutex_);
      job->run_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      job->result = std::move(result);
      job->error = std::move(error);
      if (job->status != "cancelled") job->status = job->error.is_null() ? "done" : "failed";
      job->finished = true;
      jobs_cv_.notify_all();
    });
    if (!queued) {
      std::lock_guard lock(jobs_mutex_);
      jobs_.erase(job->id);
      throw Error("busy", "job queue is full");
    }
    return job;
  }

  // Synchronous unless ?async=true, in which case 202 with the job id.
  void solve_endpoint(const httplib::Request& req, httplib::Response& res, const std::string& kind, Handler handler) {
    guarded(res, [&] {
      json body = parse_body(req);
      auto job = submit(kind, std::move(body), std::move(handler));
      if (req.get_param_value("async") == "true") {
        send(res, 202, json{{"job", job->id}});
        return;
      }
      std::unique_lock lock(jobs_mutex_);
      jobs_cv_.wait(lock, [&] { return job->finished; });
      if (!job->error.is_null()) {
        const std::string code = job->error["error"]["code"];
        send(res, api::http_status(code), job->error);
      } else if (job->result.is_null()) {
        send_error(res, "cancelled", "job " + job->id + " was cancelled before it ran");
      } else {
        send(res, 200, job->result);
      }
    });
  }

  static std::string session_name(const std::string& s) {
    static const std::regex ok("[A-Za-z0-9_.-]{1,64}");
    if (!std::regex_match(s, ok) || s == "." || s == "..") throw Error("invalid_request", "bad session name: " + s);
    return s;
  }

  void save_session(const std::string& name, const json& doc) {
    std::lock_guard lock(sessions_mutex_);
    const auto path = sessions_dir() / (session_name(name) + ".json");
    const auto tmp = path.string() + ".tmp";
    write_text_file(tmp, dump(doc));
    std::filesystem::rename(tmp, path);
  }

  json load_session(const std::string& name) {
    std::lock_guard lock(sessions_mutex_);
    const auto path = sessions_dir() / (session_name(name) + ".json");
    if (!std::filesystem::exists(path)) throw Error("not_found", "no session " + name);
    return read_json_file(path.string());
  }

  std::shared_ptr<Monitor> monitor() {
    std::lock_guard lock(monitor_mutex_);
    if (!monitor_) throw Error("not_found", "no monitor started; POST /monitor/start first");
    return monitor_;
  }

  void persist_monitor(const std::shared_ptr<Monitor>& m) {
    std::string name;
    {
      std::lock_guard lock(monitor_mutex_);
      name = monitor_session_;
    }
    if (!name.empty()) save_session(name, json{{"kind", "monitor"}, {"config", m->config()}, {"state", m->snapshot()}});
  }

  void install_routes() {
    server_.Get("/health", [](const httplib::Request&, httplib::Response& res) { send(res, 200, json{{"status", "ok"}}); });

    server_.Post("/tune", [this](const httplib::Request& req, httplib::Response& res) {
      solve_endpoint(req, res, "tune", [](const json& b, std::stop_token st) { return api::tune(b, st); });
    });
    server_.Post("/pareto", [this](const httplib::Request& req, httplib::Response& res) {
      solve_endpoint(req, res, "pareto", [](const json& b, std::stop_token st) { return api::pareto(b, st); });
    });
    server_.Post("/baseline", [this](const httplib::Request& req, httplib::Response& res) {
      const std::uint64_t seed = config_.seed;
      solve_endpoint(req, res, "baseline", [seed](const json& b, std::stop_token) {
        return api::baseline(b, b.value("seed", seed));
      });
    });
    server_.Post("/route", [](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, api::route(parse_body(req))); });
    });

    server_.Get(R"(/jobs/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::lock_guard lock(jobs_mutex_);
        auto it = jobs_.find(req.matches[1]);
        if (it == jobs_.end()) throw Error("not_found", "no job " + std::string(req.matches[1]));
        send(res, 200, json(*it->second));
      });
    });
    server_.Delete(R"(/jobs/([A-Za-z0-9_-]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::lock_guard lock(jobs_mutex_);
        auto it = jobs_.find(req.matches[1]);
        if (it == jobs_.end()) throw Error("not_found", "no job " + std::string(req.matches[1]));
        Job& job = *it->second;
        if (job.status == "queued" || job.status == "running") {
          // A running solve stops at its next check and keeps its best
          // solution so far.
          job.stop.request_stop();
          job.status = "cancelled";
        }
        send(res, 200, json(job));
      });
    });

    server_.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        std::lock_guard lock(sessions_mutex_);
        std::vector<std::string> names;
        for (const auto& e : std::filesystem::directory_iterator(sessions_dir())) {
          if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
        }
        std::sort(names.begin(), names.end());
        send(res, 200, json{{"sessions", names}});
      });
    });
    server_.Put(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        save_session(req.matches[1], parse_body(req));
        send(res, 200, json{{"session", std::string(req.matches[1])}});
      });
    });
    server_.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, load_session(req.matches[1])); });
    });
    server_.Delete(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::lock_guard lock(sessions_mutex_);
        const auto path = sessions_dir() / (session_name(req.matches[1]) + ".json");
        if (!std::filesystem::remove(path)) throw Error("not_found", "no session " + std::string(req.matches[1]));
        send(res, 200, json{{"deleted", std::string(req.matches[1])}});
      });
    });

    // Body: {"config": MonitorConfig, "current_design"?, "session"?} or
    // {"resume": session}.
    server_.Post("/monitor/start", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = parse_body(req);
        std::shared_ptr<Monitor> m;
        std::string session;
        if (body.contains("resume")) {
          session = body.at("resume").get<std::string>();
          const json doc = load_session(session);
          if (doc.value("kind", "") != "monitor") throw Error("invalid_request", "session " + session + " is not a monitor");
          m = std::make_shared<Monitor>(api::decode<MonitorConfig>(doc.at("config"), "config"),
                                        api::decode<MonitorState>(doc.at("state"), "state"));
        } else {
          const auto cfg = api::decode<MonitorConfig>(api::member(body, "config"), "config");
          std::optional<DivergentDesign> current;
          if (body.contains("current_design")) current = api::decode<DivergentDesign>(body.at("current_design"), "current_design");
          m = std::make_shared<Monitor>(cfg, current);
          session = body.value("session", "");
          if (!session.empty()) session_name(session);
        }
        {
          std::lock_guard lock(monitor_mutex_);
          monitor_ = m;
          monitor_session_ = session;
        }
        persist_monitor(m);
        send(res, 200, json{{"started", true}, {"session", session}, {"observed", m->series().size()}});
      });
    });
    // Body: {"statement": Statement} or {"statements": [Statement, ...]}.
    server_.Post("/monitor/observe", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = parse_body(req);
        auto m = monitor();
        std::vector<Statement> stmts;
        if (body.contains("statements")) {
          stmts = api::decode<std::vector<Statement>>(body.at("statements"), "statements");
        } else {
          stmts.push_back(api::decode<Statement>(api::member(body, "statement"), "statement"));
        }
        json entries = json::array();
        for (const auto& s : stmts) {
          auto e = m->try_observe(s);
          if (!e) throw Error("conflict", "another writer is observing on this monitor");
          entries.push_back(*e);
        }
        persist_monitor(m);
        send(res, 200, json{{"entries", entries}});
      });
    });
    server_.Get("/monitor/series", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto series = monitor()->series();
        std::size_t from = 0;
        if (req.has_param("from")) from = std::stoul(req.get_param_value("from"));
        json out = json::array();
        for (std::size_t i = from; i < series.size(); ++i) out.push_back(series[i]);
        send(res, 200, json{{"series", out}, {"length", series.size()}});
      });
    });
    server_.Get("/monitor/state", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] {
        auto m = monitor();
        send(res, 200, json{{"config", m->config()}, {"state", m->snapshot()}});
      });
    });
    // Body: a DivergentDesign the DBA has adopted.
    server_.Post("/monitor/design", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto m = monitor();
        m->set_current_design(api::decode<DivergentDesign>(parse_body(req), "design"));
        persist_monitor(m);
        send(res, 200, json{{"updated", true}});
      });
    });
  }

  ServiceConfig config_;
  httplib::Server server_;
  std::thread thread_;

  std::mutex jobs_mutex_;
  std::condition_variable jobs_cv_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  long next_job_ = 0;

  std::mutex sessions_mutex_;
  std::mutex monitor_mutex_;
  std::shared_ptr<Monitor> monitor_;
  std::string monitor_session_;

  WorkerPool pool_;  // last: its threads stop before the state above goes away
};

}  // namespace divtune
