#include "poolinfo/service.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "poolinfo/adaptive.hpp"
#include "poolinfo/error.hpp"
#include "poolinfo/optimizer.hpp"
#include "poolinfo/scoring.hpp"

namespace poolinfo {

using nlohmann::json;

namespace {

struct FieldError {
  std::string field;
  std::string message;
};

/// Carries an HTTP status through the handler stack.
struct RequestError {
  int status;
  std::string code;
  std::string message;
  std::string field;
  std::vector<FieldError> errors;
};

[[noreturn]] void reject(int status, std::string code, std::string message, std::string field = {}) {
  throw RequestError{status, std::move(code), std::move(message), std::move(field), {}};
}

int status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::kCapExceeded:
    case ErrorCode::kZeroProbabilityOutcome:
      return 422;
    case ErrorCode::kBudgetExhausted:
    case ErrorCode::kEmptyHistory:
      return 409;
    default:
      return 400;
  }
}

HttpResponse error_response(const RequestError& e) {
  json body{{"code", e.code}, {"message", e.message}};
  if (!e.field.empty()) body["field"] = e.field;
  if (!e.errors.empty()) {
    body["errors"] = json::array();
    for (const auto& f : e.errors) body["errors"].push_back({{"field", f.field}, {"message", f.message}});
  }
  return {e.status, body.dump()};
}

template <typename Fn>
HttpResponse guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const RequestError& e) {
    return error_response(e);
  } catch (const Error& e) {
    return error_response({status_of(e.code()), std::string(to_string(e.code())), e.what(), e.field(), {}});
  } catch (const std::exception& e) {
    return error_response({500, "internal", e.what(), {}, {}});
  }
}

json parse_body(const std::string& body) {
  auto j = json::parse(body, nullptr, false);
  if (j.is_discarded()) reject(400, "invalid_argument", "request body is not valid JSON");
  if (!j.is_object()) reject(400, "invalid_argument", "request body must be a JSON object");
  return j;
}

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string random_id() {
  static std::mutex mutex;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mutex);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

/// Collects every field problem of one request before failing.
class Validator {
 public:
  double probability(const json& obj, const std::string& key, const std::string& field) {
    if (!obj.contains(key)) return missing(field), 0.0;
    const auto& v = obj[key];
    if (!v.is_number() || !(v.get<double>() >= 0.0 && v.get<double>() <= 1.0)) {
      add(field, "must be a number in [0, 1]");
      return 0.0;
    }
    return v.get<double>();
  }

  std::int64_t integer(const json& obj, const std::string& key, std::int64_t min, const std::string& field) {
    if (!obj.contains(key)) return missing(field), min;
    const auto& v = obj[key];
    if (!v.is_number_integer() || v.get<std::int64_t>() < min) {
      add(field, "must be an integer >= " + std::to_string(min));
      return min;
    }
    return v.get<std::int64_t>();
  }

  void missing(const std::string& field) { add(field, "is required"); }
  void add(const std::string& field, const std::string& message) { errors_.push_back({field, message}); }
  bool ok() const { return errors_.empty(); }

  void finish() const {
    if (errors_.empty()) return;
    const auto& first = errors_.front();
    throw RequestError{400, "invalid_argument", first.field + " " + first.message, first.field, errors_};
  }

 private:
  std::vector<FieldError> errors_;
};

struct Params {
  Prior prior;
  TestSpec spec;
};

/// {tpr, tnr, priors[, by_pool_size: {"k": {tpr, tnr}}]}; n may be given
/// for cross-checking the prior length.
Params parse_params(const json& obj, const Caps& caps, Validator v = {}) {
  std::optional<std::int64_t> n;
  if (obj.contains("n")) n = v.integer(obj, "n", 1, "n");
  const double tpr = v.probability(obj, "tpr", "tpr");
  const double tnr = v.probability(obj, "tnr", "tnr");
  std::vector<double> priors;
  if (!obj.contains("priors")) {
    v.missing("priors");
  } else if (!obj["priors"].is_array() || obj["priors"].empty()) {
    v.add("priors", "must be a non-empty array of probabilities");
  } else {
    for (std::size_t i = 0; i < obj["priors"].size(); ++i) {
      const auto& p = obj["priors"][i];
      if (!p.is_number() || !(p.get<double>() >= 0.0 && p.get<double>() <= 1.0)) {
        v.add("priors[" + std::to_string(i) + "]", "must be a number in [0, 1]");
      } else {
        priors.push_back(p.get<double>());
      }
    }
    if (n && v.ok() && static_cast<std::int64_t>(priors.size()) != *n) {
      v.add("priors", "must have n = " + std::to_string(*n) + " entries");
    }
  }
  std::map<int, Rates> by_size;
  if (obj.contains("by_pool_size")) {
    const auto& b = obj["by_pool_size"];
    if (!b.is_object()) {
      v.add("by_pool_size", "must be an object keyed by pool size");
    } else {
      for (const auto& [key, rates] : b.items()) {
        const std::string field = "by_pool_size." + key;
        int size = 0;
        try {
          std::size_t used = 0;
          size = std::stoi(key, &used);
          if (used != key.size() || size < 1) throw std::invalid_argument(key);
        } catch (const std::exception&) {
          v.add(field, "key must be a positive pool size");
          continue;
        }
        if (!rates.is_object()) {
          v.add(field, "must be an object {tpr, tnr}");
          continue;
        }
        by_size[size] = Rates{v.probability(rates, "tpr", field + ".tpr"), v.probability(rates, "tnr", field + ".tnr")};
      }
    }
  }
  v.finish();
  caps.check_patients(static_cast<int>(priors.size()));
  return {Prior(std::move(priors)), TestSpec(tpr, tnr, std::move(by_size))};
}

json params_json(const Prior& prior, const TestSpec& spec) {
  json j{{"n", prior.n()}, {"tpr", spec.tpr()}, {"tnr", spec.tnr()}, {"priors", prior.probs()}};
  if (!spec.by_pool_size().empty()) {
    json b = json::object();
    for (const auto& [k, r] : spec.by_pool_size()) b[std::to_string(k)] = {{"tpr", r.tpr}, {"tnr", r.tnr}};
    j["by_pool_size"] = b;
  }
  return j;
}

PoolDesign parse_design(const json& v, int n, const std::string& field) {
  if (!v.is_string()) reject(400, "invalid_argument", field + " must be a bit string", field);
  const auto s = v.get<std::string>();
  if (static_cast<int>(s.size()) != n || s.find_first_not_of("01") != std::string::npos) {
    reject(400, "invalid_argument", field + " must be " + std::to_string(n) + " characters of 0/1", field);
  }
  return PoolDesign::parse(s);
}

json report_json(const DiagnosisReport& r, int n) {
  return {{"diagnosis", r.ml_secret.to_string(n)},
          {"confidence", r.confidence},
          {"marginals", r.marginals},
          {"entropy_bits", r.entropy_bits}};
}

Objective parse_objective(const json& es) {
  if (!es.contains("objective")) return Objective::kMutualInformation;
  const auto& o = es["objective"];
  if (o == "confidence") return Objective::kExpectedConfidence;
  if (o == "mi" || o == "mutual_information") return Objective::kMutualInformation;
  reject(400, "invalid_argument", "objective must be 'mi' or 'confidence'", "es.objective");
}

}  // namespace

struct SessionService::Entry {
  std::mutex mutex;
  std::string id;
  Session session;
  std::string created;
  std::string updated;
  std::string log;  // JSON lines, byte-identical to the persisted file

  Entry(std::string id_, Session s) : id(std::move(id_)), session(std::move(s)) {}

  json resource() const {
    json history = json::array();
    for (const auto& o : session.history()) {
      history.push_back({{"design", o.design.to_string(session.n())}, {"result", o.result ? 1 : 0}});
    }
    json j = params_json(session.prior(), session.spec());
    j["id"] = id;
    j["m"] = session.budget();
    j["history"] = history;
    j["remaining_budget"] = session.remaining_budget();
    j["report"] = report_json(session.report(), session.n());
    j["created"] = created;
    j["updated"] = updated;
    return j;
  }
};

namespace {

/// Applies one log record to a (possibly not yet created) session.
void apply_record(std::optional<Session>& session, const json& rec, const Caps& caps) {
  if (!rec.is_object() || !rec.contains("type")) reject(400, "invalid_argument", "log record without a type");
  const auto type = rec["type"];
  if (type == "create") {
    if (session) reject(400, "invalid_argument", "duplicate create record");
    const auto params = parse_params(rec, caps);
    Validator v;
    const auto m = v.integer(rec, "m", 0, "m");
    v.finish();
    session.emplace(params.prior, params.spec, static_cast<int>(m), caps);
    return;
  }
  if (!session) reject(400, "invalid_argument", "log must start with a create record");
  if (type == "observe") {
    const auto design = parse_design(rec.value("design", json()), session->n(), "design");
    const auto& r = rec.value("result", json());
    if (!r.is_number_integer() || (r.get<int>() != 0 && r.get<int>() != 1)) {
      reject(400, "invalid_argument", "result must be 0 or 1", "result");
    }
    *session = session->observe(design, r.get<int>() == 1);
  } else if (type == "undo") {
    *session = session->undo();
  } else {
    reject(400, "invalid_argument", "unknown log record type", "type");
  }
}

}  // namespace

SessionService::SessionService(Options options) : options_(std::move(options)) {
  if (options_.data_dir.empty()) return;
  std::filesystem::create_directories(options_.data_dir);
  for (const auto& file : std::filesystem::directory_iterator(options_.data_dir)) {
    if (file.path().extension() != ".jsonl") continue;
    std::ifstream in(file.path());
    std::stringstream text;
    text << in.rdbuf();
    const auto r = install(text.str(), false);
    if (r.status != 201) std::cerr << "skipping session log " << file.path() << ": " << r.body << "\n";
  }
}

SessionService::~SessionService() = default;

std::size_t SessionService::session_count() const {
  std::shared_lock lock(map_mutex_);
  return sessions_.size();
}

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) reject(404, "not_found", "no session '" + id + "'", "id");
  return it->second;
}

/// Builds a session from a log. A reloaded log keeps its id; otherwise a
/// fresh id is assigned and the log is persisted under it.
HttpResponse SessionService::install(const std::string& log, bool persist) {
  return guarded([&] {
    std::optional<Session> session;
    std::istringstream in(log);
    std::string line, id, created, updated, normalized;
    for (int number = 1; std::getline(in, line); ++number) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto rec = json::parse(line, nullptr, false);
      if (rec.is_discarded()) reject(400, "invalid_argument", "line " + std::to_string(number) + " is not JSON");
      apply_record(session, rec, options_.caps);
      if (rec.value("type", "") == "create") {
        id = rec.value("id", "");
        created = rec.value("time", "");
      }
      updated = rec.value("time", updated);
      normalized += line + "\n";
    }
    if (!session) reject(400, "invalid_argument", "empty session log");
    if (persist || id.empty()) id = random_id();

    auto entry = std::make_shared<Entry>(id, std::move(*session));
    entry->created = created;
    entry->updated = updated;
    entry->log = normalized;
    if (persist) {
      // Re-stamp the create record with the new id; later records are kept verbatim.
      std::istringstream lines(normalized);
      std::string first, rest, l;
      std::getline(lines, first);
      while (std::getline(lines, l)) rest += l + "\n";
      auto create = json::parse(first);
      create["id"] = id;
      entry->log = create.dump() + "\n" + rest;
      if (!options_.data_dir.empty()) {
        std::ofstream(options_.data_dir / (id + ".jsonl"), std::ios::trunc) << entry->log;
      }
    }
    std::unique_lock lock(map_mutex_);
    if (!sessions_.emplace(id, entry).second) reject(409, "conflict", "session id already loaded", "id");
    return HttpResponse{201, entry->resource().dump()};
  });
}

HttpResponse SessionService::create_session(const std::string& body) {
  return guarded([&] {
    const auto req = parse_body(body);
    Validator v;
    const auto m = v.integer(req, "m", 0, "m");
    if (req.contains("n") && req["n"].is_number_integer()) {
      // Over-cap sizes are reported as such even when other fields are off.
      options_.caps.check_patients(std::max(1, req["n"].get<int>()));
    } else if (!req.contains("n")) {
      v.missing("n");
    }
    const auto params = parse_params(req, options_.caps, std::move(v));
    json create = params_json(params.prior, params.spec);
    create["type"] = "create";
    create["m"] = m;
    create["time"] = now_iso8601();
    return install(create.dump() + "\n", true);
  });
}

HttpResponse SessionService::import_session(const std::string& jsonl) { return install(jsonl, true); }

HttpResponse SessionService::get_session(const std::string& id) const {
  return guarded([&] {
    const auto entry = find(id);
    std::lock_guard lock(entry->mutex);
    return HttpResponse{200, entry->resource().dump()};
  });
}

HttpResponse SessionService::recommendation(const std::string& id, const std::optional<std::string>& batch) const {
  return guarded([&] {
    int k = 1;
    if (batch) {
      try {
        std::size_t used = 0;
        k = std::stoi(*batch, &used);
        if (used != batch->size() || k < 1) throw std::invalid_argument(*batch);
      } catch (const std::exception&) {
        reject(400, "invalid_argument", "batch must be a positive integer", "batch");
      }
    }
    const auto entry = find(id);
    std::optional<Session> snapshot;
    {
      std::lock_guard lock(entry->mutex);
      snapshot = entry->session;
    }
    if (snapshot->remaining_budget() < k) {
      reject(409, "budget_exhausted",
             "remaining budget " + std::to_string(snapshot->remaining_budget()) + " is below batch " +
                 std::to_string(k),
             "batch");
    }
    GreedyOptions opts;
    opts.caps = options_.caps;
    const auto rec = k == 1 ? greedy_next_design(snapshot->current(), snapshot->spec(), opts)
                            : k_greedy_batch(snapshot->current(), snapshot->spec(), k, opts);
    const int n = snapshot->n();
    json designs = json::array();
    for (const auto& d : rec.designs) designs.push_back(d.to_string(n));
    json alternatives = json::array();
    for (const auto& a : rec.alternatives) alternatives.push_back({{"design", a.design.to_string(n)}, {"gain_bits", a.gain_bits}});
    json body{{"batch", k},
              {"designs", designs},
              {"expected_gain_bits", rec.expected_gain_bits},
              {"alternatives", alternatives},
              {"fallback", rec.fallback}};
    return HttpResponse{200, body.dump()};
  });
}

HttpResponse SessionService::observe(const std::string& id, const std::string& body) {
  return guarded([&] {
    const auto req = parse_body(body);
    const auto entry = find(id);
    std::lock_guard lock(entry->mutex);
    json rec{{"type", "observe"}, {"time", now_iso8601()}};
    rec["design"] = req.value("design", json());
    rec["result"] = req.value("result", json());
    parse_design(rec["design"], entry->session.n(), "design");
    const auto& r = rec["result"];
    if (!r.is_number_integer() || (r.get<int>() != 0 && r.get<int>() != 1)) {
      reject(400, "invalid_argument", "result must be 0 or 1", "result");
    }
    std::optional<Session> next = entry->session;
    apply_record(next, rec, options_.caps);
    const auto line = rec.dump() + "\n";
    if (!options_.data_dir.empty()) std::ofstream(options_.data_dir / (id + ".jsonl"), std::ios::app) << line;
    entry->log += line;
    entry->session = std::move(*next);
    entry->updated = rec["time"];
    return HttpResponse{200, entry->resource().dump()};
  });
}

HttpResponse SessionService::undo(const std::string& id) {
  return guarded([&] {
    const auto entry = find(id);
    std::lock_guard lock(entry->mutex);
    json rec{{"type", "undo"}, {"time", now_iso8601()}};
    auto next = entry->session.undo();
    const auto line = rec.dump() + "\n";
    if (!options_.data_dir.empty()) std::ofstream(options_.data_dir / (id + ".jsonl"), std::ios::app) << line;
    entry->log += line;
    entry->session = std::move(next);
    entry->updated = rec["time"];
    return HttpResponse{200, entry->resource().dump()};
  });
}

HttpResponse SessionService::session_log(const std::string& id) const {
  return guarded([&] {
    const auto entry = find(id);
    std::lock_guard lock(entry->mutex);
    return HttpResponse{200, entry->log, "application/x-ndjson"};
  });
}

HttpResponse SessionService::score(const std::string& body) const {
  return guarded([&] {
    const auto req = parse_body(body);
    if (!req.contains("params") || !req["params"].is_object()) {
      reject(400, "invalid_argument", "params object is required", "params");
    }
    const auto params = parse_params(req["params"], options_.caps);
    const int n = params.prior.n();
    DesignMultiset designs;
    const auto& ds = req.value("designs", json::array());
    if (!ds.is_array()) reject(400, "invalid_argument", "designs must be an array", "designs");
    for (std::size_t j = 0; j < ds.size(); ++j) designs.push_back(parse_design(ds[j], n, "designs[" + std::to_string(j) + "]"));
    options_.caps.check_tests(n, static_cast<int>(designs.size()));
    const auto dist = prior_to_distribution(params.prior, options_.caps);
    const auto scores = outcome_scores(dist, designs, params.spec, options_.caps);
    const double h = entropy(dist);
    json out{{"entropy_bits", h},
             {"conditional_entropy_bits", scores.conditional_entropy},
             {"mutual_information_bits", std::max(0.0, h - scores.conditional_entropy)},
             {"expected_confidence", scores.expected_confidence}};
    return HttpResponse{200, out.dump()};
  });
}

HttpResponse SessionService::optimize(const std::string& body) const {
  return guarded([&] {
    const auto req = parse_body(body);
    if (!req.contains("params") || !req["params"].is_object()) {
      reject(400, "invalid_argument", "params object is required", "params");
    }
    const auto params = parse_params(req["params"], options_.caps);
    const json es = req.value("es", json::object());
    if (!es.is_object()) reject(400, "invalid_argument", "es must be an object", "es");
    Validator v;
    const auto m = v.integer(req, "m", 0, "m");
    ESConfig cfg;
    cfg.objective = parse_objective(es);
    if (es.contains("lambda")) cfg.lambda = static_cast<int>(v.integer(es, "lambda", 1, "es.lambda"));
    if (es.contains("base")) cfg.base = static_cast<int>(v.integer(es, "base", 1, "es.base"));
    if (es.contains("budget")) cfg.budget = v.integer(es, "budget", 1, "es.budget");
    if (es.contains("seed")) cfg.seed = static_cast<std::uint64_t>(v.integer(es, "seed", 0, "es.seed"));
    v.finish();
    if (cfg.budget > options_.optimize_budget_ceiling) {
      reject(422, "cap_exceeded",
             "budget exceeds the server ceiling of " + std::to_string(options_.optimize_budget_ceiling) + " evaluations",
             "es.budget");
    }
    const int n = params.prior.n();
    options_.caps.check_tests(n, static_cast<int>(m));
    const auto dist = prior_to_distribution(params.prior, options_.caps);
    const auto r = es_run(n, static_cast<int>(m), dist, params.spec, cfg, options_.caps);
    json designs = json::array();
    for (const auto& d : r.best) designs.push_back(d.to_string(n));
    json out{{"objective", std::string(to_string(cfg.objective))},
             {"designs", designs},
             {"score", r.score},
             {"evaluations_used", r.evaluations_used},
             {"restarts_performed", r.restarts_performed}};
    return HttpResponse{200, out.dump()};
  });
}

void SessionService::mount(httplib::Server& server) {
  const std::string origin = options_.cors_origin;
  server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                              {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  auto send = [](httplib::Response& res, const HttpResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  server.Post("/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, create_session(req.body));
  });
  server.Post("/sessions/import", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, import_session(req.body));
  });
  server.Get(R"(/sessions/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_session(req.matches[1]));
  });
  server.Get(R"(/sessions/([^/]+)/recommendation)", [this, send](const httplib::Request& req, httplib::Response& res) {
    std::optional<std::string> batch;
    if (req.has_param("batch")) batch = req.get_param_value("batch");
    send(res, recommendation(req.matches[1], batch));
  });
  server.Post(R"(/sessions/([^/]+)/observations)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, observe(req.matches[1], req.body));
  });
  server.Delete(R"(/sessions/([^/]+)/observations/last)",
                [this, send](const httplib::Request& req, httplib::Response& res) { send(res, undo(req.matches[1])); });
  server.Get(R"(/sessions/([^/]+)/log)", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, session_log(req.matches[1]));
  });
  server.Post("/score", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, score(req.body)); });
  server.Post("/optimize", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, optimize(req.body));
  });
  server.Get("/health", [send](const httplib::Request&, httplib::Response& res) {
    send(res, HttpResponse{200, R"({"status":"ok"})"});
  });
  server.set_error_handler([send](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    send(res, error_response({res.status, res.status == 404 ? "not_found" : "http_error", "no such route", {}, {}}));
  });
}

int serve(const SessionService::Options& options, const std::string& host, int port) {
  SessionService service(options);
  httplib::Server server;
  service.mount(server);
  server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    std::cerr << json{{"time", now_iso8601()}, {"method", req.method}, {"path", req.path}, {"status", res.status}}.dump()
              << "\n";
  });
  std::cerr << "serving on " << host << ":" << port << " (" << service.session_count() << " sessions loaded)\n";
  return server.listen(host, port) ? 0 : 1;
}

}  // namespace poolinfo
