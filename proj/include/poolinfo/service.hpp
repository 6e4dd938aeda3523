#pragma once

// HTTP/JSON front end for adaptive sessions and one-shot scoring. Handler
// methods take and return JSON text so they can be exercised without a
// socket; mount() wires them into an httplib server.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>

#include "poolinfo/model.hpp"

namespace httplib {
class Server;
}

namespace poolinfo {

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

class SessionService {
 public:
  struct Options {
    Caps caps;
    /// One "<id>.jsonl" log per session; empty disables persistence.
    std::filesystem::path data_dir;
    std::int64_t optimize_budget_ceiling = 100000;
    std::string cors_origin = "*";
  };

  /// Replays every session log found in data_dir.
  explicit SessionService(Options options);
  ~SessionService();

  HttpResponse create_session(const std::string& body);
  HttpResponse import_session(const std::string& jsonl);
  HttpResponse get_session(const std::string& id) const;
  HttpResponse recommendation(const std::string& id, const std::optional<std::string>& batch) const;
  HttpResponse observe(const std::string& id, const std::string& body);
  HttpResponse undo(const std::string& id);
  HttpResponse session_log(const std::string& id) const;
  HttpResponse score(const std::string& body) const;
  HttpResponse optimize(const std::string& body) const;

  void mount(httplib::Server& server);

  std::size_t session_count() const;

 private:
  struct Entry;
  std::shared_ptr<Entry> find(const std::string& id) const;
  HttpResponse install(const std::string& log, bool persist);

  Options options_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

/// Blocks serving on host:port until the process is stopped.
int serve(const SessionService::Options& options, const std::string& host, int port);

}  // namespace poolinfo
