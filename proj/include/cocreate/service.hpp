#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cocreate/ideation.hpp"
#include "cocreate/store.hpp"

namespace httplib {
class Server;
}

namespace cocreate {

struct ApiError {
  int http_status = 500;
  std::string code;
  std::string detail;
  std::vector<std::string> violations;

  nlohmann::ordered_json to_json() const;
};

// Maps the in-flight exception (or any exception) to its API error.
ApiError to_api_error(const std::exception& e);

struct ErrorMapping {
  std::string error_type;
  int http_status;
  std::string code;
};
// The complete table, in documentation order.
const std::vector<ErrorMapping>& error_mapping();

struct HttpReply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::map<std::string, std::string> headers;

  bool operator==(const HttpReply&) const = default;
};

// Background workers for provider-bound commands. A job either finishes
// with a reply or holds the ApiError it failed with.
class JobQueue {
 public:
  using Work = std::function<HttpReply()>;

  explicit JobQueue(std::size_t workers);
  ~JobQueue();

  std::string submit(Work work);
  // Waits up to `window` for the job; the reply if it finished in time.
  std::optional<HttpReply> wait(const std::string& job_id, std::chrono::milliseconds window);
  nlohmann::ordered_json status(const std::string& job_id) const;  // NotFound

 private:
  struct Job {
    std::string id;
    Work work;
    bool done = false;
    HttpReply reply;
  };
  void run();

  mutable std::mutex mu_;
  std::condition_variable wake_;
  std::condition_variable finished_;
  std::deque<std::shared_ptr<Job>> pending_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::uint64_t next_id_ = 1;
  bool stopping_ = false;
  std::vector<std::thread> threads_;
};

struct ServiceOptions {
  std::chrono::milliseconds wait_window{2000};  // beyond this a job answers 202
  std::size_t workers = 4;
};

// The HTTP surface as a plain function of (method, path, headers, body), so
// it can be driven in-process; serve() binds it to a socket.
class Service {
 public:
  Service(SessionStore& store, Providers providers, ServiceOptions options = {},
          ModelRoster models = {}, QualityPolicy quality = {});
  ~Service();

  HttpReply handle(const std::string& method, const std::string& path,
                   const std::map<std::string, std::string>& headers, const std::string& body);

  // Blocks until stop() is called from another thread.
  bool serve(const std::string& host, int port);
  void stop();
  // Port bound by serve(), 0 before.
  int bound_port() const { return bound_port_.load(); }

 private:
  HttpReply dispatch(const std::string& method, const std::vector<std::string>& parts,
                     const std::string& body);
  HttpReply run_job(std::function<HttpReply()> work);

  SessionStore& store_;
  Backends backends_;
  ServiceOptions options_;
  JobQueue jobs_;

  std::mutex idem_mu_;
  std::condition_variable idem_cv_;
  std::map<std::string, std::optional<HttpReply>> idempotent_;  // nullopt while running

  std::atomic<int> bound_port_{0};
  std::mutex server_mu_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace cocreate
