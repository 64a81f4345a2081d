#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "cocreate/service.hpp"

#include <httplib.h>

#include "cocreate/error.hpp"
#include "cocreate/metrics.hpp"
#include "cocreate/refinement.hpp"

namespace cocreate {

using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

// ---- errors ---------------------------------------------------------------

namespace {

// A request body that is well-formed JSON but not what the endpoint takes.
class BadRequest : public Error {
 public:
  using Error::Error;
};

class NoRoute : public Error {
 public:
  using Error::Error;
};

class WrongMethod : public Error {
 public:
  using Error::Error;
};

}  // namespace

const std::vector<ErrorMapping>& error_mapping() {
  static const std::vector<ErrorMapping> table = {
      {"request body is not JSON", 400, "malformed_json"},
      {"request body has missing or mistyped fields", 400, "invalid_request"},
      {"NotFound (session, tab, idea, image, job)", 404, "not_found"},
      {"unknown route", 404, "no_route"},
      {"method not allowed on route", 405, "method_not_allowed"},
      {"IntegrityError", 409, "conflict"},
      {"SequenceError", 409, "sequence_conflict"},
      {"ParseError", 422, "parse_error"},
      {"ValidationError", 422, "validation_failed"},
      {"SelectionError", 422, "invalid_selection"},
      {"RangeError", 422, "out_of_range"},
      {"InsufficientItems", 422, "insufficient_items"},
      {"NormalizationError", 422, "not_normalized"},
      {"DegenerateSample", 422, "degenerate_sample"},
      {"ProviderError", 502, "provider_error"},
      {"SchemaError", 502, "provider_error"},
      {"SketchSynthesisError", 502, "provider_error"},
      {"ImageFormatError", 502, "provider_error"},
      {"StorageError", 500, "storage_error"},
      {"any other failure", 500, "internal_error"},
  };
  return table;
}

ojson ApiError::to_json() const {
  ojson j;
  j["error"] = {{"code", code}, {"detail", detail}};
  if (!violations.empty()) j["error"]["violations"] = violations;
  return j;
}

ApiError to_api_error(const std::exception& e) {
  const std::string what = e.what();
  if (dynamic_cast<const json::exception*>(&e)) return {400, "malformed_json", what, {}};
  if (dynamic_cast<const BadRequest*>(&e)) return {400, "invalid_request", what, {}};
  if (dynamic_cast<const NotFound*>(&e)) return {404, "not_found", what, {}};
  if (dynamic_cast<const NoRoute*>(&e)) return {404, "no_route", what, {}};
  if (dynamic_cast<const WrongMethod*>(&e)) return {405, "method_not_allowed", what, {}};
  if (dynamic_cast<const IntegrityError*>(&e)) return {409, "conflict", what, {}};
  if (dynamic_cast<const SequenceError*>(&e)) return {409, "sequence_conflict", what, {}};
  if (dynamic_cast<const ParseError*>(&e)) return {422, "parse_error", what, {}};
  if (const auto* v = dynamic_cast<const ValidationError*>(&e)) {
    return {422, "validation_failed", what, v->violations};
  }
  if (const auto* s = dynamic_cast<const SelectionError*>(&e)) {
    return {422, "invalid_selection", what, s->problems};
  }
  if (dynamic_cast<const RangeError*>(&e)) return {422, "out_of_range", what, {}};
  if (dynamic_cast<const InsufficientItems*>(&e)) return {422, "insufficient_items", what, {}};
  if (dynamic_cast<const NormalizationError*>(&e)) return {422, "not_normalized", what, {}};
  if (dynamic_cast<const DegenerateSample*>(&e)) return {422, "degenerate_sample", what, {}};
  if (const auto* p = dynamic_cast<const ProviderError*>(&e)) {
    return {502, "provider_error", std::string(to_string(p->kind)) + ": " + p->detail, {}};
  }
  if (dynamic_cast<const SchemaError*>(&e)) return {502, "provider_error", what, {}};
  if (const auto* s = dynamic_cast<const SketchSynthesisError*>(&e)) {
    return {502, "provider_error", what, s->violations};
  }
  if (dynamic_cast<const ImageFormatError*>(&e)) return {502, "provider_error", what, {}};
  if (dynamic_cast<const StorageError*>(&e)) return {500, "storage_error", what, {}};
  return {500, "internal_error", what, {}};
}

namespace {

HttpReply json_reply(int status, const ojson& body) { return HttpReply{status, "application/json", body.dump(), {}}; }

HttpReply error_reply(const std::exception& e) {
  const auto err = to_api_error(e);
  return json_reply(err.http_status, err.to_json());
}

}  // namespace

// ---- jobs -----------------------------------------------------------------

JobQueue::JobQueue(std::size_t workers) {
  for (std::size_t i = 0; i < std::max<std::size_t>(1, workers); ++i) {
    threads_.emplace_back([this] { run(); });
  }
}

JobQueue::~JobQueue() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  wake_.notify_all();
  for (auto& t : threads_) t.join();
}

std::string JobQueue::submit(Work work) {
  auto job = std::make_shared<Job>();
  job->work = std::move(work);
  {
    std::lock_guard lock(mu_);
    job->id = "j" + std::to_string(next_id_++);
    jobs_[job->id] = job;
    pending_.push_back(job);
  }
  wake_.notify_one();
  return job->id;
}

void JobQueue::run() {
  for (;;) {
    std::shared_ptr<Job> job;
    {
      std::unique_lock lock(mu_);
      wake_.wait(lock, [&] { return stopping_ || !pending_.empty(); });
      if (pending_.empty()) return;
      job = pending_.front();
      pending_.pop_front();
    }
    HttpReply reply;
    try {
      reply = job->work();
    } catch (const std::exception& e) {
      reply = error_reply(e);
    }
    {
      std::lock_guard lock(mu_);
      job->reply = std::move(reply);
      job->done = true;
      job->work = nullptr;
    }
    finished_.notify_all();
  }
}

std::optional<HttpReply> JobQueue::wait(const std::string& job_id, std::chrono::milliseconds window) {
  std::unique_lock lock(mu_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw NotFound("job", job_id);
  auto job = it->second;
  finished_.wait_for(lock, window, [&] { return job->done; });
  if (!job->done) return std::nullopt;
  return job->reply;
}

ojson JobQueue::status(const std::string& job_id) const {
  std::lock_guard lock(mu_);
  const auto it = jobs_.find(job_id);
  if (it == jobs_.end()) throw NotFound("job", job_id);
  const auto& job = *it->second;
  ojson j;
  j["job_id"] = job.id;
  if (!job.done) {
    j["status"] = "pending";
    return j;
  }
  const bool ok = job.reply.status < 400;
  j["status"] = ok ? "done" : "failed";
  j["http_status"] = job.reply.status;
  auto body = ojson::parse(job.reply.body);
  if (ok) {
    j["result"] = std::move(body);
  } else {
    j["error"] = std::move(body["error"]);
  }
  return j;
}

// ---- request helpers ------------------------------------------------------

namespace {

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string current;
  const auto q = path.find('?');
  const std::string clean = path.substr(0, q);
  for (char c : clean) {
    if (c == '/') {
      if (!current.empty()) parts.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) parts.push_back(std::move(current));
  return parts;
}

json parse_body(const std::string& body) {
  if (body.find_first_not_of(" \t\r\n") == std::string::npos) return json::object();
  json doc = json::parse(body);
  if (!doc.is_object()) throw BadRequest("request body must be a JSON object");
  return doc;
}

std::string required_string(const json& body, const char* key) {
  const auto it = body.find(key);
  if (it == body.end() || !it->is_string()) throw BadRequest(std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& body, const char* key) {
  const auto it = body.find(key);
  if (it == body.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw BadRequest(std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

std::optional<std::vector<std::string>> optional_strings(const json& body, const char* key) {
  const auto it = body.find(key);
  if (it == body.end() || it->is_null()) return std::nullopt;
  if (!it->is_array()) throw BadRequest(std::string("'") + key + "' must be an array of strings");
  std::vector<std::string> out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw BadRequest(std::string("'") + key + "' must be an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::size_t count_field(const json& body) {
  const auto it = body.find("count");
  if (it == body.end() || it->is_null()) return 9;
  if (!it->is_number_unsigned()) throw BadRequest("'count' must be a positive integer");
  return it->get<std::size_t>();
}

sketch::Selections selections_field(const json& body) {
  const auto it = body.find("selections");
  if (it == body.end() || it->is_null()) throw BadRequest("'selections' is required");
  return sketch::selections_from_json(*it);
}

ojson rendered_to_json(const sketch::RenderedPrompt& r) {
  ojson spans = ojson::array();
  for (const auto& s : r.spans) {
    spans.push_back({{"parameter", s.param_name}, {"byte_start", s.byte_start}, {"byte_end", s.byte_end}});
  }
  return {{"text", r.text}, {"spans", std::move(spans)}};
}

ojson ideas_json(const std::vector<IdeaCard>& ideas) {
  ojson arr = ojson::array();
  for (const auto& c : ideas) arr.push_back(idea_to_json(c));
  return arr;
}

bool is_mutating(const std::string& method) { return method == "POST" || method == "PATCH" || method == "DELETE"; }

}  // namespace

// ---- service --------------------------------------------------------------

Service::Service(SessionStore& store, Providers providers, ServiceOptions options, ModelRoster models,
                 QualityPolicy quality)
    : store_(store), options_(options), jobs_(options.workers) {
  backends_.providers = std::move(providers);
  backends_.blobs = &store_.blobs();
  backends_.models = std::move(models);
  backends_.quality = quality;
}

Service::~Service() { stop(); }

HttpReply Service::run_job(std::function<HttpReply()> work) {
  const auto id = jobs_.submit(std::move(work));
  if (auto reply = jobs_.wait(id, options_.wait_window)) return *reply;
  HttpReply pending = json_reply(202, ojson{{"job_id", id}, {"status", "pending"}});
  pending.headers["Location"] = "/jobs/" + id;
  return pending;
}

HttpReply Service::handle(const std::string& method, const std::string& path,
                          const std::map<std::string, std::string>& headers, const std::string& body) {
  const auto parts = split_path(path);
  std::string idem_key;
  if (is_mutating(method)) {
    for (const auto& [k, v] : headers) {
      std::string lower = k;
      for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (lower == "idempotency-key" && !v.empty()) idem_key = method + " " + path + " " + v;
    }
  }
  if (!idem_key.empty()) {
    std::unique_lock lock(idem_mu_);
    for (;;) {
      const auto it = idempotent_.find(idem_key);
      if (it == idempotent_.end()) {
        idempotent_.emplace(idem_key, std::nullopt);
        break;
      }
      if (it->second) return *it->second;
      idem_cv_.wait(lock);
    }
  }

  HttpReply reply;
  try {
    reply = dispatch(method, parts, body);
  } catch (const std::exception& e) {
    reply = error_reply(e);
  }

  if (!idem_key.empty()) {
    {
      std::lock_guard lock(idem_mu_);
      // Failed requests may be retried with the same key.
      if (reply.status >= 500) {
        idempotent_.erase(idem_key);
      } else {
        idempotent_[idem_key] = reply;
      }
    }
    idem_cv_.notify_all();
  }
  return reply;
}

HttpReply Service::dispatch(const std::string& method, const std::vector<std::string>& p,
                            const std::string& body) {
  const auto n = p.size();
  auto route = [&](const char* m, std::initializer_list<const char*> shape) {
    if (shape.size() != n) return false;
    std::size_t i = 0;
    for (const char* seg : shape) {
      if (seg[0] != '*' && p[i] != seg) return false;
      ++i;
    }
    return method == m;
  };
  auto shape_matches = [&](std::initializer_list<const char*> shape) {
    if (shape.size() != n) return false;
    std::size_t i = 0;
    for (const char* seg : shape) {
      if (seg[0] != '*' && p[i] != seg) return false;
      ++i;
    }
    return true;
  };

  // POST /sessions
  if (route("POST", {"sessions"})) {
    const auto req = parse_body(body);
    auto handle = store_.create(required_string(req, "task_prompt"));
    const auto state = handle->snapshot();
    return json_reply(201, ojson{{"session_id", state->session_id},
                                 {"brainstorm_tab_id", state->brainstorm_tab().tab_id},
                                 {"last_seq", state->last_seq}});
  }
  // GET /sessions/{id}
  if (route("GET", {"sessions", "*"})) {
    return json_reply(200, state_to_json(*store_.get(p[1])->snapshot(), true));
  }
  // POST /sessions/{id}/brainstorm
  if (route("POST", {"sessions", "*", "brainstorm"})) {
    const auto req = parse_body(body);
    auto handle = store_.get(p[1]);
    const auto prompt = required_string(req, "prompt");
    const auto count = count_field(req);
    return run_job([this, handle, prompt, count] {
      const auto ideas = ideation::brainstorm(*handle, backends_, prompt, count);
      return json_reply(201, ojson{{"ideas", ideas_json(ideas)}});
    });
  }
  // POST /sessions/{id}/ideas
  if (route("POST", {"sessions", "*", "ideas"})) {
    const auto req = parse_body(body);
    auto handle = store_.get(p[1]);
    ideation::IdeaDraft draft;
    draft.title = required_string(req, "title");
    draft.description = optional_string(req, "description").value_or("");
    draft.background = optional_string(req, "background").value_or("");
    draft.categories = optional_strings(req, "categories").value_or(std::vector<std::string>{});
    return json_reply(201, idea_to_json(ideation::create_idea(*handle, draft)));
  }
  // POST /sessions/{id}/ideas/expand
  if (route("POST", {"sessions", "*", "ideas", "expand"})) {
    const auto req = parse_body(body);
    auto handle = store_.get(p[1]);
    const auto context = optional_string(req, "extra_context").value_or("");
    const auto count = count_field(req);
    return run_job([this, handle, context, count] {
      const auto ideas = ideation::expand_ideas(*handle, backends_, context, count);
      return json_reply(201, ojson{{"ideas", ideas_json(ideas)}});
    });
  }
  // GET /sessions/{id}/events
  if (route("GET", {"sessions", "*", "events"})) {
    ojson arr = ojson::array();
    for (const auto& e : store_.get(p[1])->events()) arr.push_back(event_to_json(e));
    return json_reply(200, arr);
  }
  // GET /sessions/{id}/metrics
  if (route("GET", {"sessions", "*", "metrics"})) {
    return json_reply(200, metrics_to_json(behavioral_metrics(store_.get(p[1])->events())));
  }
  // PATCH /ideas/{id}
  if (route("PATCH", {"ideas", "*"})) {
    const auto req = parse_body(body);
    auto handle = store_.owner_of(p[1]);
    ideation::IdeaPatch patch;
    patch.title = optional_string(req, "title");
    patch.background = optional_string(req, "background");
    patch.description = optional_string(req, "description");
    patch.categories = optional_strings(req, "categories");
    return json_reply(200, idea_to_json(ideation::edit_idea(*handle, p[1], patch)));
  }
  // DELETE /ideas/{id}
  if (route("DELETE", {"ideas", "*"})) {
    auto handle = store_.owner_of(p[1]);
    ideation::delete_idea(*handle, p[1]);
    return json_reply(200, ojson{{"deleted", p[1]}});
  }
  // POST /ideas/{id}/generate
  if (route("POST", {"ideas", "*", "generate"})) {
    auto handle = store_.owner_of(p[1]);
    if (handle->snapshot()->find_idea(p[1]) == nullptr) throw NotFound("idea", p[1]);
    const std::string idea_id = p[1];
    return run_job([this, handle, idea_id] {
      return json_reply(201, image_to_json(ideation::generate_idea_image(*handle, backends_, idea_id)));
    });
  }
  // GET /images/{id}
  if (route("GET", {"images", "*"})) {
    auto handle = store_.owner_of(p[1]);
    const auto* image = handle->snapshot()->find_image(p[1]);
    if (image == nullptr) throw NotFound("image", p[1]);
    auto bytes = store_.blobs().get(image->bytes_ref);
    if (!bytes) throw StorageError("bytes of image " + p[1] + " are missing");
    return HttpReply{200, "image/png", std::string(bytes->begin(), bytes->end()), {}};
  }
  // GET /blobs/{ref}
  if (route("GET", {"blobs", "*"})) {
    auto bytes = store_.blobs().get(p[1]);
    if (!bytes) throw NotFound("blob", p[1]);
    return HttpReply{200, "image/png", std::string(bytes->begin(), bytes->end()), {}};
  }
  // POST /images/{id}/download
  if (route("POST", {"images", "*", "download"})) {
    auto handle = store_.owner_of(p[1]);
    mark_downloaded(*handle, p[1]);
    return json_reply(200, ojson{{"image_id", p[1]}, {"downloaded", true}});
  }
  // POST /images/{id}/refine-tab
  if (route("POST", {"images", "*", "refine-tab"})) {
    auto handle = store_.owner_of(p[1]);
    return json_reply(201, tab_to_json(open_refine_tab(*handle, p[1])));
  }
  // POST /tabs/{id}/refine
  if (route("POST", {"tabs", "*", "refine"})) {
    const auto req = parse_body(body);
    auto handle = store_.owner_of(p[1]);
    if (handle->snapshot()->find_tab(p[1]) == nullptr) throw NotFound("tab", p[1]);
    const auto prompt = required_string(req, "refine_prompt");
    const std::string tab_id = p[1];
    return run_job([this, handle, tab_id, prompt] {
      const auto sk = refinement::refine(*handle, backends_, tab_id, prompt);
      const auto state = handle->snapshot();
      const auto* tab = state->find_tab(tab_id);
      return json_reply(201, ojson{{"tab_id", tab_id},
                                   {"sketch_id", tab->current_sketch_id.value_or("")},
                                   {"sketch", sketch::sketch_to_json(sk)},
                                   {"default_preview", rendered_to_json(sketch::render(sk, sketch::default_selections(sk)))}});
    });
  }
  // POST /tabs/{id}/render
  if (route("POST", {"tabs", "*", "render"})) {
    const auto req = parse_body(body);
    auto handle = store_.owner_of(p[1]);
    const auto rendered = refinement::preview(*handle->snapshot(), p[1], selections_field(req),
                                              optional_string(req, "manual_edit"));
    return json_reply(200, rendered_to_json(rendered));
  }
  // POST /tabs/{id}/generate
  if (route("POST", {"tabs", "*", "generate"})) {
    const auto req = parse_body(body);
    auto handle = store_.owner_of(p[1]);
    const auto selections = selections_field(req);
    const auto manual = optional_string(req, "manual_edit");
    // Bad selections are reported now rather than from inside the job.
    refinement::preview(*handle->snapshot(), p[1], selections, manual);
    const std::string tab_id = p[1];
    return run_job([this, handle, tab_id, selections, manual] {
      const auto outcome = refinement::generate_variation(*handle, backends_, tab_id, selections, manual);
      return json_reply(201, ojson{{"round", round_to_json(outcome.round)}, {"image", image_to_json(outcome.image)}});
    });
  }
  // GET /jobs/{id}
  if (route("GET", {"jobs", "*"})) {
    return json_reply(200, jobs_.status(p[1]));
  }

  for (auto shape : std::initializer_list<std::initializer_list<const char*>>{
           {"sessions"}, {"sessions", "*"}, {"sessions", "*", "brainstorm"}, {"sessions", "*", "ideas"},
           {"sessions", "*", "ideas", "expand"}, {"sessions", "*", "events"}, {"sessions", "*", "metrics"},
           {"ideas", "*"}, {"ideas", "*", "generate"}, {"images", "*"}, {"blobs", "*"}, {"images", "*", "download"},
           {"images", "*", "refine-tab"}, {"tabs", "*", "refine"}, {"tabs", "*", "render"},
           {"tabs", "*", "generate"}, {"jobs", "*"}}) {
    if (shape_matches(shape)) throw WrongMethod(method + " not allowed here");
  }
  throw NoRoute("no route for " + method + " /" + [&] {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? "/" : "") + p[i];
    return s;
  }());
}

// ---- socket binding -------------------------------------------------------

bool Service::serve(const std::string& host, int port) {
  {
    std::lock_guard lock(server_mu_);
    server_ = std::make_unique<httplib::Server>();
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
      std::map<std::string, std::string> headers(req.headers.begin(), req.headers.end());
      const auto reply = handle(req.method, req.path, headers, req.body);
      res.status = reply.status;
      for (const auto& [k, v] : reply.headers) res.set_header(k, v);
      res.set_content(reply.body, reply.content_type);
    };
    const std::string any = R"(/.*)";
    server_->Get(any, forward);
    server_->Post(any, forward);
    server_->Patch(any, forward);
    server_->Delete(any, forward);
    if (port == 0) {
      bound_port_ = server_->bind_to_any_port(host);
    } else if (server_->bind_to_port(host, port)) {
      bound_port_ = port;
    }
    if (bound_port_ <= 0) return false;
  }
  return server_->listen_after_bind();
}

void Service::stop() {
  std::lock_guard lock(server_mu_);
  if (server_) server_->stop();
}

}  // namespace cocreate
