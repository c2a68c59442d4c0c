#include "jpt/service/http.hpp"

#include <chrono>
#include <filesystem>

#include <httplib.h>

#include "jpt/util/error.hpp"
#include "jpt/util/hash.hpp"

namespace jpt {
namespace {

using Clock = std::chrono::steady_clock;

std::int64_t micros(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration_cast<std::chrono::microseconds>(b - a).count();
}

HttpResponse json_response(int status, const nlohmann::json& body) { return {status, "application/json", body.dump()}; }

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

nlohmann::json parse_body(const std::string& body) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError("request body must be a JSON object");
  return j;
}

bool flag(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return false;
  if (!j.at(key).is_boolean()) throw DataError(std::string("'") + key + "' must be a boolean");
  return j.at(key).get<bool>();
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.compare(0, prefix.size(), prefix) == 0; }

}  // namespace

struct Service::Server {
  httplib::Server http;
};

Service::Service(std::shared_ptr<Engine> engine, ServiceOptions options)
    : engine_(std::move(engine)), options_(std::move(options)) {
  if (!engine_) throw UsageError("service needs an engine");
}

HttpResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) {
  try {
    if (method == "GET" && path == "/healthz") return healthz();
    if (method == "POST" && path == "/v1/predict") return predict(body);
    if (method == "POST" && path == "/v1/evaluate") return evaluate(body);
    if (method == "POST" && path == "/v1/schema") return register_schema(body);
    if (method == "GET" && starts_with(path, "/v1/schema/")) return get_schema(path.substr(11));
    if (method == "GET" && starts_with(path, "/v1/attention/")) return get_attention(path.substr(14));
    return error_response(404, "no route for " + method + " " + path);
  } catch (const UsageError& e) {
    return error_response(400, e.what());
  } catch (const DataError& e) {
    return error_response(400, e.what());
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, std::string("bad request: ") + e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

HttpResponse Service::healthz() const {
  const Model& m = engine_->model();
  return json_response(200, {{"status", "ok"},
                             {"checksum", to_hex(m.checksum())},
                             {"backbone_checksum", to_hex(m.backbone_checksum())},
                             {"config", to_json(m.config())}});
}

EntitySchema Service::resolve_schema(const nlohmann::json& request) const {
  if (request.contains("schema_id")) {
    std::string id = request.at("schema_id").get<std::string>();
    std::lock_guard<std::mutex> lock(schema_mutex_);
    auto it = schemas_.find(id);
    if (it == schemas_.end()) throw DataError("unknown schema_id '" + id + "'; register it with POST /v1/schema");
    return it->second;
  }
  if (!request.contains("schema")) throw DataError("request needs 'schema' or 'schema_id'");
  EntitySchema schema = schema_from_json(request.at("schema"));
  if (schema.types.empty()) throw DataError("empty schema");
  schema.validate();
  return schema;
}

HttpResponse Service::predict(const std::string& body) {
  const Clock::time_point t0 = Clock::now();
  nlohmann::json request = parse_body(body);
  if (!request.contains("text") || !request.at("text").is_string()) throw DataError("request needs a string 'text'");
  const std::string text = request.at("text").get<std::string>();
  if (text.empty()) throw DataError("empty input");
  const EntitySchema schema = resolve_schema(request);
  PredictOptions options;
  options.return_probs = flag(request, "return_probs");
  options.return_attention = flag(request, "return_attention");
  const bool chunk = flag(request, "chunk");
  if (chunk && options.return_attention) throw DataError("return_attention is not available with chunk");
  const Clock::time_point t1 = Clock::now();

  PredictResult result =
      chunk ? engine_->predict_chunked(text, schema, options) : engine_->predict(text, schema, options);
  const Clock::time_point t2 = Clock::now();

  nlohmann::json out = predict_to_json(result, schema, options.return_probs);
  if (options.return_attention && result.attention) {
    std::string csv = attention_to_csv(*result.attention, result.attention_labels, result.attention_labels);
    std::string job = to_hex(fnv1a64(schema.id() + '\n' + text));
    {
      std::lock_guard<std::mutex> lock(attention_mutex_);
      if (attention_jobs_.size() >= options_.max_attention_jobs && !attention_jobs_.count(job)) {
        attention_jobs_.erase(attention_jobs_.begin());
      }
      attention_jobs_[job] = std::move(csv);
    }
    out["attention"] = {{"job", job}, {"href", "/v1/attention/" + job}};
  }
  if (!options_.deterministic) {
    const Clock::time_point t3 = Clock::now();
    const StageTiming& st = result.timing;
    // Request parsing counts toward render, response assembly toward decode.
    out["timing"] = {{"render_us", st.render_us + micros(t0, t1)},
                     {"encode_us", st.encode_us},
                     {"classify_us", st.classify_us},
                     {"decode_us", st.decode_us + micros(t2, t3)},
                     {"total_us", micros(t0, t3)}};
  }
  return json_response(200, out);
}

HttpResponse Service::evaluate(const std::string& body) {
  nlohmann::json request = parse_body(body);
  Dataset data;
  if (request.contains("dataset_id")) {
    std::string id = request.at("dataset_id").get<std::string>();
    if (options_.dataset_dir.empty()) throw DataError("no dataset directory configured; upload JSONL instead");
    if (id.empty() || id.find_first_of("/\\") != std::string::npos || id.find("..") != std::string::npos) {
      throw DataError("bad dataset_id '" + id + "'");
    }
    std::filesystem::path base(options_.dataset_dir);
    if (std::filesystem::exists(base / (id + ".jsonl"))) data = read_jsonl((base / (id + ".jsonl")).string());
    else if (std::filesystem::exists(base / (id + ".conll"))) data = read_conll((base / (id + ".conll")).string());
    else return error_response(404, "unknown dataset_id '" + id + "'");
  } else if (request.contains("jsonl")) {
    data = parse_jsonl(request.at("jsonl").get<std::string>(), "<upload>");
  } else {
    throw DataError("request needs 'dataset_id' or 'jsonl'");
  }
  if (data.records.empty()) throw DataError("empty dataset");
  if (request.contains("schema")) apply_schema_definitions(data, schema_from_json(request.at("schema")));

  std::lock_guard<std::mutex> lock(eval_mutex_);
  EvalOutcome outcome = engine_->evaluate(data);
  nlohmann::json out = report_to_json(outcome.report);
  out["token_f1"] = outcome.token_prf.f1;
  if (outcome.ambiguous_tokens > 0) out["ambiguous_accuracy"] = outcome.ambiguous_accuracy();
  nlohmann::json errors = nlohmann::json::array();
  for (const std::string& line : outcome.error_lines) errors.push_back(nlohmann::json::parse(line));
  out["errors"] = std::move(errors);
  return json_response(200, out);
}

HttpResponse Service::register_schema(const std::string& body) {
  EntitySchema schema = schema_from_json(parse_body(body));
  if (schema.types.empty()) throw DataError("empty schema");
  schema.validate();
  std::lock_guard<std::mutex> lock(schema_mutex_);
  engine_->raw_entities(schema);
  std::string id = schema.id();
  schemas_[id] = schema;
  return json_response(200, {{"id", id}, {"num_types", schema.num_types()}});
}

HttpResponse Service::get_schema(const std::string& id) const {
  std::lock_guard<std::mutex> lock(schema_mutex_);
  auto it = schemas_.find(id);
  if (it == schemas_.end()) return error_response(404, "unknown schema '" + id + "'");
  nlohmann::json out = schema_to_json(it->second);
  out["id"] = id;
  return json_response(200, out);
}

HttpResponse Service::get_attention(const std::string& job) const {
  std::lock_guard<std::mutex> lock(attention_mutex_);
  auto it = attention_jobs_.find(job);
  if (it == attention_jobs_.end()) {
    return error_response(404, "unknown attention job '" + job + "'; request it with return_attention");
  }
  return {200, "text/csv", it->second};
}

Service::Server& Service::ensure_server() {
  if (!server_) {
    server_ = std::make_shared<Server>();
    server_->http.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
      HttpResponse r = handle(req.method, req.path, req.body);
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    server_->http.Get(".*", route);
    server_->http.Post(".*", route);
  }
  return *server_;
}

int Service::bind_any_port(const std::string& host) {
  int port = ensure_server().http.bind_to_any_port(host);
  if (port < 0) throw UsageError("cannot bind " + host + "; check the address");
  return port;
}

void Service::run() {
  if (!server_) throw UsageError("service is not bound");
  server_->http.listen_after_bind();
}

void Service::listen(const std::string& host, int port) {
  if (!ensure_server().http.bind_to_port(host, port)) {
    throw UsageError("cannot bind " + host + ":" + std::to_string(port) + "; the port may be in use (try --port)");
  }
  server_->http.listen_after_bind();
}

void Service::wait_until_ready() {
  if (!server_) throw UsageError("service is not bound");
  server_->http.wait_until_ready();
}

void Service::stop() {
  if (server_) server_->http.stop();
}

}  // namespace jpt
