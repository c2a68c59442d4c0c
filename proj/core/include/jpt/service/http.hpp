#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "jpt/service/engine.hpp"

namespace jpt {

struct ServiceOptions {
  // Omits timing and anything else that varies between identical requests.
  bool deterministic = false;
  // POST /v1/evaluate {"dataset_id": "x"} reads <dataset_dir>/x.jsonl or x.conll.
  std::string dataset_dir;
  std::size_t max_attention_jobs = 256;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

// Endpoints, all JSON unless noted:
//   GET  /healthz                model checksums and config echo
//   POST /v1/predict             {"text", "schema" | "schema_id", "return_probs"?, "return_attention"?, "chunk"?}
//   POST /v1/evaluate            {"dataset_id" | "jsonl", "schema"?} -> EvalReport
//   POST /v1/schema              schema JSON -> {"id", "num_types"}; warms the embedding cache
//   GET  /v1/schema/{id}         registered schema
//   GET  /v1/attention/{job}     text/csv roll-up from a predict with return_attention
// Errors are {"error": message} with 400 (bad request or data), 404 or 500.
class Service {
 public:
  Service(std::shared_ptr<Engine> engine, ServiceOptions options);

  // Transport-independent dispatch; safe to call concurrently.
  HttpResponse handle(const std::string& method, const std::string& path, const std::string& body);

  // Binds and serves until stop(). Throws UsageError when the address is
  // unavailable.
  void listen(const std::string& host, int port);
  // Binds to an ephemeral port and returns it; serve with run().
  int bind_any_port(const std::string& host);
  void run();
  // Blocks until run() or listen() accepts connections.
  void wait_until_ready();
  void stop();

  const Engine& engine() const { return *engine_; }

 private:
  HttpResponse healthz() const;
  HttpResponse predict(const std::string& body);
  HttpResponse evaluate(const std::string& body);
  HttpResponse register_schema(const std::string& body);
  HttpResponse get_schema(const std::string& id) const;
  HttpResponse get_attention(const std::string& job) const;

  EntitySchema resolve_schema(const nlohmann::json& request) const;

  std::shared_ptr<Engine> engine_;
  ServiceOptions options_;

  mutable std::mutex schema_mutex_;
  std::map<std::string, EntitySchema> schemas_;
  std::mutex eval_mutex_;
  mutable std::mutex attention_mutex_;
  std::map<std::string, std::string> attention_jobs_;  // job -> CSV

  struct Server;
  Server& ensure_server();
  std::shared_ptr<Server> server_;
};

}  // namespace jpt
