#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <thread>

#include "../support/fixture_model.hpp"
#include "jpt/service/http.hpp"
#include "jpt/util/binary_io.hpp"

#include <httplib.h>

namespace jpt {
namespace {

using testing::fixture_path;

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { model_ = testing::train_fixture_model(); }
  static void TearDownTestSuite() { model_.reset(); }

  static Service make_service(bool deterministic) {
    ServiceOptions options;
    options.deterministic = deterministic;
    options.dataset_dir = fixture_path("datasets");
    return Service(testing::make_fixture_engine(model_), options);
  }

  static std::string schema_json() { return binio::read_file(fixture_path("schemas/person_location.json")); }

  static std::string predict_body(bool probs) {
    nlohmann::json body = {{"text", "Yesterday Jordan released a new album near New York"},
                           {"schema", nlohmann::json::parse(schema_json())},
                           {"return_probs", probs}};
    return body.dump();
  }

  static inline std::shared_ptr<Model> model_;
};

void expect_golden(const std::string& name, const std::string& body) {
  const std::string path = fixture_path("golden/service/" + name);
  const char* update = std::getenv("JPT_UPDATE_GOLDENS");
  if (update != nullptr && std::string(update) == "1") {
    binio::write_file(path, body);
    return;
  }
  ASSERT_TRUE(std::filesystem::exists(path)) << path << " is missing; rerun with JPT_UPDATE_GOLDENS=1";
  EXPECT_EQ(body, binio::read_file(path)) << name;
}

TEST_F(ServiceTest, HealthzGolden) {
  Service s = make_service(true);
  HttpResponse r = s.handle("GET", "/healthz", "");
  ASSERT_EQ(r.status, 200) << r.body;
  expect_golden("healthz.json", r.body);
  nlohmann::json j = nlohmann::json::parse(r.body);
  EXPECT_EQ(j.at("config").at("loss").at("w_o"), 0.25);
}

TEST_F(ServiceTest, PredictGolden) {
  Service s = make_service(true);
  HttpResponse a = s.handle("POST", "/v1/predict", predict_body(true));
  ASSERT_EQ(a.status, 200) << a.body;
  EXPECT_EQ(a.body, s.handle("POST", "/v1/predict", predict_body(true)).body);
  EXPECT_EQ(nlohmann::json::parse(a.body).count("timing"), 0u);
  expect_golden("predict.json", a.body);
}

TEST_F(ServiceTest, EvaluateGolden) {
  Service s = make_service(true);
  HttpResponse a = s.handle("POST", "/v1/evaluate", R"({"dataset_id": "sample"})");
  ASSERT_EQ(a.status, 200) << a.body;
  nlohmann::json j = nlohmann::json::parse(a.body);
  EXPECT_EQ(j.at("records"), 6);
  EXPECT_TRUE(j.contains("ambiguous_accuracy"));
  expect_golden("evaluate.json", a.body);

  HttpResponse upload = s.handle(
      "POST", "/v1/evaluate", nlohmann::json({{"jsonl", binio::read_file(fixture_path("datasets/sample.jsonl"))}}).dump());
  EXPECT_EQ(upload.body, a.body);
}

TEST_F(ServiceTest, TimingFieldsSumToTotal) {
  Service s = make_service(false);
  for (int i = 0; i < 20; ++i) {
    HttpResponse r = s.handle("POST", "/v1/predict", predict_body(false));
    ASSERT_EQ(r.status, 200);
    const nlohmann::json t = nlohmann::json::parse(r.body).at("timing");
    const double parts = t.at("render_us").get<double>() + t.at("encode_us").get<double>() +
                         t.at("classify_us").get<double>() + t.at("decode_us").get<double>();
    const double total = t.at("total_us").get<double>();
    ASSERT_GT(total, 0.0);
    EXPECT_LE(std::abs(parts - total), 0.05 * total) << t.dump();
  }
}

TEST_F(ServiceTest, ErrorsAreJsonWithStatus) {
  Service s = make_service(true);
  nlohmann::json empty = nlohmann::json::parse(predict_body(false));
  empty["text"] = "";
  HttpResponse r = s.handle("POST", "/v1/predict", empty.dump());
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(nlohmann::json::parse(r.body).at("error"), "empty input");
  EXPECT_EQ(s.handle("POST", "/v1/predict", "{nope").status, 400);
  EXPECT_EQ(s.handle("POST", "/v1/predict", R"({"text": "a"})").status, 400);
  EXPECT_EQ(s.handle("GET", "/v2/anything", "").status, 404);
  EXPECT_EQ(s.handle("POST", "/v1/evaluate", R"({"dataset_id": "missing"})").status, 404);
  EXPECT_EQ(s.handle("POST", "/v1/evaluate", R"({"dataset_id": "../etc"})").status, 400);
  EXPECT_EQ(s.handle("GET", "/v1/schema/ffff", "").status, 404);
  EXPECT_EQ(s.handle("GET", "/v1/attention/ffff", "").status, 404);
}

TEST_F(ServiceTest, SchemaRegistryAndAttention) {
  Service s = make_service(true);
  HttpResponse reg = s.handle("POST", "/v1/schema", schema_json());
  ASSERT_EQ(reg.status, 200) << reg.body;
  const std::string id = nlohmann::json::parse(reg.body).at("id");
  EXPECT_EQ(id, load_schema(fixture_path("schemas/person_location.json")).id());
  HttpResponse got = s.handle("GET", "/v1/schema/" + id, "");
  ASSERT_EQ(got.status, 200);
  EXPECT_EQ(nlohmann::json::parse(got.body).at("types").size(), 2u);

  nlohmann::json by_id = {{"text", "Jordan gave a long interview"}, {"schema_id", id}, {"return_attention", true}};
  HttpResponse p = s.handle("POST", "/v1/predict", by_id.dump());
  ASSERT_EQ(p.status, 200) << p.body;
  nlohmann::json pj = nlohmann::json::parse(p.body);
  const std::string href = pj.at("attention").at("href");
  HttpResponse csv = s.handle("GET", href, "");
  ASSERT_EQ(csv.status, 200);
  EXPECT_EQ(csv.content_type, "text/csv");
  LabeledMatrix m = attention_from_csv(csv.body);
  EXPECT_EQ(m.values.rows(), m.values.cols());
  EXPECT_GT(m.values.rows(), 0);
}

TEST_F(ServiceTest, RealHttpRoundTrip) {
  Service s = make_service(true);
  const int port = s.bind_any_port("127.0.0.1");
  std::thread server([&] { s.run(); });
  s.wait_until_ready();
  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/healthz");
  auto predict = client.Post("/v1/predict", predict_body(true), "application/json");
  auto bad = client.Post("/v1/predict", "{}", "application/json");
  s.stop();
  server.join();
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  EXPECT_EQ(health->body, s.handle("GET", "/healthz", "").body);
  ASSERT_TRUE(predict);
  EXPECT_EQ(predict->body, s.handle("POST", "/v1/predict", predict_body(true)).body);
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
}

TEST_F(ServiceTest, BusyPortIsAUsageError) {
  Service a = make_service(true);
  const int port = a.bind_any_port("127.0.0.1");
  Service b = make_service(true);
  EXPECT_THROW(b.listen("127.0.0.1", port), UsageError);
  a.stop();
}

}  // namespace
}  // namespace jpt
