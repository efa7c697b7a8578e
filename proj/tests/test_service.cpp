#include <gtest/gtest.h>

#include <thread>

#include "nsc/service/service.hpp"
#include "test_util.hpp"

using namespace nsc;
using namespace nsc::service;

namespace {

std::shared_ptr<const ModelBundle> untrained(std::size_t q = 3) {
  return std::make_shared<const ModelBundle>(nsc::testing::tiny_bundle(6, 3, 2, StoppingConfig{1e-6, q, true, true}));
}

/// Full model trained on a world where the explicit pair names the disease.
std::shared_ptr<const ModelBundle> separable_model() {
  static std::shared_ptr<const ModelBundle> model = [] {
    auto split = nsc::testing::separable_world(400, 5);
    TrainConfig cfg;
    cfg.layer_sizes = {32};
    cfg.dropout = 0.1;
    cfg.epochs = 8;
    cfg.batch_size = 32;
    cfg.learning_rate = 5e-3;
    cfg.beta = 0.3;
    cfg.max_attempts = 5;
    return std::make_shared<const ModelBundle>(train_model(split, cfg).bundle);
  }();
  return model;
}

}  // namespace

TEST(Service, CreateValidation) {
  ConsultationService svc(untrained(), "abc");
  EXPECT_EQ(svc.create_session(R"({"explicit": []})").status, 422);
  EXPECT_EQ(svc.create_session("{not json").status, 400);
  EXPECT_EQ(svc.create_session(R"({"explicit": "symptom_000"})").status, 400);
  auto r = svc.create_session(R"({"explicit": ["symptom_000", "sneezing"]})");
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["unknown"], nlohmann::json::array({"sneezing"}));
  EXPECT_EQ(svc.session_count(), 0u);
}

TEST(Service, AnswersUntilCapThenConflict) {
  ConsultationService svc(untrained(3), "abc");
  auto r = svc.create_session(R"({"explicit": ["symptom_000"]})");
  ASSERT_EQ(r.status, 201);
  const std::string id = r.body["session_id"];
  EXPECT_EQ(id.size(), 32u);
  EXPECT_EQ(r.body["status"], "asking");
  EXPECT_TRUE(r.body["question"].is_string());
  EXPECT_EQ(r.body["top"].size(), 3u);
  for (int i = 0; i < 3; ++i) {
    r = svc.answer(id, R"({"present": false})");
    ASSERT_EQ(r.status, 200);
  }
  EXPECT_EQ(r.body["status"], "concluded");
  EXPECT_EQ(r.body["stop_reason"], "exhausted_Q");
  EXPECT_TRUE(r.body["question"].is_null());
  EXPECT_EQ(svc.answer(id, R"({"present": true})").status, 409);
  EXPECT_EQ(svc.answer(id, R"({"present": 1})").status, 400);

  auto full = svc.get_session(id);
  ASSERT_EQ(full.status, 200);
  EXPECT_EQ(full.body["steps"].size(), 3u);
  EXPECT_EQ(full.body["explicit"], nlohmann::json::array({"symptom_000"}));
}

TEST(Service, UnknownSessionAndMetadata) {
  ConsultationService svc(untrained(), "feedbeef");
  EXPECT_EQ(svc.get_session("0123").status, 404);
  EXPECT_EQ(svc.answer("0123", R"({"present": true})").status, 404);
  auto h = svc.health();
  EXPECT_EQ(h.body["checkpoint_hash"], "feedbeef");
  EXPECT_EQ(h.body["version"], kServiceVersion);
  auto v = svc.vocab();
  EXPECT_EQ(v.body["symptoms"].size(), 6u);
  EXPECT_EQ(v.body["diseases"].size(), 3u);
}

TEST(Service, IdleSessionsExpire) {
  auto now = std::chrono::steady_clock::time_point{};
  ConsultationService svc(untrained(), "x", std::chrono::minutes(30), [&] { return now; });
  const std::string id = svc.create_session(R"({"explicit": ["symptom_001"]})").body["session_id"];
  now += std::chrono::minutes(29);
  EXPECT_EQ(svc.answer(id, R"({"present": true})").status, 200);
  now += std::chrono::minutes(29);
  EXPECT_EQ(svc.get_session(id).status, 200);
  now += std::chrono::minutes(31);
  EXPECT_EQ(svc.purge_expired(), 1u);
  EXPECT_EQ(svc.get_session(id).status, 404);
}

TEST(Service, UnambiguousDiseaseConcludesImmediately) {
  auto model = separable_model();
  ConsultationService svc(model, "x");
  auto r = svc.create_session(R"({"explicit": ["symptom_004", "symptom_005"]})");
  ASSERT_EQ(r.status, 201);
  EXPECT_EQ(r.body["status"], "concluded");
  EXPECT_EQ(r.body["stop_reason"], "below_beta");
  EXPECT_TRUE(r.body["question"].is_null());
  EXPECT_EQ(r.body["top"][0]["disease"], "disease_002");
  EXPECT_LT(r.body["uncertainty"].get<double>(), model->stopping.beta);
}

TEST(Service, HttpRoundTripWithCors) {
  ConsultationService svc(untrained(2), "cafe");
  httplib::Server server;
  mount(server, svc, "http://localhost:8000");
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  auto res = cli.Post("/api/v1/sessions", R"({"explicit": ["symptom_002"]})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "http://localhost:8000");
  const std::string id = nlohmann::json::parse(res->body)["session_id"];
  res = cli.Post("/api/v1/sessions/" + id + "/answer", R"({"present": true})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  res = cli.Get("/api/v1/sessions/" + id);
  ASSERT_TRUE(res);
  EXPECT_EQ(nlohmann::json::parse(res->body)["steps"].size(), 1u);
  res = cli.Get("/api/v1/health");
  ASSERT_TRUE(res);
  EXPECT_EQ(nlohmann::json::parse(res->body)["checkpoint_hash"], "cafe");
  res = cli.Options("/api/v1/sessions");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_NE(res->get_header_value("Access-Control-Allow-Methods").find("POST"), std::string::npos);
  res = cli.Get("/api/v1/sessions/ffff");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);

  server.stop();
  th.join();
}
