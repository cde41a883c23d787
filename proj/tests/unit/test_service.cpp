#include <doctest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "helpers.hpp"
#include "matformer/graph_io.hpp"
#include "matformer/service.hpp"

// After Eigen: the resolver header defines a macro that clashes with it.
#include <httplib.h>

using namespace matformer;
using namespace testutil;
using nlohmann::json;

namespace {

std::string create(AuthoringService& svc, const MaterialGraph& g) {
  const auto r = svc.handle("POST", "/v1/sessions", json{{"graph", graph_to_json(g)}}.dump());
  REQUIRE(r.status == 201);
  return r.body["id"].get<std::string>();
}

json post(AuthoringService& svc, const std::string& path, const json& body, int expect) {
  const auto r = svc.handle("POST", path, body.dump());
  CHECK(r.status == expect);
  return r.body;
}

}  // namespace

TEST_CASE("sessions complete, accept and keep only the chosen nodes") {
  const auto dir = temp_dir("service_flow");
  AuthoringService svc(lib(), random_bundle(3, 0.3), dir);
  const auto base = random_graphs(1, 8, 8, 2).front();
  const auto id = create(svc, base);
  const std::string root = "/v1/sessions/" + id;

  const auto got = svc.handle("GET", root, "");
  CHECK(got.status == 200);
  CHECK(got.body["revision"] == 0);
  CHECK(got.body["graph_hash"] == graph_hash(base));

  const auto round = post(svc, root + "/complete", {{"pinned", {0, 2, 5}}, {"count", 2}, {"seed", 4}}, 200);
  REQUIRE(round["candidates"].size() == 2);
  const auto& c0 = round["candidates"][0];
  CHECK(c0["provenance"][0] == "pinned");
  CHECK(c0["thumbnails"].size() == material_channels().size());
  CHECK(c0["thumbnails"]["albedo"].get<std::string>().rfind("iVBOR", 0) == 0);

  const auto cand = graph_from_json(c0["graph"], lib());
  const auto accepted = post(svc, root + "/accept", {{"candidate", 0}, {"kept", {0, 1, 2}}, {"round", 1}}, 200);
  CHECK(accepted["revision"] == 1);
  const auto now = graph_from_json(accepted["graph"], lib());
  CHECK(structurally_equal(now, induced_subgraph(cand, std::vector<NodeId>{0, 1, 2})));

  post(svc, root + "/accept", {{"candidate", 1}}, 409);
  post(svc, root + "/complete", {{"count", 1}, {"thumbnails", false}}, 200);
  post(svc, root + "/accept", {{"candidate", 0}, {"round", 1}}, 409);
  post(svc, root + "/accept", {{"candidate", 0}, {"revision", 0}}, 409);
}

TEST_CASE("errors map to status codes") {
  const auto dir = temp_dir("service_errors");
  AuthoringService svc(lib(), random_bundle(3), dir);
  const auto id = create(svc, chain3());
  const std::string root = "/v1/sessions/" + id;
  CHECK(svc.handle("GET", "/v1/sessions/nope", "").status == 404);
  CHECK(svc.handle("GET", "/v1/sessions/../../etc", "").status == 404);
  CHECK(svc.handle("GET", "/v2/x", "").status == 404);
  CHECK(svc.handle("POST", root + "/complete", "{not json").status == 400);
  post(svc, root + "/accept", {{"candidate", 0}}, 409);
  post(svc, root + "/complete", {{"pinned", {7}}}, 422);
  post(svc, root + "/complete", {{"pinned", {0, 0}}}, 422);
  post(svc, root + "/complete", {{"count", 0}}, 422);
  post(svc, root + "/complete", {{"count", kMaxCompletions + 1}}, 422);
  post(svc, root + "/complete", {{"temperature", -1}}, 422);
  post(svc, root + "/complete", {{"count", 1}, {"thumbnails", false}}, 200);
  post(svc, root + "/accept", {{"candidate", 9}}, 422);
  post(svc, root + "/accept", {{"candidate", 0}, {"kept", {99}}}, 422);
  post(svc, "/v1/sessions", {{"graph", {{"nodes", "bad"}}}}, 422);
  CHECK(svc.handle("GET", "/v1/library", "").status == 200);

  AuthoringService no_model(lib(), nullptr, temp_dir("service_nomodel"));
  const auto other = create(no_model, chain3());
  post(no_model, "/v1/sessions/" + other + "/complete", json::object(), 503);
}

TEST_CASE("racing accepts on one round: exactly one wins") {
  const auto dir = temp_dir("service_race");
  AuthoringService svc(lib(), random_bundle(5), dir);
  const auto id = create(svc, chain3());
  const std::string root = "/v1/sessions/" + id;
  post(svc, root + "/complete", {{"count", 4}, {"thumbnails", false}}, 200);
  std::atomic<int> ok{0}, conflict{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] {
      const auto r = svc.handle("POST", root + "/accept", json{{"candidate", i % 4}, {"round", 1}}.dump());
      if (r.status == 200) ++ok;
      if (r.status == 409) ++conflict;
    });
  }
  for (auto& t : threads) t.join();
  CHECK(ok == 1);
  CHECK(conflict == 7);
  CHECK(svc.handle("GET", root, "").body["revision"] == 1);
}

TEST_CASE("sessions survive a restart") {
  const auto dir = temp_dir("service_replay");
  std::string id, hash;
  json history;
  {
    AuthoringService svc(lib(), random_bundle(6), dir);
    id = create(svc, random_graphs(1, 6, 6, 9).front());
    const std::string root = "/v1/sessions/" + id;
    post(svc, root + "/complete", {{"count", 2}, {"thumbnails", false}}, 200);
    post(svc, root + "/accept", {{"candidate", 1}, {"kept", {0, 1, 3}}}, 200);
    post(svc, root + "/complete", {{"count", 1}, {"thumbnails", false}}, 200);
    const auto s = svc.handle("GET", root, "");
    hash = s.body["graph_hash"];
    history = s.body["history"];
  }
  AuthoringService again(lib(), nullptr, dir);
  CHECK(again.session_count() == 1);
  const auto s = again.handle("GET", "/v1/sessions/" + id, "");
  REQUIRE(s.status == 200);
  CHECK(s.body["graph_hash"] == hash);
  CHECK(s.body["revision"] == 1);
  CHECK(s.body["history"] == history);
}

TEST_CASE("http transport forwards requests") {
  const auto dir = temp_dir("service_http");
  AuthoringService svc(lib(), random_bundle(7), dir);
  HttpFrontend http(svc);
  const int port = http.bind("127.0.0.1", 0);
  std::thread server([&] { http.serve(); });
  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);
  auto res = client.Post("/v1/sessions", json{{"graph", graph_to_json(chain3())}}.dump(), "application/json");
  for (int i = 0; !res && i < 50; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    res = client.Post("/v1/sessions", json{{"graph", graph_to_json(chain3())}}.dump(), "application/json");
  }
  REQUIRE(res);
  CHECK(res->status == 201);
  const auto id = json::parse(res->body)["id"].get<std::string>();
  auto got = client.Get("/v1/sessions/" + id);
  REQUIRE(got);
  CHECK(got->status == 200);
  auto missing = client.Get("/v1/sessions/zzz");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  http.stop();
  server.join();
}
