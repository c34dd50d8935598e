#include <gtest/gtest.h>

#include <fstream>

#include <httplib.h>

#include "survey_support.hpp"

using namespace dtnarrate;
using namespace dtnarrate::survey;
using testing_support::example_study;

namespace {

struct Fixture {
  testing_support::TempDir dir{"http"};
  SurveyService service{example_study(), dir.file("r.log")};
  std::unique_ptr<HttpServer> server;
  int port = 0;

  explicit Fixture(HttpOptions options = {"secret", ""}) {
    server = std::make_unique<HttpServer>(service, std::move(options));
    port = server->start_background();
  }
  ~Fixture() { server->stop(); }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

Json body(const httplib::Result& r) { return Json::parse(r->body); }

std::vector<int> zeros() { return std::vector<int>(example_study().displayed_features.size(), 0); }

}  // namespace

TEST(Http, FullFlowAndExport) {
  Fixture f;
  auto cli = f.client();
  auto created = cli.Post("/api/sessions", "", "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const Json session = body(created);
  const std::string id = session["participant"];
  EXPECT_EQ(session["pages"], 10);
  EXPECT_EQ(session["cursor"], 0);
  EXPECT_EQ(session["order"].size(), 5u);

  for (int cursor = 0; cursor < 10; ++cursor) {
    auto page = cli.Get("/api/sessions/" + id + "/pages/" + std::to_string(cursor));
    ASSERT_TRUE(page);
    ASSERT_EQ(page->status, 200) << page->body;
    EXPECT_EQ(page->get_header_value("Content-Type"), "application/json");
    EXPECT_EQ(page->body.find("correct"), std::string::npos);
    const Json p = body(page);
    testing_support::Answer a;
    a.before = zeros();
    a.after = zeros();
    a.after[cursor % a.after.size()] = 1;
    const Json payload = cursor % 2 ? testing_support::page2_payload(p, a) : testing_support::page1_payload(p, a);
    auto sub = cli.Post("/api/sessions/" + id + "/submit", payload.dump(), "application/json");
    ASSERT_TRUE(sub);
    ASSERT_EQ(sub->status, 200) << sub->body;
    EXPECT_EQ(body(sub)["cursor"], cursor + 1);
    EXPECT_EQ(body(sub)["completed"], cursor == 9);
  }
  auto done = cli.Get("/api/sessions/" + id + "/pages/0");
  EXPECT_EQ(done->status, 410);
  EXPECT_EQ(body(done)["error"]["code"], "session_completed");

  httplib::Headers auth = {{"X-Operator-Token", "secret"}};
  auto ex = cli.Get("/api/export", auth);
  ASSERT_EQ(ex->status, 200);
  const auto parsed = export_from_json_text(ex->body);
  EXPECT_EQ(parsed.responses.size(), 5u);
  EXPECT_EQ(parsed, f.service.export_responses());

  EXPECT_EQ(cli.Get("/api/export")->status, 401);
  EXPECT_EQ(cli.Get("/api/export", httplib::Headers{{"X-Operator-Token", "wrong"}})->status, 401);
}

TEST(Http, ErrorStatuses) {
  Fixture f;
  auto cli = f.client();
  const std::string id = body(cli.Post("/api/sessions", "", "application/json"))["participant"];
  const std::string submit = "/api/sessions/" + id + "/submit";

  auto unknown = cli.Get("/api/sessions/nobody/pages/0");
  EXPECT_EQ(unknown->status, 404);
  EXPECT_EQ(body(unknown)["error"]["code"], "unknown_session");
  EXPECT_EQ(cli.Get("/api/sessions/" + id + "/pages/4")->status, 400);
  EXPECT_EQ(cli.Get("/api/sessions/" + id + "/pages/99999999999")->status, 400);

  auto malformed = cli.Post(submit, "{not json", "application/json");
  EXPECT_EQ(malformed->status, 400);
  EXPECT_EQ(body(malformed)["error"]["code"], "validation_failed");

  const Json p0 = body(cli.Get("/api/sessions/" + id + "/pages/0"));
  testing_support::Answer a;
  a.before = zeros();
  const Json payload = testing_support::page1_payload(p0, a);
  EXPECT_EQ(cli.Post(submit, payload.dump(), "application/json")->status, 200);
  auto dup = cli.Post(submit, payload.dump(), "application/json");
  EXPECT_EQ(dup->status, 409);
  EXPECT_EQ(body(dup)["error"]["code"], "duplicate_submission");

  const Json p1 = body(cli.Get("/api/sessions/" + id + "/pages/1"));
  a.after = zeros();
  a.cr = 7;
  auto bad = cli.Post(submit, testing_support::page2_payload(p1, a).dump(), "application/json");
  EXPECT_EQ(bad->status, 400);
  EXPECT_NE(body(bad)["error"]["message"].get<std::string>().find("CR"), std::string::npos);

  auto missing = cli.Get("/api/nothing-here");
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(body(missing)["error"]["code"], "not_found");
}

TEST(Http, ExportDisabledWithoutToken) {
  Fixture f(HttpOptions{"", ""});
  auto cli = f.client();
  EXPECT_EQ(cli.Get("/api/export")->status, 403);
  EXPECT_EQ(cli.Get("/api/export", httplib::Headers{{"X-Operator-Token", ""}})->status, 403);
}

TEST(Http, StaticMount) {
  testing_support::TempDir web("web");
  std::ofstream(web.file("index.html")) << "<html>survey</html>";
  Fixture f(HttpOptions{"t", web.path().string()});
  auto cli = f.client();
  auto r = cli.Get("/index.html");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->body, "<html>survey</html>");
  EXPECT_EQ(cli.Post("/api/sessions", "", "application/json")->status, 201);
}
