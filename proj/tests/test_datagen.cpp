#include <doctest.h>

#include "creagen/datagen.hpp"
#include "creagen/records.hpp"
#include "support/fixtures.hpp"

#include <atomic>
#include <filesystem>
#include <thread>

#include <httplib.h>
#include <json.hpp>

using namespace creagen;

namespace {

RawLog sample_log() {
  RawLog log;
  log.user_id = "user-x";
  log.history = {{"i1", "trail running shoes", {{"feature", "light"}}},
                 {"i2", "hydration vest", {}}};
  log.ad.ad_id = "ad-x";
  log.ad.original_title = "trail shoes ultra grip";
  log.ad.selling_points = {"light weight", "all weather sole"};
  log.ad.query = "running shoes";
  return log;
}

}  // namespace

TEST_SUITE("datagen") {

TEST_CASE("template rendering substitutes placeholders and keeps {} literal") {
  PromptTemplate t{"demo", "Hello {name}, order {} now {name}!"};
  const std::string out = t.render({{"name", "Ada"}});
  CHECK(out == "Hello Ada, order {} now Ada!");
}

TEST_CASE("template rendering fails on unbound placeholders") {
  PromptTemplate t{"demo", "Hello {name} from {place}"};
  CHECK_THROWS_WITH_AS(t.render({{"name", "Ada"}}),
                       doctest::Contains("{place}"), std::invalid_argument);
}

TEST_CASE("profiling prompt renders to a golden string") {
  PromptLibrary prompts = PromptLibrary::defaults();
  prompts.interest_profiling.text =
      "profile:\n{history}query: {query}\n";  // minimal template for the golden
  const RawLog log = sample_log();
  const std::string rendered = prompts.interest_profiling.render(
      {{"history", render_history(log.history, 20)},
       {"query", *log.ad.query}});
  CHECK(rendered ==
        "profile:\n"
        "- trail running shoes ; feature: light\n"
        "- hydration vest\n"
        "query: running shoes\n");
}

TEST_CASE("profile_user_interests returns the mock output verbatim") {
  MockTeacherClient mock;
  const RawLog log = sample_log();
  std::uint64_t prompt_hash = 0;
  const std::string interests =
      profile_user_interests(log.history, log.ad.query, mock,
                             PromptLibrary::defaults(), {}, &prompt_hash);
  CHECK(prompt_hash != 0);
  CHECK(interests.find("long_term:") != std::string::npos);
  CHECK(interests.find("short_term:") != std::string::npos);
  CHECK(interests.find("specific_needs:") != std::string::npos);

  // Deterministic mock: identical output on a second call.
  CHECK(profile_user_interests(log.history, log.ad.query, mock,
                               PromptLibrary::defaults()) == interests);
}

TEST_CASE("profiling an empty history fails before any client call") {
  struct Exploding : TeacherClient {
    std::string complete(const std::string&, const DecodeOptions&) override {
      FAIL("client must not be called");
      return "";
    }
    std::string model_name() const override { return "exploding"; }
  } client;
  CHECK_THROWS_AS(profile_user_interests({}, std::nullopt, client,
                                         PromptLibrary::defaults()),
                  std::invalid_argument);
}

TEST_CASE("title generation parses the structured reply") {
  MockTeacherClient mock({0.0, 0, "mock"});  // no hallucinations
  const RawLog log = sample_log();
  const std::string interests = profile_user_interests(
      log.history, log.ad.query, mock, PromptLibrary::defaults());
  const GeneratedTitle out = generate_personalized_title(
      log.history, interests, log.ad, log.ad.query, mock,
      PromptLibrary::defaults());
  CHECK(!out.title.empty());
  CHECK(out.title.find(log.ad.original_title) == 0);
  CHECK(!out.selling_points.empty());
}

TEST_CASE("generation requires interests first") {
  MockTeacherClient mock;
  const RawLog log = sample_log();
  CHECK_THROWS_AS(
      generate_personalized_title(log.history, "", log.ad, log.ad.query, mock,
                                  PromptLibrary::defaults()),
      std::invalid_argument);
}

TEST_CASE("generation prompt includes the query when provided") {
  // Golden render of the title-generation prompt over a fixed template.
  PromptLibrary prompts = PromptLibrary::defaults();
  prompts.title_generation.text = "t:{ad_title}|q:{query}|i:{interests}";
  const RawLog log = sample_log();
  const std::string rendered = prompts.title_generation.render(
      {{"ad_title", log.ad.original_title},
       {"query", *log.ad.query},
       {"interests", "likes running"},
       {"history", "unused"},
       {"selling_points", "unused"}});
  CHECK(rendered == "t:trail shoes ultra grip|q:running shoes|i:likes running");
}

TEST_CASE("unparseable teacher replies raise errors carrying the raw text") {
  struct Malformed : TeacherClient {
    std::string complete(const std::string&, const DecodeOptions&) override {
      return "no structured fields here at all";
    }
    std::string model_name() const override { return "malformed"; }
  } client;
  const RawLog log = sample_log();
  CHECK_THROWS_WITH_AS(
      generate_personalized_title(log.history, "likes shoes", log.ad,
                                  log.ad.query, client,
                                  PromptLibrary::defaults()),
      doctest::Contains("no structured fields here at all"),
      std::runtime_error);
}

TEST_CASE("hallucination filter passes only on the exact {} sentinel") {
  const RawLog log = sample_log();

  struct Fixed : TeacherClient {
    std::string reply;
    std::string complete(const std::string&, const DecodeOptions&) override {
      return reply;
    }
    std::string model_name() const override { return "fixed"; }
  } client;

  client.reply = "{}";
  CHECK(hallucination_filter("title", log.ad, client,
                             PromptLibrary::defaults())
            .pass);
  client.reply = "  {}\n";  // surrounding whitespace tolerated
  CHECK(hallucination_filter("title", log.ad, client,
                             PromptLibrary::defaults())
            .pass);
  client.reply = R"({"499": "number not present"})";
  const FilterVerdict verdict = hallucination_filter(
      "title 499", log.ad, client, PromptLibrary::defaults());
  CHECK_FALSE(verdict.pass);
  CHECK(verdict.reason.find("499") != std::string::npos);
}

TEST_CASE("the deterministic mock flags fabricated numbers") {
  MockTeacherClient mock;
  const RawLog log = sample_log();
  CHECK(hallucination_filter("trail shoes ultra grip", log.ad, mock,
                             PromptLibrary::defaults())
            .pass);
  CHECK_FALSE(hallucination_filter("trail shoes only 4999 today", log.ad, mock,
                                   PromptLibrary::defaults())
                  .pass);
}

TEST_CASE("retry policy: transient failures recover, hard failures carry attempts") {
  MockTeacherClient flaky({0.0, 2, "flaky"});  // first two calls fail
  const RawLog log = sample_log();
  DatagenConfig cfg;
  cfg.max_attempts = 3;
  cfg.backoff_ms = 0;
  const std::string interests = profile_user_interests(
      log.history, log.ad.query, flaky, PromptLibrary::defaults(), cfg);
  CHECK(!interests.empty());

  MockTeacherClient dead({0.0, 1000, "dead"});
  try {
    profile_user_interests(log.history, log.ad.query, dead,
                           PromptLibrary::defaults(), cfg);
    FAIL("expected TeacherError");
  } catch (const TeacherError& e) {
    CHECK(e.attempts() == 3);
    CHECK(e.retriable());
  }
}

TEST_CASE("build_dataset bookkeeping: half-passing mock gives retention 0.5") {
  // Wrapper that appends a fabricated number to every second generated
  // title; the mock filter then fails exactly those rows.
  struct HalfBad : TeacherClient {
    MockTeacherClient inner{{0.0, 0, "inner"}};
    std::atomic<int> titles{0};
    std::string complete(const std::string& prompt,
                         const DecodeOptions& opts) override {
      std::string out = inner.complete(prompt, opts);
      if (prompt.rfind("You are writing one personalized ad title", 0) == 0) {
        if (titles.fetch_add(1) % 2 == 1) {
          const auto pos = out.rfind("title: ");
          out.insert(out.find('\n', pos), " 31337 edition");
        }
      }
      return out;
    }
    std::string model_name() const override { return "half-bad"; }
  } client;

  const auto logs = fixtures::make_raw_logs(10, 3);
  const DatagenResult result =
      build_dataset(logs, client, PromptLibrary::defaults());
  CHECK(result.stats.input_rows == 10);
  CHECK(result.stats.passed_filter == 5);
  CHECK(result.stats.dropped_by_filter == 5);
  CHECK(result.stats.retention() == doctest::Approx(0.5));
  CHECK(result.records.size() == 5);
}

TEST_CASE("build_dataset with no rows gives an empty result with zeroed stats") {
  MockTeacherClient mock;
  const DatagenResult result =
      build_dataset({}, mock, PromptLibrary::defaults());
  CHECK(result.records.empty());
  CHECK(result.stats.input_rows == 0);
  CHECK(result.stats.retention() == 0.0);
  CHECK(!result.stats.prompt_hashes.empty());
}

TEST_CASE("stage errors quarantine the row and never abort the batch") {
  auto logs = fixtures::make_raw_logs(4, 5);
  logs[2].history.clear();  // profiling will fail for this row
  MockTeacherClient mock({0.0, 0, "mock"});
  const DatagenResult result =
      build_dataset(logs, mock, PromptLibrary::defaults());
  CHECK(result.stats.quarantined == 1);
  CHECK(result.stats.passed_filter + result.stats.dropped_by_filter == 3);
  REQUIRE(result.stats.quarantine_log.size() == 1);
  CHECK(result.stats.quarantine_log[0].find("row 2") != std::string::npos);
}

TEST_CASE("every emitted record is complete and filter-clean") {
  MockTeacherClient mock;  // default 25% hallucination injection
  const auto logs = fixtures::make_raw_logs(20, 11);
  const DatagenResult result =
      build_dataset(logs, mock, PromptLibrary::defaults());
  CHECK(result.stats.dropped_by_filter > 0);  // the filter did something
  for (const auto& r : result.records) {
    CHECK(!r.interest_text.empty());
    CHECK(!r.response.empty());
    CHECK(hallucination_filter(r.response, r.ad, mock,
                               PromptLibrary::defaults())
              .pass);
  }
}

TEST_CASE("build_dataset is a pure function of logs under the mock") {
  MockTeacherClient mock;
  const auto logs = fixtures::make_raw_logs(12, 13);
  const DatagenResult a = build_dataset(logs, mock, PromptLibrary::defaults());
  const DatagenResult b = build_dataset(logs, mock, PromptLibrary::defaults());
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i)
    CHECK(record_to_json_line(a.records[i]) == record_to_json_line(b.records[i]));

  // Bounded-parallel execution preserves output order and content.
  DatagenConfig par;
  par.concurrency = 4;
  const DatagenResult c =
      build_dataset(logs, mock, PromptLibrary::defaults(), par);
  REQUIRE(c.records.size() == a.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i)
    CHECK(record_to_json_line(c.records[i]) == record_to_json_line(a.records[i]));
}

TEST_CASE("prompt library directory round-trip preserves hashes") {
  const PromptLibrary defaults = PromptLibrary::defaults();
  const std::string dir =
      (std::filesystem::temp_directory_path() / "creagen_prompts").string();
  defaults.save_dir(dir);
  const PromptLibrary loaded = PromptLibrary::load_dir(dir);
  CHECK(loaded.hashes_hex() == defaults.hashes_hex());
  std::filesystem::remove_all(dir);
}

TEST_CASE("http teacher client round-trips against a local server") {
  httplib::Server server;
  std::atomic<int> failures_left{1};
  server.Post("/v1/complete", [&](const httplib::Request& req,
                                  httplib::Response& res) {
    if (failures_left.fetch_sub(1) > 0) {
      res.status = 503;  // first call fails, exercising the retry path
      return;
    }
    const auto body = nlohmann::json::parse(req.body);
    CHECK(req.get_header_value("Authorization") == "Bearer sekret");
    nlohmann::json reply = {
        {"text", "echo: " + body.at("prompt").get<std::string>()}};
    res.set_content(reply.dump(), "application/json");
  });

  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread server_thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  setenv("CREAGEN_TEST_TOKEN", "sekret", 1);
  HttpTeacherConfig cfg;
  cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
  cfg.auth_token_env = "CREAGEN_TEST_TOKEN";
  HttpTeacherClient client(cfg);

  const std::string out =
      complete_with_retry(client, "ping", {}, 3, /*backoff_ms=*/0);
  CHECK(out == "echo: ping");

  server.stop();
  server_thread.join();
}

TEST_CASE("http teacher client reports unreachable endpoints as retriable") {
  HttpTeacherConfig cfg;
  cfg.base_url = "http://127.0.0.1:9";  // discard port, nothing listens
  cfg.timeout_ms = 200;
  HttpTeacherClient client(cfg);
  try {
    client.complete("ping", {});
    FAIL("expected TeacherError");
  } catch (const TeacherError& e) {
    CHECK(e.retriable());
  }
}

}  // TEST_SUITE
