// Copyright 2026 The temed Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "temed/llm_gateway.hpp"
#include "temed/schema.hpp"
#include "temed/text_util.hpp"

using namespace temed;
using namespace std::chrono_literals;

namespace {

HttpProviderSettings settings(int attempts = 5) {
  HttpProviderSettings s;
  s.endpoint = "http://localhost/v1/completions";
  s.model_name = "text-davinci-003";
  s.credential_env = "TEMED_TEST_KEY";
  s.max_attempts = attempts;
  return s;
}

std::string completion_body(std::string_view text) { return Json{{"choices", {{{"text", text}}}}}.dump(); }

// Scripted transport: returns the queued responses in order.
struct FakeTransport {
  std::vector<HttpResponse> queue;
  std::shared_ptr<std::vector<std::string>> bodies = std::make_shared<std::vector<std::string>>();
  std::shared_ptr<std::size_t> next = std::make_shared<std::size_t>(0);

  HttpTransport fn() {
    return [q = queue, bodies = bodies, next = next](const std::string& body, const std::string&) {
      bodies->push_back(body);
      return q.at((*next)++);
    };
  }
};

struct SleepLog {
  std::shared_ptr<std::vector<std::chrono::milliseconds>> calls =
      std::make_shared<std::vector<std::chrono::milliseconds>>();
  Sleeper fn() {
    return [c = calls](std::chrono::milliseconds d) { c->push_back(d); };
  }
};

}  // namespace

TEST(Replay, PassThrough) {
  ReplayProvider p({{std::nullopt, R"({"age": 63})"}});
  const auto r = p.complete({"any prompt"});
  EXPECT_EQ(r.text, R"({"age": 63})");
  EXPECT_EQ(r.attempt_count, 1);
  EXPECT_EQ(p.pending(), 0u);
}

TEST(Replay, SubstringMatchBeforeSequence) {
  ReplayProvider p({{std::nullopt, "first"}, {"beta", "matched"}, {std::nullopt, "second"}});
  EXPECT_EQ(p.complete({"alpha beta"}).text, "matched");
  EXPECT_EQ(p.complete({"gamma"}).text, "first");
  EXPECT_EQ(p.complete({"beta again"}).text, "second");
}

TEST(Replay, ExhaustionErrors) {
  ReplayProvider p({{std::nullopt, "a"}, {std::nullopt, "b"}, {std::nullopt, "c"}});
  for (int i = 0; i < 3; ++i) p.complete({"x"});
  try {
    p.complete({"x"});
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind, ProviderErrorKind::script_exhausted);
  }
}

TEST(Replay, ScriptParsing) {
  const auto entries = parse_replay_script(R"([{"response": "a"}, {"match_substring": "k", "response": "b"}])");
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_FALSE(entries[0].match_substring);
  EXPECT_EQ(entries[1].match_substring, "k");
  try {
    parse_replay_script("{not a list");
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind, ProviderErrorKind::unreadable_script);
  }
}

TEST(Replay, PermitPoolBoundsInFlight) {
  std::vector<ReplayEntry> entries(64, {std::nullopt, "ok"});
  ReplayProvider p(entries, 3);
  std::vector<std::thread> pool;
  for (int t = 0; t < 16; ++t) {
    pool.emplace_back([&] {
      for (int i = 0; i < 4; ++i) p.complete({"x"});
    });
  }
  for (auto& t : pool) t.join();
  EXPECT_LE(p.peak_in_flight(), 3);
  EXPECT_GE(p.peak_in_flight(), 1);
}

TEST(Configure, ReplayFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "temed_replay_three.json";
  write_file(path, R"([{"response": "1"}, {"response": "2"}, {"response": "3"}])");
  auto p = configure_provider(ProviderKind::replay, {{"script", path.string()}});
  for (int i = 0; i < 3; ++i) p->complete({"q"});
  EXPECT_THROW(p->complete({"q"}), ProviderError);
  std::filesystem::remove(path);
}

TEST(Configure, Errors) {
  auto kind_of = [](ProviderKind k, const std::map<std::string, std::string>& s) {
    try {
      configure_provider(k, s);
    } catch (const ProviderError& e) {
      return e.kind;
    }
    ADD_FAILURE() << "configure_provider accepted the settings";
    return ProviderErrorKind::bad_request;
  };
  EXPECT_EQ(kind_of(ProviderKind::replay, {}), ProviderErrorKind::missing_setting);
  EXPECT_EQ(kind_of(ProviderKind::replay, {{"script", "/nonexistent/script.json"}}),
            ProviderErrorKind::unreadable_script);
  ::unsetenv("TEMED_TEST_UNSET_KEY");
  EXPECT_EQ(kind_of(ProviderKind::http, {{"endpoint", "http://localhost/x"},
                                         {"model_name", "m"},
                                         {"credential_env", "TEMED_TEST_UNSET_KEY"}}),
            ProviderErrorKind::missing_setting);
  EXPECT_EQ(kind_of(ProviderKind::http, {{"model_name", "m"}, {"credential_env", "K"}}),
            ProviderErrorKind::missing_setting);
}

TEST(Configure, HttpTaggedWithModel) {
  ::setenv("TEMED_TEST_KEY", "secret", 1);
  auto p = configure_provider(ProviderKind::http, {{"endpoint", "http://localhost:1/v1/completions"},
                                                   {"model_name", "text-davinci-003"},
                                                   {"credential_env", "TEMED_TEST_KEY"}});
  EXPECT_EQ(p->model_id(), "text-davinci-003");
}

TEST(Http, RetriesServerErrorsThenSucceeds) {
  FakeTransport t{{{500, "", {}, ""}, {500, "", {}, ""}, {200, completion_body("hello"), {}, ""}}};
  SleepLog sleeps;
  HttpProvider p(settings(), "k", t.fn(), sleeps.fn());
  const auto r = p.complete({"prompt"});
  EXPECT_EQ(r.text, "hello");
  EXPECT_EQ(r.attempt_count, 3);
  ASSERT_EQ(sleeps.calls->size(), 2u);
  // Base 1 s, factor 2, jitter up to 25%.
  EXPECT_GE((*sleeps.calls)[0], 1000ms);
  EXPECT_LE((*sleeps.calls)[0], 1250ms);
  EXPECT_GE((*sleeps.calls)[1], 2000ms);
  EXPECT_LE((*sleeps.calls)[1], 2500ms);
}

TEST(Http, ExhaustedRetriesCarryLastStatus) {
  FakeTransport t{{{502, "", {}, ""}, {0, "", {}, "connection refused"}, {503, "", {}, ""}}};
  SleepLog sleeps;
  HttpProvider p(settings(3), "k", t.fn(), sleeps.fn());
  try {
    p.complete({"prompt"});
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.kind, ProviderErrorKind::exhausted_retries);
    EXPECT_EQ(e.last_status, 503);
  }
  EXPECT_EQ(sleeps.calls->size(), 2u);
}

TEST(Http, HonorsRetryAfterOn429) {
  FakeTransport t{{{429, "", 7.0, ""}, {200, completion_body("x"), {}, ""}}};
  SleepLog sleeps;
  HttpProvider p(settings(), "k", t.fn(), sleeps.fn());
  EXPECT_EQ(p.complete({"prompt"}).attempt_count, 2);
  ASSERT_EQ(sleeps.calls->size(), 1u);
  EXPECT_EQ((*sleeps.calls)[0], 7000ms);
}

TEST(Http, NonRetryableFailures) {
  auto kind_after = [](HttpResponse res) {
    FakeTransport t{{res}};
    HttpProvider p(settings(), "k", t.fn(), [](std::chrono::milliseconds) {});
    try {
      p.complete({"prompt"});
    } catch (const ProviderError& e) {
      EXPECT_EQ(*t.next, 1u);
      return e.kind;
    }
    ADD_FAILURE();
    return ProviderErrorKind::exhausted_retries;
  };
  EXPECT_EQ(kind_after({401, "", {}, ""}), ProviderErrorKind::authentication_failure);
  EXPECT_EQ(kind_after({413, "", {}, ""}), ProviderErrorKind::request_too_large);
  EXPECT_EQ(kind_after({400, R"({"error": {"code": "context_length_exceeded"}})", {}, ""}),
            ProviderErrorKind::request_too_large);
  EXPECT_EQ(kind_after({400, "bad", {}, ""}), ProviderErrorKind::bad_request);
  EXPECT_EQ(kind_after({200, "{}", {}, ""}), ProviderErrorKind::bad_response);
}

TEST(Http, RequestBodies) {
  HttpProvider completions(settings(), "k", FakeTransport{}.fn(), {});
  CompletionRequest req{"hi", 1024, 0.0, {}};
  const auto a = Json::parse(completions.request_body(req));
  EXPECT_EQ(a["model"], "text-davinci-003");
  EXPECT_EQ(a["prompt"], "hi");
  EXPECT_EQ(a["temperature"], 0.0);
  EXPECT_EQ(a["max_tokens"], 1024);

  auto s = settings();
  s.style = ApiStyle::chat;
  HttpProvider chat(s, "k", FakeTransport{}.fn(), {});
  const auto b = Json::parse(chat.request_body(req));
  EXPECT_EQ(b["messages"][0]["content"], "hi");
  EXPECT_EQ(chat.response_text(R"({"choices": [{"message": {"content": "ans"}}]})"), "ans");
}

// Real socket round trip against a local server.
TEST(Http, LocalServerRoundTrip) {
  httplib::Server server;
  std::atomic<int> hits{0};
  std::string seen_auth;
  server.Post("/v1/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (hits++ == 0) {
      res.status = 503;
      return;
    }
    seen_auth = req.get_header_value("Authorization");
    const auto body = Json::parse(req.body);
    res.set_content(completion_body("echo:" + body["prompt"].get<std::string>()), "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread runner([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  auto s = settings();
  s.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/completions";
  s.timeout_seconds = 5;
  HttpProvider p(s, "tok", make_httplib_transport(s.endpoint, s.timeout_seconds), [](std::chrono::milliseconds) {});
  const auto r = p.complete({"ping"});
  server.stop();
  runner.join();

  EXPECT_EQ(r.text, "echo:ping");
  EXPECT_EQ(r.attempt_count, 2);
  EXPECT_EQ(seen_auth, "Bearer tok");
}
