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

#include "temed/llm_gateway.hpp"

#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "temed/text_util.hpp"

namespace temed {

using Json = nlohmann::json;

std::string_view to_string(ProviderErrorKind kind) {
  switch (kind) {
    case ProviderErrorKind::exhausted_retries: return "exhausted-retries";
    case ProviderErrorKind::authentication_failure: return "authentication-failure";
    case ProviderErrorKind::request_too_large: return "request-too-large";
    case ProviderErrorKind::bad_request: return "bad-request";
    case ProviderErrorKind::bad_response: return "bad-response";
    case ProviderErrorKind::script_exhausted: return "script-exhausted";
    case ProviderErrorKind::missing_setting: return "missing-setting";
    case ProviderErrorKind::unreadable_script: return "unreadable-script";
  }
  return "bad-response";
}

void PermitPool::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return available_ > 0; });
  --available_;
  ++in_flight_;
  int peak = peak_.load();
  while (in_flight_ > peak && !peak_.compare_exchange_weak(peak, in_flight_)) {
  }
}

void PermitPool::release() {
  {
    std::lock_guard lock(mu_);
    ++available_;
    --in_flight_;
  }
  cv_.notify_one();
}

CompletionResult CompletionProvider::complete(const CompletionRequest& request) {
  if (request.prompt.empty()) throw ProviderError(ProviderErrorKind::bad_request, "prompt is empty");
  if (request.max_tokens <= 0) throw ProviderError(ProviderErrorKind::bad_request, "max_tokens must be positive");
  if (!(request.temperature >= 0.0)) throw ProviderError(ProviderErrorKind::bad_request, "temperature must be >= 0");
  permits_.acquire();
  struct Release {
    PermitPool& pool;
    ~Release() { pool.release(); }
  } release{permits_};
  return do_complete(request);
}

// ---- HTTP -------------------------------------------------------------------

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string resolve_credential(const HttpProviderSettings& s) {
  if (s.credential_env.empty()) {
    throw ProviderError(ProviderErrorKind::missing_setting, "credential_env is not set");
  }
  const char* value = std::getenv(s.credential_env.c_str());
  if (value == nullptr || *value == '\0') {
    throw ProviderError(ProviderErrorKind::missing_setting,
                        "environment variable " + s.credential_env + " holds no credential");
  }
  return value;
}

void default_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

}  // namespace

HttpTransport make_httplib_transport(const std::string& endpoint, int timeout_seconds) {
  auto [host, path] = split_url(endpoint);
  return [host = host, path = path, timeout_seconds](const std::string& body, const std::string& bearer) {
    httplib::Client client(host);
    client.set_connection_timeout(timeout_seconds, 0);
    client.set_read_timeout(timeout_seconds, 0);
    client.set_write_timeout(timeout_seconds, 0);
    if (!bearer.empty()) client.set_bearer_token_auth(bearer);
    HttpResponse out;
    auto res = client.Post(path, body, "application/json");
    if (!res) {
      out.transport_error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    if (res->has_header("Retry-After")) {
      const std::string v = res->get_header_value("Retry-After");
      char* end = nullptr;
      const double secs = std::strtod(v.c_str(), &end);
      if (end != v.c_str() && std::isfinite(secs) && secs >= 0) out.retry_after_seconds = secs;
    }
    return out;
  };
}

HttpProvider::HttpProvider(HttpProviderSettings settings)
    : HttpProvider(settings, resolve_credential(settings),
                   make_httplib_transport(settings.endpoint, settings.timeout_seconds), default_sleep) {}

HttpProvider::HttpProvider(HttpProviderSettings settings, std::string credential, HttpTransport transport,
                           Sleeper sleeper)
    : CompletionProvider("http:" + settings.model_name, settings.max_in_flight),
      settings_(std::move(settings)),
      credential_(std::move(credential)),
      transport_(std::move(transport)),
      sleeper_(sleeper ? std::move(sleeper) : Sleeper(default_sleep)) {
  if (settings_.endpoint.empty()) throw ProviderError(ProviderErrorKind::missing_setting, "endpoint is not set");
  if (settings_.model_name.empty()) {
    throw ProviderError(ProviderErrorKind::missing_setting, "model_name is not set");
  }
  if (settings_.max_attempts < 1) settings_.max_attempts = 1;
}

std::string HttpProvider::request_body(const CompletionRequest& request) const {
  Json body{{"model", settings_.model_name},
            {"max_tokens", request.max_tokens},
            {"temperature", request.temperature}};
  if (settings_.style == ApiStyle::chat) {
    body["messages"] = Json::array({Json{{"role", "user"}, {"content", request.prompt}}});
  } else {
    body["prompt"] = request.prompt;
  }
  if (!request.stop.empty()) body["stop"] = request.stop;
  return body.dump();
}

std::string HttpProvider::response_text(const std::string& body) const {
  try {
    const Json doc = Json::parse(body);
    const Json& choice = doc.at("choices").at(0);
    if (settings_.style == ApiStyle::chat) return choice.at("message").at("content").get<std::string>();
    return choice.at("text").get<std::string>();
  } catch (const Json::exception& e) {
    throw ProviderError(ProviderErrorKind::bad_response, std::string("unexpected completion payload: ") + e.what(),
                        200);
  }
}

CompletionResult HttpProvider::do_complete(const CompletionRequest& request) {
  const std::string body = request_body(request);
  const auto start = std::chrono::steady_clock::now();
  thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
  std::uniform_real_distribution<double> jitter(0.0, settings_.jitter_fraction);

  int last_status = 0;
  std::string last_error;
  for (int attempt = 1; attempt <= settings_.max_attempts; ++attempt) {
    const HttpResponse res = transport_(body, credential_);
    last_status = res.status;
    if (res.status >= 200 && res.status < 300) {
      CompletionResult out;
      out.text = response_text(res.body);
      out.provider_id = id();
      out.attempt_count = attempt;
      out.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
      return out;
    }
    if (res.status == 401 || res.status == 403) {
      throw ProviderError(ProviderErrorKind::authentication_failure,
                          "provider rejected the credential (HTTP " + std::to_string(res.status) + ")",
                          res.status);
    }
    if (res.status == 413 || (res.status == 400 && res.body.find("context_length_exceeded") != std::string::npos)) {
      throw ProviderError(ProviderErrorKind::request_too_large,
                          "prompt exceeds the provider's request limit (HTTP " + std::to_string(res.status) + ")",
                          res.status);
    }
    const bool retryable = res.status == 0 || res.status == 408 || res.status == 429 || res.status >= 500;
    if (!retryable) {
      throw ProviderError(ProviderErrorKind::bad_request,
                          "HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 500), res.status);
    }
    last_error = res.status == 0 ? res.transport_error : "HTTP " + std::to_string(res.status);
    if (attempt == settings_.max_attempts) break;

    double delay_ms = static_cast<double>(settings_.backoff_base.count()) *
                      std::pow(settings_.backoff_factor, attempt - 1) * (1.0 + jitter(jitter_rng));
    if (res.status == 429 && res.retry_after_seconds) delay_ms = *res.retry_after_seconds * 1000.0;
    sleeper_(std::chrono::milliseconds(static_cast<std::int64_t>(delay_ms)));
  }
  throw ProviderError(ProviderErrorKind::exhausted_retries,
                      "gave up after " + std::to_string(settings_.max_attempts) + " attempts; last error: " +
                          last_error,
                      last_status);
}

// ---- replay ------------------------------------------------------------------

ReplayProvider::ReplayProvider(std::vector<ReplayEntry> entries, int max_in_flight)
    : CompletionProvider("replay", max_in_flight),
      entries_(std::move(entries)),
      consumed_(entries_.size(), false) {}

std::size_t ReplayProvider::pending() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (bool c : consumed_) n += c ? 0 : 1;
  return n;
}

CompletionResult ReplayProvider::do_complete(const CompletionRequest& request) {
  std::lock_guard lock(mu_);
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < entries_.size() && !pick; ++i) {
    if (!consumed_[i] && entries_[i].match_substring &&
        request.prompt.find(*entries_[i].match_substring) != std::string::npos) {
      pick = i;
    }
  }
  for (std::size_t i = 0; i < entries_.size() && !pick; ++i) {
    if (!consumed_[i] && !entries_[i].match_substring) pick = i;
  }
  if (!pick) {
    throw ProviderError(ProviderErrorKind::script_exhausted, "replay script has no pending entry for this request");
  }
  consumed_[*pick] = true;
  return CompletionResult{entries_[*pick].response, id(), 0, 1};
}

std::vector<ReplayEntry> parse_replay_script(const std::string& text) {
  std::vector<ReplayEntry> out;
  try {
    const Json doc = Json::parse(text);
    if (!doc.is_array()) throw ProviderError(ProviderErrorKind::unreadable_script, "replay script must be a list");
    for (const auto& e : doc) {
      ReplayEntry entry;
      entry.response = e.at("response").get<std::string>();
      if (auto m = e.find("match_substring"); m != e.end() && !m->is_null()) {
        entry.match_substring = m->get<std::string>();
      }
      out.push_back(std::move(entry));
    }
  } catch (const Json::exception& e) {
    throw ProviderError(ProviderErrorKind::unreadable_script, std::string("bad replay script: ") + e.what());
  }
  return out;
}

std::vector<ReplayEntry> load_replay_script(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const std::exception& e) {
    throw ProviderError(ProviderErrorKind::unreadable_script, e.what());
  }
  return parse_replay_script(text);
}

namespace {

const std::string& require(const std::map<std::string, std::string>& s, const std::string& key) {
  auto it = s.find(key);
  if (it == s.end() || it->second.empty()) {
    throw ProviderError(ProviderErrorKind::missing_setting, "provider setting '" + key + "' is required");
  }
  return it->second;
}

int int_setting(const std::map<std::string, std::string>& s, const std::string& key, int fallback) {
  auto it = s.find(key);
  if (it == s.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw ProviderError(ProviderErrorKind::missing_setting, "provider setting '" + key + "' must be an integer");
  }
}

}  // namespace

std::shared_ptr<CompletionProvider> configure_provider(ProviderKind kind,
                                                       const std::map<std::string, std::string>& settings) {
  const int max_in_flight = int_setting(settings, "max_in_flight", 4);
  if (kind == ProviderKind::replay) {
    return std::make_shared<ReplayProvider>(load_replay_script(require(settings, "script")), max_in_flight);
  }
  HttpProviderSettings s;
  s.endpoint = require(settings, "endpoint");
  s.model_name = require(settings, "model_name");
  s.credential_env = require(settings, "credential_env");
  if (auto it = settings.find("api_style"); it != settings.end()) {
    if (it->second == "chat") {
      s.style = ApiStyle::chat;
    } else if (it->second != "completions") {
      throw ProviderError(ProviderErrorKind::missing_setting, "api_style must be 'completions' or 'chat'");
    }
  }
  s.max_attempts = int_setting(settings, "max_attempts", s.max_attempts);
  s.backoff_base = std::chrono::milliseconds(int_setting(settings, "backoff_base_ms", 1000));
  s.timeout_seconds = int_setting(settings, "timeout_seconds", s.timeout_seconds);
  s.max_in_flight = max_in_flight;
  return std::make_shared<HttpProvider>(std::move(s));
}

}  // namespace temed
