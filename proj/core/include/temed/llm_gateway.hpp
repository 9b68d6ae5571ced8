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

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace temed {

struct CompletionRequest {
  std::string prompt;
  int max_tokens = 1024;
  double temperature = 0.0;
  std::vector<std::string> stop{};
};

struct CompletionResult {
  std::string text;
  std::string provider_id;
  std::int64_t latency_ms = 0;
  int attempt_count = 1;
};

enum class ProviderErrorKind {
  exhausted_retries,
  authentication_failure,
  request_too_large,
  bad_request,
  bad_response,
  script_exhausted,
  missing_setting,
  unreadable_script,
};

std::string_view to_string(ProviderErrorKind kind);

struct ProviderError : std::runtime_error {
  ProviderError(ProviderErrorKind k, std::string message, int status = 0)
      : std::runtime_error(std::move(message)), kind(k), last_status(status) {}
  ProviderErrorKind kind;
  int last_status;  // last HTTP status seen, 0 for transport failures / non-HTTP
};

// Bounds concurrent in-flight requests and records the peak for tests.
class PermitPool {
 public:
  explicit PermitPool(int permits) : available_(permits > 0 ? permits : 1) {}
  void acquire();
  void release();
  int peak_in_flight() const { return peak_.load(); }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int available_;
  int in_flight_ = 0;
  std::atomic<int> peak_{0};
};

class CompletionProvider {
 public:
  CompletionProvider(std::string id, int max_in_flight) : id_(std::move(id)), permits_(max_in_flight) {}
  virtual ~CompletionProvider() = default;
  CompletionProvider(const CompletionProvider&) = delete;
  CompletionProvider& operator=(const CompletionProvider&) = delete;

  // Thread-safe. Throws ProviderError.
  CompletionResult complete(const CompletionRequest& request);

  const std::string& id() const { return id_; }
  virtual std::string model_id() const { return id_; }
  int peak_in_flight() const { return permits_.peak_in_flight(); }

 protected:
  virtual CompletionResult do_complete(const CompletionRequest& request) = 0;

 private:
  std::string id_;
  PermitPool permits_;
};

// ---- HTTP -------------------------------------------------------------------

struct HttpResponse {
  int status = 0;  // 0 = transport failure
  std::string body;
  std::optional<double> retry_after_seconds;
  std::string transport_error;
};

// POSTs `body` with the bearer token; swapped out in tests.
using HttpTransport = std::function<HttpResponse(const std::string& body, const std::string& bearer)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

enum class ApiStyle { completions, chat };

struct HttpProviderSettings {
  std::string endpoint;  // full URL, e.g. https://api.openai.com/v1/completions
  std::string model_name;
  std::string credential_env;
  ApiStyle style = ApiStyle::completions;
  int max_attempts = 5;
  std::chrono::milliseconds backoff_base{1000};
  double backoff_factor = 2.0;
  double jitter_fraction = 0.25;
  int timeout_seconds = 120;
  int max_in_flight = 4;
};

class HttpProvider final : public CompletionProvider {
 public:
  // Resolves the credential from the environment; throws ProviderError(missing_setting).
  explicit HttpProvider(HttpProviderSettings settings);
  HttpProvider(HttpProviderSettings settings, std::string credential, HttpTransport transport, Sleeper sleeper);

  std::string model_id() const override { return settings_.model_name; }
  const HttpProviderSettings& settings() const { return settings_; }

  std::string request_body(const CompletionRequest& request) const;
  std::string response_text(const std::string& body) const;

 protected:
  CompletionResult do_complete(const CompletionRequest& request) override;

 private:
  HttpProviderSettings settings_;
  std::string credential_;
  HttpTransport transport_;
  Sleeper sleeper_;
};

HttpTransport make_httplib_transport(const std::string& endpoint, int timeout_seconds);

// ---- replay ------------------------------------------------------------------

struct ReplayEntry {
  std::optional<std::string> match_substring;
  std::string response;
};

// Each request consumes the first pending entry whose match_substring occurs
// in the prompt; failing that, the first pending entry without a matcher.
class ReplayProvider final : public CompletionProvider {
 public:
  explicit ReplayProvider(std::vector<ReplayEntry> entries, int max_in_flight = 4);

  std::size_t pending() const;

 protected:
  CompletionResult do_complete(const CompletionRequest& request) override;

 private:
  mutable std::mutex mu_;
  std::vector<ReplayEntry> entries_;
  std::vector<bool> consumed_;
};

std::vector<ReplayEntry> load_replay_script(const std::filesystem::path& path);
std::vector<ReplayEntry> parse_replay_script(const std::string& text);

enum class ProviderKind { http, replay };

// http: endpoint, model_name, credential_env (+ optional api_style, max_attempts,
// backoff_base_ms, timeout_seconds, max_in_flight). replay: script (+ max_in_flight).
std::shared_ptr<CompletionProvider> configure_provider(ProviderKind kind,
                                                       const std::map<std::string, std::string>& settings);

}  // namespace temed
