#pragma once

// Chat-completion client over HTTP. Request: system message carrying the
// instruction block, user message carrying the rest of the rendered prompt.
// Response: content of the first choice's message. Two retries with
// exponential backoff; in-flight requests bounded by a semaphore.

#include <condition_variable>
#include <mutex>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "palm/genai.hpp"

namespace palm::genai {

class RemoteModelClient final : public ModelClient {
 public:
  explicit RemoteModelClient(RemoteConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.base_url.empty()) {
      throw ModelError(ModelError::Kind::Remote, "remote model endpoint not configured");
    }
  }

  std::string name() const override { return cfg_.model.empty() ? "remote" : cfg_.model; }

  std::string complete(const Prompt& prompt, std::optional<double> temperature,
                       int max_tokens) override {
    InflightSlot slot(*this);

    nlohmann::json body;
    body["model"] = cfg_.model;
    body["messages"] = nlohmann::json::array({
        nlohmann::json{{"role", "system"}, {"content", prompt.instructions}},
        nlohmann::json{{"role", "user"}, {"content", user_message(prompt)}},
    });
    if (temperature) body["temperature"] = *temperature;
    if (max_tokens > 0) body["max_tokens"] = max_tokens;
    const std::string payload = body.dump();

    std::string last_error = "request not attempted";
    int last_status = 0;
    auto backoff = cfg_.backoff;
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      httplib::Client http(cfg_.base_url);
      http.set_connection_timeout(std::chrono::seconds(10));
      http.set_read_timeout(cfg_.timeout);
      httplib::Headers headers;
      if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
      auto res = http.Post(cfg_.path, headers, payload, "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        if (res.error() == httplib::Error::Read || res.error() == httplib::Error::ConnectionTimeout) {
          last_status = -1;  // timeout-like
        }
        continue;
      }
      if (res->status != 200) {
        last_status = res->status;
        last_error = "status " + std::to_string(res->status);
        continue;
      }
      try {
        const auto doc = nlohmann::json::parse(res->body);
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        last_error = std::string("malformed completion payload: ") + e.what();
        last_status = res->status;
      }
    }
    if (last_status == -1) {
      throw ModelError(ModelError::Kind::Timeout, "model request timed out: " + last_error);
    }
    throw ModelError(ModelError::Kind::Remote, "model request failed: " + last_error, last_status);
  }

 private:
  // Everything after the instruction block: examples, premises, target.
  static std::string user_message(const Prompt& prompt) {
    const std::string full = prompt.render();
    if (text::starts_with(full, prompt.instructions)) {
      std::string rest = full.substr(prompt.instructions.size());
      while (!rest.empty() && rest.front() == '\n') rest.erase(rest.begin());
      return rest;
    }
    return full;
  }

  struct InflightSlot {
    explicit InflightSlot(RemoteModelClient& c) : client(c) {
      std::unique_lock<std::mutex> lock(client.mu_);
      client.cv_.wait(lock, [&] { return client.inflight_ < client.cfg_.max_inflight; });
      ++client.inflight_;
    }
    ~InflightSlot() {
      {
        std::lock_guard<std::mutex> lock(client.mu_);
        --client.inflight_;
      }
      client.cv_.notify_one();
    }
    RemoteModelClient& client;
  };

  RemoteConfig cfg_;
  std::mutex mu_;
  std::condition_variable cv_;
  int inflight_ = 0;
};

}  // namespace palm::genai
