#pragma once

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>

#include "json.hpp"

#include "minileak/common.hpp"
#include "minileak/ingest.hpp"
#include "minileak/llm/prompt.hpp"
#include "minileak/llm/reply.hpp"

namespace minileak::llm {

inline constexpr const char* kApiKeyEnv = "MINILEAK_API_KEY";

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds backoff_base{500};
};

struct BackendConfig {
    std::string endpoint;
    std::string model;
    double temperature = 0.0;
    int max_output_tokens = 1024;
    int timeout_seconds = 60;
    int context_tokens = 16384;
    int max_inflight = 4;
    RetryPolicy retry;

    void validate() const {
        if (temperature < 0.0 || temperature > 2.0) throw Error(ErrorCode::Usage, "temperature must be in [0,2]");
        if (retry.max_attempts < 1) throw Error(ErrorCode::Usage, "retry attempts must be at least 1");
        if (max_inflight < 1 || max_inflight > 1024)
            throw Error(ErrorCode::Usage, "max in-flight requests must be in [1,1024]");
    }
};

struct Usage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct LlmReply {
    std::string raw_text;
    ParsedReply parsed;
    std::optional<Usage> usage;
    int attempts = 1;
};

class Backend {
public:
    virtual ~Backend() = default;
    /// Returns the verbatim completion text or throws Error.
    virtual std::string complete(const PromptBundle& bundle, std::optional<Usage>* usage, int* attempts) = 0;
};

inline LlmReply invoke(Backend& backend, const PromptBundle& bundle) {
    LlmReply r;
    r.raw_text = backend.complete(bundle, &r.usage, &r.attempts);
    r.parsed = parse_reply(r.raw_text, &bundle);
    return r;
}

// ---------------------------------------------------------------------------
// Replay backend
// ---------------------------------------------------------------------------

/// Key of a bundle in the replay directory.
inline std::string bundle_key(const PromptBundle& bundle) { return sha256_hex(bundle.user_message()); }

class MockBackend : public Backend {
public:
    explicit MockBackend(std::filesystem::path dir) : dir_(std::move(dir)) {
        if (!std::filesystem::is_directory(dir_))
            throw Error(ErrorCode::BackendUnreachable, "mock reply directory not found: " + dir_.string());
    }

    std::filesystem::path reply_path(const PromptBundle& bundle) const { return dir_ / (bundle_key(bundle) + ".reply.txt"); }

    std::string complete(const PromptBundle& bundle, std::optional<Usage>*, int* attempts) override {
        if (attempts) *attempts = 1;
        const auto p = reply_path(bundle);
        auto text = ::minileak::detail::read_file(p);
        if (!text) throw Error(ErrorCode::BackendUnreachable, "no mock reply " + p.filename().string());
        return *text;
    }

private:
    std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Live backend over an abstract transport
// ---------------------------------------------------------------------------

struct HttpResponse {
    int status = 0; // 0 = transport failure
    std::string body;
    std::string error;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse post(const std::string& url, const std::map<std::string, std::string>& headers,
                              const std::string& body, int timeout_seconds) = 0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline std::optional<std::string> api_key_from_env() {
    const char* v = std::getenv(kApiKeyEnv);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

inline std::string request_body(const BackendConfig& cfg, const PromptBundle& bundle) {
    nlohmann::ordered_json j;
    j["model"] = cfg.model;
    j["messages"] = nlohmann::ordered_json::array(
        {{{"role", "system"}, {"content", bundle.system_text}}, {{"role", "user"}, {"content", bundle.user_message()}}});
    j["temperature"] = cfg.temperature;
    j["max_tokens"] = cfg.max_output_tokens;
    return j.dump();
}

class LiveBackend : public Backend {
public:
    LiveBackend(BackendConfig cfg, Transport& transport, std::optional<std::string> api_key = api_key_from_env(),
                Sleeper sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
        : cfg_(std::move(cfg)), transport_(transport), api_key_(std::move(api_key)), sleep_(std::move(sleeper)),
          gate_((cfg_.validate(), cfg_.max_inflight)) {}

    std::string complete(const PromptBundle& bundle, std::optional<Usage>* usage, int* attempts) override {
        if (!api_key_) throw Error(ErrorCode::AuthFailed, std::string("environment variable ") + kApiKeyEnv + " is not set");
        if (bundle.token_estimate + cfg_.max_output_tokens > cfg_.context_tokens)
            throw Error(ErrorCode::BudgetExceeded, "prompt of ~" + std::to_string(bundle.token_estimate) +
                                                       " tokens exceeds model context of " +
                                                       std::to_string(cfg_.context_tokens));
        const auto body = request_body(cfg_, bundle);
        const std::map<std::string, std::string> headers{{"Authorization", "Bearer " + *api_key_},
                                                         {"Content-Type", "application/json"}};
        std::string last_error;
        for (int k = 0; k < cfg_.retry.max_attempts; ++k) {
            if (attempts) *attempts = k + 1;
            HttpResponse resp;
            {
                gate_.acquire();
                try {
                    resp = transport_.post(cfg_.endpoint, headers, body, cfg_.timeout_seconds);
                } catch (...) {
                    gate_.release();
                    throw;
                }
                gate_.release();
            }
            if (resp.status == 200) return extract_content(resp.body, usage);
            if (resp.status == 401 || resp.status == 403)
                throw Error(ErrorCode::AuthFailed, "backend rejected credentials (HTTP " + std::to_string(resp.status) + ")");
            const bool retryable = resp.status == 0 || resp.status == 429 || resp.status >= 500;
            last_error = resp.status == 0 ? "transport error: " + resp.error : "HTTP " + std::to_string(resp.status);
            if (!retryable) break;
            if (k + 1 < cfg_.retry.max_attempts) sleep_(cfg_.retry.backoff_base * (1LL << std::min(k, 30)));
        }
        throw Error(ErrorCode::BackendUnreachable, "backend unreachable: " + last_error);
    }

    const BackendConfig& config() const { return cfg_; }

private:
    BackendConfig cfg_;
    Transport& transport_;
    std::optional<std::string> api_key_;
    Sleeper sleep_;
    std::counting_semaphore<1024> gate_;

    static std::string extract_content(const std::string& body, std::optional<Usage>* usage) {
        auto j = nlohmann::json::parse(body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
            throw Error(ErrorCode::BackendUnreachable, "malformed completion response");
        const auto& msg = j["choices"][0];
        std::string content;
        if (msg.contains("message") && msg["message"].contains("content") && msg["message"]["content"].is_string())
            content = msg["message"]["content"].get<std::string>();
        else if (msg.contains("text") && msg["text"].is_string())
            content = msg["text"].get<std::string>();
        else
            throw Error(ErrorCode::BackendUnreachable, "completion response has no content");
        if (usage && j.contains("usage") && j["usage"].is_object()) {
            Usage u;
            u.prompt_tokens = j["usage"].value("prompt_tokens", 0);
            u.completion_tokens = j["usage"].value("completion_tokens", 0);
            *usage = u;
        }
        return content;
    }
};

} // namespace minileak::llm
